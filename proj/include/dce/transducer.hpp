// Copyright 2026 The dyncascade Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Stateless-embedding transducer decoder: prediction network, joint network,
// lattice loss, greedy and beam decoding, and edit-distance scoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dce/corpus.hpp"
#include "dce/layout.hpp"
#include "dce/tensor.hpp"

namespace dce {

// kStandard allows several labels per frame (blank advances time). In
// kMonotonic every output, label or blank, consumes one frame, so a sequence
// of U labels needs U <= T frames and the label distribution over sequences
// of length <= T sums to one.
enum class Lattice { kMonotonic, kStandard };

std::string to_string(Lattice l);
Lattice parse_lattice(const std::string& s);

struct DecoderConfig {
  int vocab_size = 4096;  // labels 1..V; 0 is blank
  int embed_dim = 320;
  int label_context = 2;
  int joint_dim = 384;
  Lattice lattice = Lattice::kMonotonic;
  int max_symbols_per_frame = 4;  // only used by kStandard decoding

  int num_outputs() const { return vocab_size + 1; }
  std::vector<std::string> violations() const;
};

TensorLayout decoder_layout(const DecoderConfig& cfg, int encoder_dim, const std::string& prefix);
Index decoder_param_count(const DecoderConfig& cfg, int encoder_dim);

std::string decoder_prefix(int k);

// Row u holds the `label_context` labels preceding position u, oldest first,
// left-padded with blank; rows run u = 0..U.
std::vector<std::vector<int>> label_contexts(const std::vector<int>& labels, int label_context);

namespace detail {

inline void check_labels(const DecoderConfig& cfg, const std::vector<int>& labels) {
  for (int l : labels) {
    if (l < 0 || l > cfg.vocab_size) {
      throw DataError("label " + std::to_string(l) + " outside [0, " + std::to_string(cfg.vocab_size) + "]");
    }
  }
}

template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  const Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  if (a == ninf) return b;
  if (b == ninf) return a;
  const Scalar m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace detail

// Concatenated context embeddings -> projection -> tanh, one row per context.
template <typename Scalar>
Var<Scalar> prediction_network(Binder<Scalar>& p, const std::string& prefix, const DecoderConfig& cfg,
                               const std::vector<std::vector<int>>& contexts) {
  const Index R = static_cast<Index>(contexts.size());
  if (cfg.label_context == 0) {
    Var<Scalar> zeros = p.constant(Mat<Scalar>::Zero(R, cfg.embed_dim));
    return tanh(add(zeros, p(prefix + ".pred.b")));
  }
  std::vector<Var<Scalar>> slots;
  for (int i = 0; i < cfg.label_context; ++i) {
    std::vector<Index> ids;
    for (const auto& ctx : contexts) {
      if (static_cast<int>(ctx.size()) != cfg.label_context) {
        throw DataError("prediction_network: context length " + std::to_string(ctx.size()) + " != " +
                        std::to_string(cfg.label_context));
      }
      detail::check_labels(cfg, ctx);
      ids.push_back(ctx[i]);
    }
    slots.push_back(embedding(p(prefix + ".embed." + std::to_string(i)), ids));
  }
  Var<Scalar> joined = slots.size() == 1 ? slots[0] : concat(slots, 1);
  return tanh(linear(p, prefix + ".pred", joined));
}

template <typename Scalar>
Var<Scalar> joint_encoder_projection(Binder<Scalar>& p, const std::string& prefix, const Var<Scalar>& enc) {
  return linear(p, prefix + ".joint.enc", enc);
}

template <typename Scalar>
Var<Scalar> joint_prediction_projection(Binder<Scalar>& p, const std::string& prefix, const Var<Scalar>& pred) {
  return matmul(pred, p(prefix + ".joint.pred.w"));
}

// Logits over blank + V labels for one encoder row and one prediction row.
template <typename Scalar>
Var<Scalar> joint_network(Binder<Scalar>& p, const std::string& prefix, const DecoderConfig& cfg,
                          const Var<Scalar>& enc_t, const Var<Scalar>& pred_u) {
  if (enc_t.rows() != 1 || pred_u.rows() != 1 || pred_u.cols() != cfg.embed_dim) {
    throw ShapeError("joint_network: expected single rows, got " + detail::shape_str(enc_t) + " and " +
                     detail::shape_str(pred_u));
  }
  Var<Scalar> z = tanh(add(joint_encoder_projection(p, prefix, enc_t), joint_prediction_projection(p, prefix, pred_u)));
  return linear(p, prefix + ".joint.out", z);
}

// Per-cell log-probabilities of a lattice, computed without the tape.
template <typename Scalar>
struct LatticeScores {
  Mat<Scalar> blank;  // T x (U+1)
  Mat<Scalar> label;  // T x (U+1); column U unused
};

// Forward/backward variables for one lattice. Monotonic lattices index time
// 0..T (frames consumed); standard lattices index 0..T-1.
template <typename Scalar>
struct LatticeSums {
  Mat<Scalar> alpha;
  Mat<Scalar> beta;
  Scalar log_prob = 0;
};

template <typename Scalar>
LatticeSums<Scalar> lattice_sums(const LatticeScores<Scalar>& s, Lattice lattice) {
  const Index T = s.blank.rows(), U = s.blank.cols() - 1;
  const Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  LatticeSums<Scalar> r;
  if (lattice == Lattice::kStandard) {
    r.alpha = Mat<Scalar>::Constant(T, U + 1, ninf);
    r.beta = Mat<Scalar>::Constant(T, U + 1, ninf);
    for (Index t = 0; t < T; ++t) {
      for (Index u = 0; u <= U; ++u) {
        if (t == 0 && u == 0) {
          r.alpha(t, u) = 0;
          continue;
        }
        Scalar a = ninf;
        if (t > 0) a = r.alpha(t - 1, u) + s.blank(t - 1, u);
        if (u > 0) a = detail::log_add(a, r.alpha(t, u - 1) + s.label(t, u - 1));
        r.alpha(t, u) = a;
      }
    }
    for (Index t = T - 1; t >= 0; --t) {
      for (Index u = U; u >= 0; --u) {
        if (t == T - 1 && u == U) {
          r.beta(t, u) = s.blank(t, u);
          continue;
        }
        Scalar b = ninf;
        if (t + 1 < T) b = r.beta(t + 1, u) + s.blank(t, u);
        if (u < U) b = detail::log_add(b, r.beta(t, u + 1) + s.label(t, u));
        r.beta(t, u) = b;
      }
    }
    r.log_prob = r.alpha(T - 1, U) + s.blank(T - 1, U);
  } else {
    r.alpha = Mat<Scalar>::Constant(T + 1, U + 1, ninf);
    r.beta = Mat<Scalar>::Constant(T + 1, U + 1, ninf);
    r.alpha(0, 0) = 0;
    for (Index t = 1; t <= T; ++t) {
      for (Index u = 0; u <= std::min(t, U); ++u) {
        Scalar a = r.alpha(t - 1, u) + s.blank(t - 1, u);
        if (u > 0) a = detail::log_add(a, r.alpha(t - 1, u - 1) + s.label(t - 1, u - 1));
        r.alpha(t, u) = a;
      }
    }
    r.beta(T, U) = 0;
    for (Index t = T - 1; t >= 0; --t) {
      for (Index u = 0; u <= U; ++u) {
        Scalar b = r.beta(t + 1, u) + s.blank(t, u);
        if (u < U) b = detail::log_add(b, r.beta(t + 1, u + 1) + s.label(t, u));
        r.beta(t, u) = b;
      }
    }
    r.log_prob = r.alpha(T, U);
  }
  return r;
}

// -log P(labels | encoder) from the joint network evaluated on every lattice
// cell. Inputs are the joint's projected encoder rows (T x J), projected
// prediction rows ((U+1) x J) and the output layer. One fused primitive: the
// backward pass uses the alpha/beta occupancies directly.
template <typename Scalar>
Var<Scalar> rnnt_lattice_loss(const Var<Scalar>& enc_proj, const Var<Scalar>& pred_proj, const Var<Scalar>& w_out,
                              const Var<Scalar>& b_out, const std::vector<int>& labels, Lattice lattice) {
  const Index T = enc_proj.rows(), J = enc_proj.cols(), U = static_cast<Index>(labels.size());
  const Index K = w_out.cols();
  if (pred_proj.rows() != U + 1 || pred_proj.cols() != J || w_out.rows() != J || b_out.rows() != 1 ||
      b_out.cols() != K) {
    detail::shape_fail("rnnt_loss", "enc " + detail::shape_str(enc_proj) + " pred " + detail::shape_str(pred_proj) +
                                        " out " + detail::shape_str(w_out));
  }
  if (T < 1) throw DataError("rnnt_loss: empty encoder sequence");
  if (lattice == Lattice::kMonotonic && U > T) {
    throw DataError("rnnt_loss: infeasible lattice, " + std::to_string(U) + " labels over " + std::to_string(T) +
                    " frames");
  }
  for (int l : labels) {
    if (l < 1 || l >= K) throw DataError("rnnt_loss: label " + std::to_string(l) + " out of range");
  }
  const Index cells = T * (U + 1);
  Mat<Scalar> z(cells, J);
  for (Index t = 0; t < T; ++t) {
    for (Index u = 0; u <= U; ++u) {
      z.row(t * (U + 1) + u) = (enc_proj.value().row(t) + pred_proj.value().row(u)).unaryExpr([](Scalar v) {
        return std::tanh(v);
      });
    }
  }
  Mat<Scalar> logp = z * w_out.value();
  logp.rowwise() += b_out.value().row(0);
  for (Index c = 0; c < cells; ++c) {
    const Scalar m = logp.row(c).maxCoeff();
    Scalar s = 0;
    for (Index k = 0; k < K; ++k) s += std::exp(logp(c, k) - m);
    const Scalar lse = m + std::log(s);
    for (Index k = 0; k < K; ++k) logp(c, k) -= lse;
  }
  LatticeScores<Scalar> scores{Mat<Scalar>(T, U + 1), Mat<Scalar>::Constant(T, U + 1, -std::numeric_limits<Scalar>::infinity())};
  for (Index t = 0; t < T; ++t) {
    for (Index u = 0; u <= U; ++u) {
      scores.blank(t, u) = logp(t * (U + 1) + u, kBlank);
      if (u < U) scores.label(t, u) = logp(t * (U + 1) + u, labels[u]);
    }
  }
  LatticeSums<Scalar> sums = lattice_sums(scores, lattice);
  if (!std::isfinite(static_cast<double>(sums.log_prob))) {
    throw NumericError("rnnt_loss: lattice has zero probability");
  }
  Mat<Scalar> out(1, 1);
  out(0, 0) = -sums.log_prob;
  const int ie = enc_proj.id(), ip = pred_proj.id(), iw = w_out.id(), ib = b_out.id();
  return enc_proj.tape()->record(
      "rnnt_loss", std::move(out), {enc_proj, pred_proj, w_out, b_out},
      [ie, ip, iw, ib, T, U, K, labels, lattice, z = std::move(z), logp = std::move(logp),
       sums = std::move(sums)](Tape<Scalar>& tape, int self) {
        const Scalar upstream = tape.grad(self)(0, 0);
        const Scalar ninf = -std::numeric_limits<Scalar>::infinity();
        const bool mono = lattice == Lattice::kMonotonic;
        // d(-log P)/d logits for every cell.
        Mat<Scalar> dlogits = Mat<Scalar>::Zero(T * (U + 1), K);
        for (Index t = 0; t < T; ++t) {
          for (Index u = 0; u <= U; ++u) {
            const Index c = t * (U + 1) + u;
            const Scalar a = sums.alpha(t, u);
            if (a == ninf) continue;
            Scalar after_blank = ninf, after_label = ninf;
            if (mono) {
              after_blank = sums.beta(t + 1, u);
              if (u < U) after_label = sums.beta(t + 1, u + 1);
            } else {
              after_blank = t + 1 < T ? sums.beta(t + 1, u) : (u == U ? Scalar(0) : ninf);
              if (u < U) after_label = sums.beta(t, u + 1);
            }
            const Scalar gb = after_blank == ninf ? Scalar(0)
                                                  : -std::exp(a + logp(c, kBlank) + after_blank - sums.log_prob);
            const Scalar gl = (u == U || after_label == ninf)
                                  ? Scalar(0)
                                  : -std::exp(a + logp(c, labels[u]) + after_label - sums.log_prob);
            if (gb == Scalar(0) && gl == Scalar(0)) continue;
            const Scalar total = gb + gl;
            for (Index k = 0; k < K; ++k) dlogits(c, k) = -std::exp(logp(c, k)) * total;
            dlogits(c, kBlank) += gb;
            if (u < U) dlogits(c, labels[u]) += gl;
          }
        }
        dlogits *= upstream;
        if (tape.requires_grad(iw)) tape.accumulate(iw, z.transpose() * dlogits);
        if (tape.requires_grad(ib)) tape.accumulate(ib, dlogits.colwise().sum());
        if (!tape.requires_grad(ie) && !tape.requires_grad(ip)) return;
        Mat<Scalar> dz = dlogits * tape.value(iw).transpose();
        dz.array() *= (Scalar(1) - z.array().square());
        Mat<Scalar> de = Mat<Scalar>::Zero(T, dz.cols());
        Mat<Scalar> dp = Mat<Scalar>::Zero(U + 1, dz.cols());
        for (Index t = 0; t < T; ++t) {
          for (Index u = 0; u <= U; ++u) {
            de.row(t) += dz.row(t * (U + 1) + u);
            dp.row(u) += dz.row(t * (U + 1) + u);
          }
        }
        tape.accumulate(ie, de);
        tape.accumulate(ip, dp);
      });
}

// Transducer loss of `labels` given encoder output `enc` (T x D).
template <typename Scalar>
Var<Scalar> rnnt_loss(Binder<Scalar>& p, const std::string& prefix, const DecoderConfig& cfg, const Var<Scalar>& enc,
                      const std::vector<int>& labels) {
  detail::check_labels(cfg, labels);
  Var<Scalar> pred = prediction_network(p, prefix, cfg, label_contexts(labels, cfg.label_context));
  return rnnt_lattice_loss(joint_encoder_projection(p, prefix, enc), joint_prediction_projection(p, prefix, pred),
                           p(prefix + ".joint.out.w"), p(prefix + ".joint.out.b"), labels, cfg.lattice);
}

template <typename Scalar>
Scalar rnnt_loss_value(const ParameterSet<Scalar>& params, const std::string& prefix, const DecoderConfig& cfg,
                       const Mat<Scalar>& enc, const std::vector<int>& labels) {
  Tape<Scalar> tape(false);
  Binder<Scalar> binder(params, tape);
  return rnnt_loss(binder, prefix, cfg, tape.constant(enc), labels).value()(0, 0);
}

// ---------------------------------------------------------------------------
// Decoding.

template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Joint log-probabilities for decoding, with prediction rows cached by context.
template <typename Scalar>
class JointScorer {
 public:
  JointScorer(const ParameterSet<Scalar>& params, std::string prefix, const DecoderConfig& cfg, const Mat<Scalar>& enc)
      : params_(&params), prefix_(std::move(prefix)), cfg_(cfg) {
    Tape<Scalar> tape(false);
    Binder<Scalar> b(params, tape);
    enc_proj_ = joint_encoder_projection(b, prefix_, tape.constant(enc)).value();
  }

  Index frames() const { return enc_proj_.rows(); }
  const DecoderConfig& config() const { return cfg_; }

  RowVec<Scalar> log_probs(Index t, const std::vector<int>& context) {
    auto it = cache_.find(context);
    if (it == cache_.end()) {
      Tape<Scalar> tape(false);
      Binder<Scalar> b(*params_, tape);
      Var<Scalar> pred = prediction_network(b, prefix_, cfg_, {context});
      it = cache_.emplace(context, joint_prediction_projection(b, prefix_, pred).value()).first;
    }
    RowVec<Scalar> z = (enc_proj_.row(t) + it->second).unaryExpr([](Scalar v) { return std::tanh(v); });
    RowVec<Scalar> logits = z * params_->at(prefix_ + ".joint.out.w") + params_->at(prefix_ + ".joint.out.b");
    const Scalar m = logits.maxCoeff();
    Scalar s = 0;
    for (Index k = 0; k < logits.size(); ++k) s += std::exp(logits(k) - m);
    return logits.array() - (m + std::log(s));
  }

  std::vector<int> context_of(const std::vector<int>& labels) const {
    std::vector<int> ctx(static_cast<std::size_t>(cfg_.label_context), kBlank);
    const int n = static_cast<int>(labels.size());
    for (int i = 0; i < cfg_.label_context; ++i) {
      const int src = n - cfg_.label_context + i;
      if (src >= 0) ctx[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
    }
    return ctx;
  }

 private:
  const ParameterSet<Scalar>* params_;
  std::string prefix_;
  DecoderConfig cfg_;
  Mat<Scalar> enc_proj_;
  std::map<std::vector<int>, RowVec<Scalar>> cache_;
};

namespace detail {

template <typename Scalar>
Index argmax(const RowVec<Scalar>& v) {
  Index best = 0;
  for (Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return best;
}

}  // namespace detail

// Frame-synchronous greedy search. Monotonic lattices emit at most one symbol
// per frame; standard lattices emit argmax labels until blank or the cap.
template <typename Scalar>
class GreedyDecoder {
 public:
  GreedyDecoder(const ParameterSet<Scalar>& params, std::string prefix, const DecoderConfig& cfg)
      : params_(&params), prefix_(std::move(prefix)), cfg_(cfg) {}

  // Consumes further encoder rows; returns the full transcript so far.
  const std::vector<int>& advance(const Mat<Scalar>& enc_rows) {
    if (enc_rows.rows() == 0) return labels_;
    JointScorer<Scalar> scorer(*params_, prefix_, cfg_, enc_rows);
    const int cap = cfg_.lattice == Lattice::kMonotonic ? 1 : cfg_.max_symbols_per_frame;
    for (Index t = 0; t < enc_rows.rows(); ++t) {
      for (int s = 0; s < cap; ++s) {
        const Index k = detail::argmax(scorer.log_probs(t, scorer.context_of(labels_)));
        if (k == kBlank) break;
        labels_.push_back(static_cast<int>(k));
      }
    }
    return labels_;
  }

  const std::vector<int>& labels() const { return labels_; }

 private:
  const ParameterSet<Scalar>* params_;
  std::string prefix_;
  DecoderConfig cfg_;
  std::vector<int> labels_;
};

template <typename Scalar>
std::vector<int> greedy_decode(const ParameterSet<Scalar>& params, const std::string& prefix, const DecoderConfig& cfg,
                               const Mat<Scalar>& enc) {
  GreedyDecoder<Scalar> d(params, prefix, cfg);
  return d.advance(enc);
}

struct Hypothesis {
  std::vector<int> labels;
  double log_prob = 0;       // full-sum log-likelihood of `labels`
  std::vector<int> context;  // last label_context labels, blank padded
};

namespace detail {

struct BeamEntry {
  std::vector<int> labels;
  double score;
};

// Merges identical label sequences by log-sum-exp and keeps the best `beam`.
inline std::vector<BeamEntry> prune(std::vector<BeamEntry> cands, int beam) {
  std::map<std::vector<int>, double> merged;
  std::vector<std::vector<int>> order;
  for (auto& c : cands) {
    auto it = merged.find(c.labels);
    if (it == merged.end()) {
      merged.emplace(c.labels, c.score);
      order.push_back(c.labels);
    } else {
      it->second = log_add(it->second, c.score);
    }
  }
  std::vector<BeamEntry> out;
  for (auto& l : order) out.push_back({l, merged.at(l)});
  std::stable_sort(out.begin(), out.end(), [](const BeamEntry& a, const BeamEntry& b) { return a.score > b.score; });
  if (static_cast<int>(out.size()) > beam) out.resize(static_cast<std::size_t>(beam));
  return out;
}

}  // namespace detail

// Monotonic-time beam search. Partial scores guide pruning only; every
// surviving sequence is re-scored with the exact full-sum lattice probability.
template <typename Scalar>
std::vector<Hypothesis> beam_search(const ParameterSet<Scalar>& params, const std::string& prefix,
                                    const DecoderConfig& cfg, const Mat<Scalar>& enc, int beam) {
  if (beam < 1) throw ConfigError("beam_search: beam must be >= 1");
  JointScorer<Scalar> scorer(params, prefix, cfg, enc);
  const Index T = scorer.frames();
  const int V = cfg.vocab_size;
  std::vector<detail::BeamEntry> hyps{{{}, 0.0}};
  for (Index t = 0; t < T; ++t) {
    if (cfg.lattice == Lattice::kMonotonic) {
      std::vector<detail::BeamEntry> cands;
      for (const auto& h : hyps) {
        const RowVec<Scalar> lp = scorer.log_probs(t, scorer.context_of(h.labels));
        cands.push_back({h.labels, h.score + static_cast<double>(lp(kBlank))});
        for (int k = 1; k <= V; ++k) {
          auto ext = h.labels;
          ext.push_back(k);
          cands.push_back({std::move(ext), h.score + static_cast<double>(lp(k))});
        }
      }
      hyps = detail::prune(std::move(cands), beam);
      continue;
    }
    // Standard lattice: expand labels within the frame up to the cap; a blank
    // closes the hypothesis for this frame.
    std::vector<detail::BeamEntry> active = hyps, done;
    for (int s = 0; s <= cfg.max_symbols_per_frame && !active.empty(); ++s) {
      std::vector<detail::BeamEntry> cands_done = done, cands_active;
      for (const auto& h : active) {
        const RowVec<Scalar> lp = scorer.log_probs(t, scorer.context_of(h.labels));
        cands_done.push_back({h.labels, h.score + static_cast<double>(lp(kBlank))});
        if (s == cfg.max_symbols_per_frame) continue;
        for (int k = 1; k <= V; ++k) {
          auto ext = h.labels;
          ext.push_back(k);
          cands_active.push_back({std::move(ext), h.score + static_cast<double>(lp(k))});
        }
      }
      // Joint pruning over both pools keeps beam=1 identical to greedy search.
      auto kept_done = detail::prune(std::move(cands_done), beam);
      auto kept_active = detail::prune(std::move(cands_active), beam);
      std::vector<std::pair<double, int>> pool;
      for (const auto& d : kept_done) pool.push_back({d.score, 0});
      for (const auto& a : kept_active) pool.push_back({a.score, 1});
      std::stable_sort(pool.begin(), pool.end(), [](auto& a, auto& b) { return a.first > b.first; });
      if (static_cast<int>(pool.size()) > beam) pool.resize(static_cast<std::size_t>(beam));
      std::size_t nd = 0, na = 0;
      for (const auto& e : pool) (e.second == 0 ? nd : na)++;
      kept_done.resize(std::min(nd, kept_done.size()));
      kept_active.resize(std::min(na, kept_active.size()));
      done = std::move(kept_done);
      active = std::move(kept_active);
    }
    hyps = std::move(done);
  }
  std::vector<Hypothesis> out;
  for (const auto& h : hyps) {
    Hypothesis hyp;
    hyp.labels = h.labels;
    hyp.log_prob = -static_cast<double>(rnnt_loss_value(params, prefix, cfg, enc, h.labels));
    hyp.context = scorer.context_of(h.labels);
    out.push_back(std::move(hyp));
  }
  std::stable_sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.labels < b.labels;
  });
  return out;
}

struct WerResult {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int reference_length = 0;
  double rate = 0;

  int errors() const { return substitutions + insertions + deletions; }
};

// Levenshtein alignment; rate = (S + I + D) / max(1, |ref|).
WerResult wer(const std::vector<int>& ref, const std::vector<int>& hyp);

}  // namespace dce
