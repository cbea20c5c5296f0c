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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion, with
// supporting detail lines prefixed by two spaces. Exits nonzero when a hard
// criterion fails; criterion 8 is reported but never fails the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dce/gradcheck.hpp"
#include "dce/training.hpp"
#include "test_util.hpp"

namespace dce {
namespace {

using testing::bit_equal;
using testing::probe;
using testing::random_mat;
using testing::random_params;
using Clock = std::chrono::steady_clock;

const std::string kDec = "dec";

bool g_hard_failure = false;

void verdict(int id, const std::string& title, bool pass, const std::string& detail, bool soft = false) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ". " << title << (soft ? " (soft)" : "") << ": " << detail
            << std::endl;
  if (!pass && !soft) g_hard_failure = true;
}

void note(const std::string& s) { std::cout << "  " << s << std::endl; }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<std::vector<int>> sequences_up_to(int V, int max_len) {
  std::vector<std::vector<int>> out{{}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (static_cast<int>(out[i].size()) == max_len) continue;
    for (int k = 1; k <= V; ++k) {
      auto s = out[i];
      s.push_back(k);
      out.push_back(std::move(s));
    }
  }
  return out;
}

DecoderConfig small_decoder(int V, int ctx, Lattice lattice) {
  DecoderConfig d;
  d.vocab_size = V;
  d.embed_dim = 4;
  d.label_context = ctx;
  d.joint_dim = 5;
  d.lattice = lattice;
  d.max_symbols_per_frame = 3;
  return d;
}

// ---------------------------------------------------------------------------
// Independent transducer oracle: plain matrix arithmetic straight from the
// parameter tensors, one lattice cell at a time.

std::vector<double> oracle_cell(const ParameterSet<double>& p, const DecoderConfig& cfg, const Mat<double>& enc,
                                Index t, const std::vector<int>& history) {
  const int E = cfg.embed_dim, c = cfg.label_context;
  Eigen::RowVectorXd pred(E);
  if (c == 0) {
    pred = p.at(kDec + ".pred.b").row(0).array().tanh();
  } else {
    Eigen::RowVectorXd joined(c * E);
    for (int i = 0; i < c; ++i) {
      const int pos = static_cast<int>(history.size()) - c + i;
      const int label = pos >= 0 ? history[static_cast<std::size_t>(pos)] : 0;
      joined.segment(i * E, E) = p.at(kDec + ".embed." + std::to_string(i)).row(label);
    }
    pred = (joined * p.at(kDec + ".pred.w") + p.at(kDec + ".pred.b")).array().tanh();
  }
  const Eigen::RowVectorXd h = (enc.row(t) * p.at(kDec + ".joint.enc.w") + p.at(kDec + ".joint.enc.b") +
                                pred * p.at(kDec + ".joint.pred.w"))
                                   .array()
                                   .tanh();
  const Eigen::RowVectorXd logits = h * p.at(kDec + ".joint.out.w") + p.at(kDec + ".joint.out.b");
  std::vector<double> v(logits.data(), logits.data() + logits.size());
  const double z = log_sum_exp(v);
  for (double& x : v) x -= z;
  return v;
}

// log of the summed probability of every alignment of `labels`.
double oracle_log_prob(const ParameterSet<double>& p, const DecoderConfig& cfg, const Mat<double>& enc,
                       const std::vector<int>& labels) {
  const Index T = enc.rows();
  const std::size_t U = labels.size();
  std::vector<double> paths;
  std::function<void(Index, std::size_t, double)> walk = [&](Index t, std::size_t u, double acc) {
    if (cfg.lattice == Lattice::kMonotonic && t == T) {
      if (u == U) paths.push_back(acc);
      return;
    }
    const auto lp = oracle_cell(p, cfg, enc, t, std::vector<int>(labels.begin(), labels.begin() + u));
    if (cfg.lattice == Lattice::kMonotonic) {
      walk(t + 1, u, acc + lp[0]);
      if (u < U) walk(t + 1, u + 1, acc + lp[static_cast<std::size_t>(labels[u])]);
      return;
    }
    if (u < U) walk(t, u + 1, acc + lp[static_cast<std::size_t>(labels[u])]);
    if (t + 1 < T) {
      walk(t + 1, u, acc + lp[0]);
    } else if (u == U) {
      paths.push_back(acc + lp[0]);
    }
  };
  walk(0, 0, 0.0);
  return log_sum_exp(paths);
}

struct DecoderFixture {
  ParameterSet<double> params;
  Mat<double> enc;
};

DecoderFixture decoder_fixture(const DecoderConfig& cfg, Index T, std::uint64_t seed) {
  const int enc_dim = 3;
  DecoderFixture f{random_params(decoder_layout(cfg, enc_dim, kDec), seed, 0.8), {}};
  std::mt19937_64 rng(seed * 7 + 1);
  f.enc = random_mat(T, enc_dim, rng);
  return f;
}

void criterion_1() {
  const auto t0 = Clock::now();
  double worst = 0;
  int cases = 0;
  for (Lattice lattice : {Lattice::kMonotonic, Lattice::kStandard}) {
    for (int V = 1; V <= 3; ++V) {
      for (int ctx : {0, 1, 2}) {
        for (Index T = 1; T <= 4; ++T) {
          for (std::uint64_t seed : {1u, 2u}) {
            const DecoderConfig cfg = small_decoder(V, ctx, lattice);
            const auto f = decoder_fixture(cfg, T, seed * 100 + static_cast<std::uint64_t>(V * 10 + T));
            const int max_u = lattice == Lattice::kMonotonic ? std::min<int>(3, static_cast<int>(T)) : 3;
            for (const auto& labels : sequences_up_to(V, max_u)) {
              const double loss = rnnt_loss_value(f.params, kDec, cfg, f.enc, labels);
              worst = std::max(worst, std::abs(loss + oracle_log_prob(f.params, cfg, f.enc, labels)));
              ++cases;
            }
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  verdict(1, "transducer loss equals brute-force alignment sum", worst < 1e-9 && secs < 10,
          std::to_string(cases) + " cases over both lattices, max |diff| " + fmt(worst, 3) + ", " + fmt(secs, 3) +
              " s");
}

void criterion_2() {
  double worst = 0;
  int models = 0;
  for (int V = 1; V <= 2; ++V) {
    for (int ctx : {0, 1, 2}) {
      for (Index T = 1; T <= 3; ++T) {
        for (std::uint64_t seed : {3u, 4u, 5u}) {
          const DecoderConfig cfg = small_decoder(V, ctx, Lattice::kMonotonic);
          const auto f = decoder_fixture(cfg, T, seed * 31 + static_cast<std::uint64_t>(V + 5 * T));
          double total = 0;
          for (const auto& s : sequences_up_to(V, static_cast<int>(T))) {
            total += std::exp(-rnnt_loss_value(f.params, kDec, cfg, f.enc, s));
          }
          worst = std::max(worst, std::abs(total - 1.0));
          ++models;
        }
      }
    }
  }
  verdict(2, "probabilities over all label sequences sum to one", worst < 1e-9,
          std::to_string(models) + " random models, max |sum - 1| " + fmt(worst, 3));
}

// ---------------------------------------------------------------------------
// Small super-net used by the gradient suite.

SuperNetConfig tiny_supernet() {
  SuperNetConfig c;
  c.name = "tiny";
  c.frontend = FrontendConfig{3, 2, 1, 2};
  c.encoder.input_dim = c.frontend.output_dim();
  ConformerLayerConfig l;
  l.model_dim = 4;
  l.num_heads = 1;
  l.ffn_expansion = 1;
  l.conv_kernel = 2;
  l.left_context = 2;
  ConformerLayerConfig nc = l;
  nc.right_context = 1;
  c.encoder.layers = {l, l, nc};
  c.encoder.num_causal = 2;
  c.encoder.downsample = Downsample::kFunnel;
  c.encoder.downsample_layer = 1;
  DecoderConfig d;
  d.vocab_size = 3;
  d.embed_dim = 3;
  d.label_context = 1;
  d.joint_dim = 4;
  c.submodels = {{1, 0, d}, {2, 0, d}, {2, 1, d}};
  c.loss_weights = {0.5, 0.3, 0.2};
  c.validate();
  return c;
}

std::vector<Utterance> tiny_corpus(int n) {
  CorpusSpec spec;
  spec.vocab_size = 3;
  spec.feature_dim = 3;
  spec.min_frames_per_symbol = 2;
  spec.max_frames_per_symbol = 3;
  spec.min_labels = 1;
  spec.max_labels = 3;
  spec.frontend_factor = 1;
  spec.encoder_reduction = 2;
  return synth_generate(spec, n);
}

void criterion_3() {
  // Encoder-bearing checks use an absolute floor of 1e-3 in the denominator:
  // some gradients (attention key biases) are exactly zero and central
  // differences only return rounding noise there.
  std::vector<std::pair<std::string, double>> results;
  std::mt19937_64 rng(3);

  ConformerLayerConfig layer;
  layer.model_dim = 8;
  layer.num_heads = 2;
  layer.ffn_expansion = 2;
  layer.conv_kernel = 3;
  layer.left_context = 3;
  layer.right_context = 1;
  const Mat<double> x = random_mat(7, 8, rng);
  for (Pooling pooling : {Pooling::kNone, Pooling::kStacking, Pooling::kAvgPool, Pooling::kFunnel}) {
    const int in_dim = pooling == Pooling::kStacking ? 16 : 8;
    const auto params = random_params(conformer_layer_layout(layer, in_dim, "L"), 21);
    const double err = finite_diff_check<double>(
        [&](Binder<double>& b) { return probe(conformer_layer_forward(b, "L", layer, pooling, b.constant(x))); },
        params, 1e-5, 1e-3);
    static const char* names[] = {"none", "stacking", "avgpool", "funnel"};
    results.push_back({std::string("conformer layer, pooling ") + names[static_cast<int>(pooling)], err});
  }
  {
    const auto params = random_params(conformer_layer_layout(layer, 8, "L"), 22);
    results.push_back({"funnel attention", finite_diff_check<double>(
                                               [&](Binder<double>& b) {
                                                 return probe(funnel_attention(b, "L.mhsa", layer, b.constant(x)));
                                               },
                                               params, 1e-5, 1e-3)});
  }
  for (Lattice lattice : {Lattice::kMonotonic, Lattice::kStandard}) {
    const DecoderConfig cfg = small_decoder(4, 2, lattice);
    auto f = decoder_fixture(cfg, 5, 23);
    ParameterSet<double> p = f.params;
    p.emplace("enc", f.enc);
    const std::vector<int> labels{4, 1, 1};
    const std::string tag = lattice == Lattice::kMonotonic ? " (monotonic)" : " (standard)";
    if (lattice == Lattice::kMonotonic) {
      results.push_back({"prediction network", finite_diff_check<double>(
                                                    [&](Binder<double>& b) {
                                                      return probe(prediction_network(
                                                          b, kDec, cfg, label_contexts({1, 3, 2, 4}, 2)));
                                                    },
                                                    p, 1e-6)});
      results.push_back({"joint network", finite_diff_check<double>(
                                               [&](Binder<double>& b) {
                                                 Var<double> pred =
                                                     prediction_network(b, kDec, cfg, label_contexts({2, 3}, 2));
                                                 Var<double> total = probe(joint_network(
                                                     b, kDec, cfg, slice(b("enc"), 0, 0, 1), slice(pred, 0, 0, 1)));
                                                 for (Index t = 1; t < 5; ++t) {
                                                   const Index u = t % 3;
                                                   total = add(total, probe(joint_network(b, kDec, cfg,
                                                                                          slice(b("enc"), 0, t, t + 1),
                                                                                          slice(pred, 0, u, u + 1)),
                                                                            static_cast<std::uint64_t>(t)));
                                                 }
                                                 return total;
                                               },
                                               p, 1e-6)});
    }
    results.push_back({"transducer loss" + tag,
                       finite_diff_check<double>(
                           [&](Binder<double>& b) { return rnnt_loss(b, kDec, cfg, b("enc"), labels); }, p, 1e-6)});
  }
  const SuperNetConfig cfg = tiny_supernet();
  const auto utts = tiny_corpus(2);
  {
    const auto params = random_params(supernet_layout(cfg), 24);
    results.push_back({"joint loss", finite_diff_check<double>(
                                         [&](Binder<double>& b) {
                                           return joint_loss(b, cfg, {&utts[0], &utts[1]}, cfg.loss_weights).total;
                                         },
                                         params, 1e-5, 1e-3)});
  }
  {
    const auto params = random_params(supernet_layout(cfg), 25, 0.8);
    const int k = 2;
    const Utterance& utt = utts[0];
    // Hypotheses are fixed beforehand so the loss is a smooth function.
    const auto enc0 = submodel_forward(params, cfg, k, encoder_input<double>(utt, cfg.frontend));
    const auto hyps = beam_search(params, enc0.decoder_prefix, enc0.decoder, enc0.encoding, 4);
    std::vector<double> errors;
    for (std::size_t h = 0; h < hyps.size(); ++h) errors.push_back(static_cast<double>(h % 3) + (h == 1 ? 1 : 0));
    for (bool baseline : {true, false}) {
      results.push_back(
          {std::string("MWER loss") + (baseline ? " (baseline)" : " (plain)"),
           finite_diff_check<double>(
               [&](Binder<double>& b) {
                 Var<double> xin = b.constant(encoder_input<double>(utt, cfg.frontend));
                 Var<double> enc = encoder_forward(b, cfg.encoder, xin, cfg.submodels[k].encoder_layers()).output;
                 std::vector<Var<double>> nll;
                 for (const auto& h : hyps) nll.push_back(rnnt_loss(b, enc0.decoder_prefix, enc0.decoder, enc, h.labels));
                 return mwer_loss(nll, errors, baseline);
               },
               params, 1e-5, 1e-3)});
    }
  }
  double worst = 0;
  for (const auto& [name, err] : results) {
    note(name + ": " + fmt(err, 3));
    worst = std::max(worst, err);
  }
  verdict(3, "finite-difference gradient suite", worst < 1e-5,
          std::to_string(results.size()) + " checks, worst relative error " + fmt(worst, 3));
}

// ---------------------------------------------------------------------------
// Streaming.

template <typename Scalar>
Mat<Scalar> stitch(const std::vector<Mat<Scalar>>& parts, Index cols) {
  Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Mat<Scalar> m(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    if (p.rows() == 0) continue;
    m.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return m;
}

void criterion_4() {
  const SuperNetConfig cfg = preset("desk-triple");
  const EncoderConfig& ec = cfg.encoder;
  const auto params = build_supernet<float>(cfg, 4);
  std::mt19937_64 rng(44);
  const Index T = 37;
  const Mat<float> x = random_mat<float>(T, ec.input_dim, rng);

  bool stream_ok = true;
  for (int k = 0; k < cfg.num_submodels(); ++k) {
    if (cfg.submodels[k].m_non_causal != 0) continue;
    const int upto = cfg.submodels[k].encoder_layers();
    const Mat<float> offline = encoder_forward(params, ec, x, upto);
    for (Index chunk : {Index(1), Index(2), Index(7), T}) {
      EncoderState<float> state(params, ec, upto);
      std::vector<Mat<float>> parts;
      for (Index t = 0; t < T; t += chunk) parts.push_back(state.step(x.middleRows(t, std::min(chunk, T - t))).output);
      parts.push_back(state.flush().output);
      const bool same = bit_equal<float>(stitch(parts, ec.output_dim(upto)), offline);
      if (!same) note("streaming mismatch: sub-model " + std::to_string(k) + " chunk " + std::to_string(chunk));
      stream_ok = stream_ok && same;
    }
  }

  // Perturbing frame j leaves every causal output whose reach ends before j
  // untouched, and moves at least one output that can see it.
  bool causal_ok = true;
  const int causal_depth = ec.num_causal;
  const EncoderReach reach = encoder_reach(ec, causal_depth);
  const Mat<float> base = encoder_forward(params, ec, x, causal_depth);
  int checked = 0;
  for (Index j = 0; j < T; j += 3) {
    Mat<float> xp = x;
    xp.row(j).array() += 1.0f;
    const Mat<float> moved = encoder_forward(params, ec, xp, causal_depth);
    bool any_moved = false;
    for (Index t = 0; t < base.rows(); ++t) {
      const bool same = bit_equal<float>(Mat<float>(base.row(t)), Mat<float>(moved.row(t)));
      if (reach.stride * t + reach.right < j && !same) causal_ok = false;
      if (!same) any_moved = true;
      ++checked;
    }
    if (!any_moved) causal_ok = false;
  }

  // Feed one frame at a time; the deepest path trails the causal stack by
  // exactly the summed right context of the non-causal layers.
  int budget = 0;
  for (int i = ec.num_causal; i < ec.num_layers(); ++i) budget += ec.layers[i].lookahead();
  const int depth = ec.num_layers();
  EncoderState<float> state(params, ec, depth);
  Index causal_rows = 0, final_rows = 0;
  bool delay_ok = true;
  int max_gap = 0;
  for (Index t = 0; t < T; ++t) {
    const auto e = state.step(x.middleRows(t, 1));
    causal_rows += e.layers[static_cast<std::size_t>(ec.num_causal - 1)].rows();
    final_rows += e.output.rows();
    if (final_rows != std::max<Index>(0, causal_rows - budget)) delay_ok = false;
    max_gap = std::max<int>(max_gap, static_cast<int>(causal_rows - final_rows));
  }
  const auto tail = state.flush();
  final_rows += tail.output.rows();
  const Index expect_rows = encoder_forward(params, ec, x, depth).rows();
  delay_ok = delay_ok && final_rows == expect_rows && max_gap == budget;
  const Index frames_budget = encoder_reach(ec, depth).right - reach.right;
  delay_ok = delay_ok && frames_budget == static_cast<Index>(reach.stride) * budget;

  note("chunked streaming of causal sub-models, chunks {1,2,7," + std::to_string(T) +
       "}: " + (stream_ok ? "bit-identical" : "MISMATCH"));
  note("perturbation of future frames: " + std::to_string(checked) + " output rows checked, " +
       (causal_ok ? "no past output moved" : "VIOLATION"));
  note("non-causal delay: " + std::to_string(max_gap) + " rows behind the causal stack (budget " +
       std::to_string(budget) + " rows = " + std::to_string(frames_budget) + " input frames)");
  verdict(4, "causal streaming, causality and non-causal delay", stream_ok && causal_ok && delay_ok,
          std::string(stream_ok ? "streaming ok" : "streaming FAIL") + ", " +
              (causal_ok ? "causality ok" : "causality FAIL") + ", " + (delay_ok ? "delay ok" : "delay FAIL"));
}

// ---------------------------------------------------------------------------
// Extraction.

bool check_extraction(const SuperNetConfig& cfg, const ParameterSet<float>& params, Index min_t, Index max_t,
                      std::uint64_t seed, std::string* detail) {
  bool ok = true;
  for (int k = 0; k < cfg.num_submodels(); ++k) {
    const SuperNetConfig sub = extracted_config(cfg, k);
    const ParameterSet<float> ext = extract_parameters(params, cfg, k);
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(k));
    std::uniform_int_distribution<Index> len(min_t, max_t);
    int mismatches = 0;
    for (int i = 0; i < 100; ++i) {
      const Mat<float> x = random_mat<float>(len(rng), cfg.encoder.input_dim, rng);
      const auto a = submodel_forward(params, cfg, k, x);
      const auto b = submodel_forward(ext, sub, 0, x);
      const DecoderConfig& dc = a.decoder;
      const Index Tp = a.encoding.rows();
      const Index max_u = dc.lattice == Lattice::kMonotonic ? std::min<Index>(Tp, 4) : 4;
      std::uniform_int_distribution<int> label(1, dc.vocab_size);
      std::vector<int> labels(static_cast<std::size_t>(std::uniform_int_distribution<Index>(0, max_u)(rng)));
      for (int& l : labels) l = label(rng);
      const float la = rnnt_loss_value(params, a.decoder_prefix, dc, a.encoding, labels);
      const float lb = rnnt_loss_value(ext, b.decoder_prefix, b.decoder, b.encoding, labels);
      if (!bit_equal<float>(a.encoding, b.encoding) || std::memcmp(&la, &lb, sizeof(float)) != 0) ++mismatches;
    }
    *detail += " k" + std::to_string(k) + ":" + std::to_string(numel(ext)) + (mismatches ? "(MISMATCH)" : "");
    ok = ok && mismatches == 0;
  }
  return ok;
}

void criterion_5() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::vector<std::pair<SuperNetConfig, std::pair<Index, Index>>> configs;
  for (const auto& name : preset_names()) {
    const bool paper = name.rfind("paper-", 0) == 0;
    configs.push_back({preset(name), paper ? std::make_pair(Index(3), Index(6)) : std::make_pair(Index(2), Index(24))});
    if (name == "desk-large-medium") {
      SuperNetConfig other = preset(name);
      other.sharing = other.sharing == DecoderSharing::kShared ? DecoderSharing::kSeparate : DecoderSharing::kShared;
      configs.push_back({other, {2, 24}});
    }
  }
  for (const auto& [cfg, range] : configs) {
    std::string detail;
    bool this_ok;
    {
      const ParameterSet<float> params = build_supernet<float>(cfg, 5);
      this_ok = check_extraction(cfg, params, range.first, range.second, 55, &detail);
    }
    note(cfg.name + " (" + to_string(cfg.sharing) + " decoders):" + detail + (this_ok ? "" : " FAIL"));
    ok = ok && this_ok;
  }
  verdict(5, "extracted sub-models reproduce their super-net paths bit-exactly", ok,
          std::to_string(configs.size()) + " configs x every sub-model x 100 random inputs, " +
              fmt(seconds_since(t0), 3) + " s");
}

// ---------------------------------------------------------------------------
// Size accounting.

void criterion_6() {
  const double ratio = sharing_reduction_ratio({20, 26.8, 60}, {4.4, 4.4, 4.4}, {1, 2, 3});
  const double target = 1.0 - 115.0 / 180.0;  // 115M super-net vs 180M of separate models
  const double percent = std::round(ratio * 1000.0) / 10.0;
  bool ok = std::abs(percent - 35.8) < 1e-9 && std::abs(ratio - target) <= 0.02;
  note("ratio from component sizes " + fmt(ratio, 6) + " (" + fmt(percent, 3) + "%), target " + fmt(target, 4));
  for (const auto& name : preset_names()) {
    SuperNetConfig cfg = preset(name);
    if (cfg.encoder.downsample_layer >= cfg.encoder.num_layers()) continue;
    std::map<Downsample, Index> n;
    for (Downsample d : {Downsample::kStacking, Downsample::kAvgPool, Downsample::kFunnel}) {
      cfg.encoder.downsample = d;
      cfg.validate();
      n[d] = count_params(cfg).supernet_total;
    }
    const bool fewer = n[Downsample::kFunnel] < n[Downsample::kStacking] && n[Downsample::kAvgPool] < n[Downsample::kStacking];
    note(name + ": stacking " + std::to_string(n[Downsample::kStacking]) + ", avgpool " +
         std::to_string(n[Downsample::kAvgPool]) + ", funnel " + std::to_string(n[Downsample::kFunnel]) +
         (fewer ? "" : " (ORDER VIOLATED)"));
    const ParamReport r = count_params(preset(name));
    note(name + ": super-net " + std::to_string(r.supernet_total) + ", standalone sum " +
         std::to_string(r.standalone_sum) + ", own reduction " + fmt(r.reduction_ratio, 4));
    ok = ok && fewer;
  }
  verdict(6, "size accounting", ok,
          "reference ratio " + fmt(percent, 3) + "% (|diff to target| " + fmt(std::abs(ratio - target) * 100, 3) +
              " points), pooling configs smaller than stacking");
}

// ---------------------------------------------------------------------------
// Training-based criteria share one corpus and the five desk-triple models.

struct Trained {
  std::uint64_t seed;
  ParameterSet<float> params;
  std::vector<double> wer;  // per sub-model, greedy
};

struct Data {
  std::vector<Utterance> train, dev;
};

Data make_data() {
  CorpusSpec spec;  // V = 8
  return {synth_generate(spec, 2000, Split::kTrain), synth_generate(spec, 200, Split::kDev)};
}

std::vector<Trained> criterion_7(const Data& data, const SuperNetConfig& cfg) {
  const auto t0 = Clock::now();
  std::vector<Trained> out;
  std::vector<std::vector<double>> wers(static_cast<std::size_t>(cfg.num_submodels()));
  std::vector<double> beam_gap;
  bool halved = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig tc;
    tc.steps = 3000;
    tc.seed = seed;
    tc.loss_weights = {0.80, 0.15, 0.05};
    auto r = train_mle(data.train, cfg, build_supernet<float>(cfg, seed), tc);
    Trained t{seed, std::move(r.params), {}};
    std::string line = "seed " + std::to_string(seed) + (r.diverged ? " DIVERGED" : "") + ": WER";
    for (int k = 0; k < cfg.num_submodels(); ++k) {
      t.wer.push_back(evaluate(data.dev, t.params, cfg, k).wer);
      wers[static_cast<std::size_t>(k)].push_back(t.wer.back());
      line += " " + fmt(t.wer.back() * 100, 3) + "%";
    }
    // Per-path loss decrease: mean over the first 50 steps vs the last 50.
    line += "; loss ratio last50/first50";
    const std::size_t n = r.history.size();
    for (int k = 0; n >= 100 && k < cfg.num_submodels(); ++k) {
      double first = 0, last = 0;
      for (std::size_t i = 0; i < 50; ++i) {
        first += r.history[i].sub_losses[static_cast<std::size_t>(k)];
        last += r.history[n - 50 + i].sub_losses[static_cast<std::size_t>(k)];
      }
      line += " " + fmt(last / first, 3);
      halved = halved && last <= 0.5 * first;
    }
    const int large = cfg.num_submodels() - 1;
    beam_gap.push_back(evaluate(data.dev, t.params, cfg, large, DecodeMode::kBeam, 4).wer - t.wer.back());
    note(line);
    out.push_back(std::move(t));
  }
  const double secs = seconds_since(t0);
  const double small = median(wers[0]), medium = median(wers[1]), large = median(wers[2]);
  note("median WER small " + fmt(small * 100, 3) + "%, medium " + fmt(medium * 100, 3) + "%, large " +
       fmt(large * 100, 3) + "%");
  note(std::string("every path loss at least halved: ") + (halved ? "yes" : "no") +
       "; median beam-4 minus greedy WER on the large path " + fmt(median(beam_gap) * 100, 3) + " points");
  verdict(7, "desk-triple convergence and size ordering", large < 0.2 && large <= medium && medium <= small && secs < 900,
          "median large " + fmt(large * 100, 3) + "% ≤ medium " + fmt(medium * 100, 3) + "% ≤ small " +
              fmt(small * 100, 3) + "%, " + fmt(secs, 4) + " s for 5 seeds");
  return out;
}

void criterion_8(const Data& data) {
  const auto t0 = Clock::now();
  const SuperNetConfig base = preset("desk-large-medium");
  const std::vector<std::vector<double>> grid{{0.6, 0.4}, {0.9, 0.1}, {0.95, 0.05}};
  TrainConfig tc;
  tc.steps = 3000;
  const auto rows = tension_study(data.train, data.dev, base, grid, {1, 2, 3}, tc);
  note("weights    decoder   seed  WER medium  WER large");
  std::map<DecoderSharing, std::map<std::uint64_t, std::map<double, double>>> large;
  for (const auto& r : rows) {
    std::ostringstream os;
    os << std::left << std::setw(11) << (fmt(r.weights[0]) + "/" + fmt(r.weights[1])) << std::setw(10)
       << to_string(r.sharing) << std::setw(6) << r.seed << std::setw(12) << fmt(r.wer_medium * 100, 3)
       << fmt(r.wer_large * 100, 3);
    note(os.str());
    large[r.sharing][r.seed][r.weights[0]] = r.wer_large;
  }
  std::map<DecoderSharing, double> degradation;
  for (const auto& [mode, by_seed] : large) {
    std::vector<double> d;
    for (const auto& [seed, by_w] : by_seed) d.push_back(by_w.at(0.95) - by_w.at(0.6));
    degradation[mode] = median(d);
  }
  const double sep = degradation[DecoderSharing::kSeparate], shared = degradation[DecoderSharing::kShared];
  verdict(8, "separate decoders ease the large-pass degradation", sep <= shared,
          "median large-pass WER change from 0.6/0.4 to 0.95/0.05: separate " + fmt(sep * 100, 3) + " points, shared " +
              fmt(shared * 100, 3) + " points, " + fmt(seconds_since(t0), 4) + " s",
          true);
}

void criterion_9(const Data& data, const SuperNetConfig& cfg, const std::vector<Trained>& models) {
  const auto t0 = Clock::now();
  // Posterior normalization and the equal-error case on real beam output.
  const ParameterSet<double> p = cast_parameters<double>(models.front().params);
  double worst_sum = 0;
  bool zero_ok = true;
  int lists = 0;
  for (int k = 0; k < cfg.num_submodels(); ++k) {
    for (std::size_t i = 0; i < 20; ++i) {
      const Utterance& utt = data.dev[i];
      Tape<double> tape;
      Binder<double> b(p, tape);
      Var<double> x = b.constant(encoder_input<double>(utt, cfg.frontend));
      Var<double> enc = encoder_forward(b, cfg.encoder, x, cfg.submodels[k].encoder_layers()).output;
      const auto hyps = beam_search(p, cfg.decoder_of(k), cfg.submodels[k].decoder, enc.value(), 4);
      if (hyps.size() < 2) continue;
      std::vector<Var<double>> nll;
      for (const auto& h : hyps) nll.push_back(rnnt_loss(b, cfg.decoder_of(k), cfg.submodels[k].decoder, enc, h.labels));
      worst_sum = std::max(worst_sum, std::abs(renormalized_posteriors(nll).value().sum() - 1.0));
      Var<double> loss = mwer_loss(nll, std::vector<double>(hyps.size(), 2.0), true);
      tape.backward(loss);
      if (loss.value()(0, 0) != 0.0) zero_ok = false;
      for (const auto& [name, g] : b.gradients()) {
        if ((g.array() != 0.0).any()) zero_ok = false;
      }
      ++lists;
    }
  }
  note("posterior sums over " + std::to_string(lists) + " top-4 lists: max |sum - 1| " + fmt(worst_sum, 3));
  note(std::string("equal error counts: ") + (zero_ok ? "zero loss and all-zero gradients" : "NONZERO"));

  // Sampling frequencies.
  const std::vector<double> lambda{0.80, 0.15, 0.05};
  SubmodelSampler sampler(lambda, 99);
  const int draws = 10000;
  std::vector<int> counts(lambda.size(), 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(sampler.next())];
  bool freq_ok = true;
  std::string freq = "sampling counts over 10k draws:";
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    const double mean = draws * lambda[k], sd = std::sqrt(draws * lambda[k] * (1 - lambda[k]));
    const double z = (counts[k] - mean) / sd;
    freq_ok = freq_ok && std::abs(z) <= 3;
    freq += " " + std::to_string(counts[k]) + " (z=" + fmt(z, 2) + ")";
  }
  note(freq);

  // 500 fine-tuning steps per trained seed.
  std::vector<std::vector<double>> regress(static_cast<std::size_t>(cfg.num_submodels()));
  for (const Trained& t : models) {
    MwerConfig mc;
    mc.steps = 500;
    mc.seed = t.seed;
    const auto r = mwer_finetune(data.train, cfg, t.params, mc);
    std::string line = "seed " + std::to_string(t.seed) + ": WER before -> after";
    for (int k = 0; k < cfg.num_submodels(); ++k) {
      const double after = evaluate(data.dev, r.params, cfg, k).wer;
      regress[static_cast<std::size_t>(k)].push_back(after - t.wer[static_cast<std::size_t>(k)]);
      line += "  " + fmt(t.wer[static_cast<std::size_t>(k)] * 100, 3) + "% -> " + fmt(after * 100, 3) + "%";
    }
    note(line);
  }
  bool mwer_ok = true;
  std::string med = "median WER change per sub-model (points):";
  for (const auto& r : regress) {
    const double m = median(r);
    mwer_ok = mwer_ok && m <= 0.005;
    med += " " + fmt(m * 100, 3);
  }
  note(med);
  verdict(9, "MWER properties", worst_sum <= 1e-12 && zero_ok && freq_ok && mwer_ok,
          std::string("posteriors ") + (worst_sum <= 1e-12 ? "ok" : "FAIL") + ", equal errors " +
              (zero_ok ? "ok" : "FAIL") + ", sampling " + (freq_ok ? "ok" : "FAIL") + ", fine-tuning regression " +
              (mwer_ok ? "ok" : "FAIL") + ", " + fmt(seconds_since(t0), 4) + " s");
}

void criterion_10(const Data& data, const SuperNetConfig& cfg, const Trained& model) {
  const QuantizedBundle b = quantize_int8(model.params);
  double worst = 0;
  for (const auto& [name, q] : b.tensors) {
    const Mat<float>& w = model.params.at(name);
    for (Index i = 0; i < w.size(); ++i) {
      const double err =
          std::abs(static_cast<double>(w.data()[i]) - static_cast<double>(q.values[static_cast<std::size_t>(i)]) * q.scale);
      worst = std::max(worst, err / q.scale);
    }
  }
  const ParameterSet<float> deq = dequantize<float>(b);
  double min_same = 1;
  std::string same_line = "unchanged greedy transcripts:";
  for (int k = 0; k < cfg.num_submodels(); ++k) {
    int same = 0;
    for (const Utterance& u : data.dev) {
      if (transcribe(model.params, cfg, k, u, DecodeMode::kGreedy) == transcribe(deq, cfg, k, u, DecodeMode::kGreedy)) {
        ++same;
      }
    }
    const double frac = static_cast<double>(same) / static_cast<double>(data.dev.size());
    min_same = std::min(min_same, frac);
    same_line += " k" + std::to_string(k) + " " + fmt(frac * 100, 4) + "%";
  }
  const double actual = static_cast<double>(encode_quantized(cfg, b).size());
  const double reported = static_cast<double>(quantized_size_bytes(cfg));
  const double size_err = std::abs(actual - reported) / reported;
  note("max round-trip error " + fmt(worst, 6) + " x scale over " + std::to_string(b.tensors.size()) + " tensors");
  note(same_line);
  note("file " + fmt(actual, 10) + " bytes, accounting " + fmt(reported, 10) + " bytes");
  verdict(10, "int8 quantization", worst <= 0.5 + 1e-9 && min_same >= 0.95 && size_err <= 0.01,
          "error " + fmt(worst, 6) + " x scale, min unchanged " + fmt(min_same * 100, 4) + "%, size diff " +
              fmt(size_err * 100, 3) + "%");
}

}  // namespace
}  // namespace dce

// Optional arguments select criteria by number; default runs all of them.
int main(int argc, char** argv) {
  using namespace dce;
  std::vector<bool> run(11, argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > 10) {
      std::cerr << "usage: acceptance [criterion ...]  (1-10)\n";
      return 2;
    }
    run[static_cast<std::size_t>(id)] = true;
  }
  try {
    if (run[1]) criterion_1();
    if (run[2]) criterion_2();
    if (run[3]) criterion_3();
    if (run[4]) criterion_4();
    if (run[5]) criterion_5();
    if (run[6]) criterion_6();
    if (run[7] || run[8] || run[9] || run[10]) {
      const Data data = make_data();
      const SuperNetConfig triple = preset("desk-triple");
      std::vector<Trained> models;
      if (run[7] || run[9] || run[10]) models = criterion_7(data, triple);
      if (run[8]) criterion_8(data);
      if (run[9]) criterion_9(data, triple, models);
      if (run[10]) criterion_10(data, triple, models.front());
    }
  } catch (const std::exception& e) {
    std::cout << "[FAIL] acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  return g_hard_failure ? 1 : 0;
}
