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

// Joint maximum-likelihood training of all sub-models, MWER fine-tuning with
// sampled sub-models, and evaluation helpers.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dce/optim.hpp"
#include "dce/supernet.hpp"

namespace dce {

struct TrainConfig {
  std::vector<double> loss_weights;  // empty: use the super-net config's
  int batch_size = 8;
  int steps = 3000;
  double learning_rate = 1e-3;
  int warmup_steps = 200;  // linear warmup, then constant
  std::uint64_t seed = 1;
  int log_every = 100;
  int checkpoint_every = 0;
  std::string checkpoint_path;

  void validate(int num_submodels) const;
  double learning_rate_at(int step) const;
};

struct MwerConfig {
  int beam = 4;
  int steps = 500;
  int batch_size = 8;
  double learning_rate = 1e-4;
  bool baseline_subtraction = true;
  bool per_utterance_sampling = false;
  std::vector<double> sampling_weights;  // empty: the super-net loss weights
  std::uint64_t seed = 1;
  int log_every = 100;

  void validate(int num_submodels) const;
};

struct StepRecord {
  int step = 0;
  double loss = 0;
  std::vector<double> sub_losses;
  double grad_norm = 0;
};

template <typename Scalar>
struct TrainResult {
  ParameterSet<Scalar> params;
  std::vector<StepRecord> history;
  bool diverged = false;
  int completed_steps = 0;
  std::string failure;
};

// Draws sub-model indices with probability proportional to the weights.
class SubmodelSampler {
 public:
  SubmodelSampler(const std::vector<double>& weights, std::uint64_t seed);
  int next();

 private:
  std::mt19937_64 rng_;
  std::discrete_distribution<int> dist_;
};

// Fixed-order shuffled minibatches over an index range.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, int batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  std::size_t n_;
  int batch_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::string format_step(const StepRecord& r);

template <typename Scalar>
struct JointLoss {
  Var<Scalar> total;
  std::vector<Var<Scalar>> per_submodel;  // mean transducer loss of each path
};

// L = sum_k w_k L_k. Terms with zero weight are computed for reporting but
// are not connected to the total, so parameters only they use get no gradient.
template <typename Scalar>
JointLoss<Scalar> joint_loss(Binder<Scalar>& p, const SuperNetConfig& cfg, const std::vector<const Utterance*>& batch,
                             const std::vector<double>& weights) {
  if (batch.empty()) throw DataError("joint_loss: empty batch");
  if (static_cast<int>(weights.size()) != cfg.num_submodels()) {
    throw ConfigError("joint_loss: expected " + std::to_string(cfg.num_submodels()) + " weights");
  }
  const int K = cfg.num_submodels();
  std::vector<std::vector<Var<Scalar>>> terms(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Utterance& utt = *batch[i];
    Var<Scalar> x = p.constant(encoder_input<Scalar>(utt, cfg.frontend));
    std::vector<Var<Scalar>> enc = submodel_encodings(p, cfg, x);
    for (int k = 0; k < K; ++k) {
      try {
        terms[k].push_back(rnnt_loss(p, cfg.decoder_of(k), cfg.submodels[k].decoder, enc[k], utt.labels));
      } catch (const DataError& e) {
        throw DataError("batch utterance " + std::to_string(i) + ", sub-model " + std::to_string(k) + ": " +
                        e.what());
      }
    }
  }
  JointLoss<Scalar> out;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(batch.size());
  bool have_total = false;
  for (int k = 0; k < K; ++k) {
    Var<Scalar> s = terms[k][0];
    for (std::size_t i = 1; i < terms[k].size(); ++i) s = add(s, terms[k][i]);
    Var<Scalar> mean_k = batch.size() == 1 ? s : scale(s, inv);
    out.per_submodel.push_back(mean_k);
    if (weights[k] == 0) continue;
    Var<Scalar> weighted = weights[k] == 1 ? mean_k : scale(mean_k, static_cast<Scalar>(weights[k]));
    out.total = have_total ? add(out.total, weighted) : weighted;
    have_total = true;
  }
  if (!have_total) throw ConfigError("joint_loss: all loss weights are zero");
  return out;
}

template <typename Scalar>
double gradient_norm(const ParameterSet<Scalar>& grads) {
  double s = 0;
  for (const auto& [name, g] : grads) {
    for (Index i = 0; i < g.size(); ++i) s += static_cast<double>(g.data()[i]) * static_cast<double>(g.data()[i]);
  }
  return std::sqrt(s);
}

// Adam on the joint loss. A non-finite loss or gradient stops training and
// returns the parameters from before the failing step.
template <typename Scalar>
TrainResult<Scalar> train_mle(const std::vector<Utterance>& corpus, const SuperNetConfig& cfg,
                              ParameterSet<Scalar> params, const TrainConfig& tc, std::ostream* log = nullptr) {
  cfg.validate();
  const std::vector<double> weights = tc.loss_weights.empty() ? cfg.loss_weights : tc.loss_weights;
  tc.validate(cfg.num_submodels());
  if (corpus.empty()) throw DataError("train_mle: empty corpus");
  TrainResult<Scalar> result;
  Adam<Scalar> adam(AdamOptions{tc.learning_rate});
  BatchSampler batches(corpus.size(), tc.batch_size, tc.seed);
  for (int step = 0; step < tc.steps; ++step) {
    std::vector<const Utterance*> batch;
    for (std::size_t i : batches.next()) batch.push_back(&corpus[i]);
    StepRecord rec;
    rec.step = step;
    try {
      Tape<Scalar> tape;
      Binder<Scalar> binder(params, tape);
      JointLoss<Scalar> jl = joint_loss(binder, cfg, batch, weights);
      rec.loss = static_cast<double>(jl.total.value()(0, 0));
      for (const auto& l : jl.per_submodel) rec.sub_losses.push_back(static_cast<double>(l.value()(0, 0)));
      tape.backward(jl.total);
      const ParameterSet<Scalar> grads = binder.gradients();
      rec.grad_norm = gradient_norm(grads);
      if (!std::isfinite(rec.loss) || !std::isfinite(rec.grad_norm)) throw NumericError("non-finite loss");
      ParameterSet<Scalar> next = params;
      adam.set_learning_rate(tc.learning_rate_at(step));
      adam.step(next, grads);
      params = std::move(next);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.failure = "step " + std::to_string(step) + ": " + e.what();
      if (log) *log << "diverged at " << result.failure << "\n";
      break;
    }
    result.history.push_back(rec);
    result.completed_steps = step + 1;
    if (log && tc.log_every > 0 && (step % tc.log_every == 0 || step + 1 == tc.steps)) *log << format_step(rec) << "\n";
    if (tc.checkpoint_every > 0 && !tc.checkpoint_path.empty() && (step + 1) % tc.checkpoint_every == 0) {
      save_model(tc.checkpoint_path, cfg, params);
    }
  }
  if (result.diverged && !tc.checkpoint_path.empty()) save_model(tc.checkpoint_path, cfg, params);
  result.params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// MWER.

// Softmax of negative log-likelihoods over the hypothesis list.
template <typename Scalar>
Var<Scalar> renormalized_posteriors(const std::vector<Var<Scalar>>& nll) {
  std::vector<Var<Scalar>> cols;
  for (const auto& n : nll) cols.push_back(scale(n, Scalar(-1)));
  return softmax(cols.size() == 1 ? cols[0] : concat(cols, 1));
}

// sum_h P(h) (W(h) - baseline), P renormalized over the hypotheses.
template <typename Scalar>
Var<Scalar> mwer_loss(const std::vector<Var<Scalar>>& nll, const std::vector<double>& word_errors, bool baseline) {
  if (nll.size() != word_errors.size() || nll.empty()) throw ShapeError("mwer_loss: one error count per hypothesis");
  double mean = 0;
  for (double w : word_errors) mean += w;
  mean /= static_cast<double>(word_errors.size());
  Mat<Scalar> risk(1, static_cast<Index>(word_errors.size()));
  for (std::size_t h = 0; h < word_errors.size(); ++h) {
    risk(0, static_cast<Index>(h)) = static_cast<Scalar>(baseline ? word_errors[h] - mean : word_errors[h]);
  }
  Var<Scalar> post = renormalized_posteriors(nll);
  return sum(mul(post, post.tape()->constant(std::move(risk))));
}

template <typename Scalar>
struct MwerUtteranceLoss {
  std::optional<Var<Scalar>> loss;  // empty when skipped
  std::vector<Hypothesis> hypotheses;
};

// Beam search with the current parameters, then the differentiable MWER loss
// of the top hypotheses re-scored on the tape.
template <typename Scalar>
MwerUtteranceLoss<Scalar> mwer_utterance(Binder<Scalar>& p, const SuperNetConfig& cfg, int k, const Utterance& utt,
                                         const MwerConfig& mc) {
  MwerUtteranceLoss<Scalar> out;
  Var<Scalar> x = p.constant(encoder_input<Scalar>(utt, cfg.frontend));
  Var<Scalar> enc = encoder_forward(p, cfg.encoder, x, cfg.submodels[k].encoder_layers()).output;
  const DecoderConfig& dc = cfg.submodels[k].decoder;
  out.hypotheses = beam_search(p.parameters(), cfg.decoder_of(k), dc, enc.value(), mc.beam);
  if (out.hypotheses.size() < 2) return out;
  std::vector<Var<Scalar>> nll;
  std::vector<double> errors;
  for (const auto& h : out.hypotheses) {
    nll.push_back(rnnt_loss(p, cfg.decoder_of(k), dc, enc, h.labels));
    errors.push_back(static_cast<double>(wer(utt.labels, h.labels).errors()));
  }
  out.loss = mwer_loss(nll, errors, mc.baseline_subtraction);
  return out;
}

template <typename Scalar>
struct MwerResult {
  ParameterSet<Scalar> params;
  std::vector<StepRecord> history;  // sub_losses holds the sampled index
  std::vector<int> sampled;
  int skipped_utterances = 0;
};

template <typename Scalar>
MwerResult<Scalar> mwer_finetune(const std::vector<Utterance>& corpus, const SuperNetConfig& cfg,
                                 ParameterSet<Scalar> params, const MwerConfig& mc, std::ostream* log = nullptr) {
  cfg.validate();
  mc.validate(cfg.num_submodels());
  if (corpus.empty()) throw DataError("mwer_finetune: empty corpus");
  const std::vector<double> weights = mc.sampling_weights.empty() ? cfg.loss_weights : mc.sampling_weights;
  SubmodelSampler sampler(weights, mc.seed);
  BatchSampler batches(corpus.size(), mc.batch_size, mc.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam<Scalar> adam(AdamOptions{mc.learning_rate});
  MwerResult<Scalar> result;
  for (int step = 0; step < mc.steps; ++step) {
    const std::vector<std::size_t> idx = batches.next();
    const int step_k = sampler.next();
    Tape<Scalar> tape;
    Binder<Scalar> binder(params, tape);
    std::vector<Var<Scalar>> losses;
    for (std::size_t i : idx) {
      const int k = mc.per_utterance_sampling ? sampler.next() : step_k;
      result.sampled.push_back(k);
      MwerUtteranceLoss<Scalar> u = mwer_utterance(binder, cfg, k, corpus[i], mc);
      if (!u.loss) {
        ++result.skipped_utterances;
        continue;
      }
      losses.push_back(*u.loss);
    }
    StepRecord rec;
    rec.step = step;
    rec.sub_losses = {static_cast<double>(step_k)};
    if (!losses.empty()) {
      Var<Scalar> total = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
      total = scale(total, Scalar(1) / static_cast<Scalar>(losses.size()));
      rec.loss = static_cast<double>(total.value()(0, 0));
      tape.backward(total);
      const ParameterSet<Scalar> grads = binder.gradients();
      rec.grad_norm = gradient_norm(grads);
      adam.step(params, grads);
    }
    result.history.push_back(rec);
    if (log && mc.log_every > 0 && (step % mc.log_every == 0 || step + 1 == mc.steps)) *log << format_step(rec) << "\n";
  }
  result.params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation.

enum class DecodeMode { kGreedy, kBeam };

struct UtteranceResult {
  std::vector<int> reference;
  std::vector<int> hypothesis;
  int errors = 0;
};

struct EvalReport {
  double wer = 0;  // total edit errors / total reference labels
  int errors = 0;
  int reference_labels = 0;
  std::vector<UtteranceResult> utterances;
};

EvalReport aggregate(std::vector<UtteranceResult> utts);

template <typename Scalar>
std::vector<int> transcribe(const ParameterSet<Scalar>& params, const SuperNetConfig& cfg, int k, const Utterance& utt,
                            DecodeMode mode, int beam = 4) {
  const SubModelOutput<Scalar> out = submodel_forward(params, cfg, k, encoder_input<Scalar>(utt, cfg.frontend));
  if (mode == DecodeMode::kGreedy) return greedy_decode(params, out.decoder_prefix, out.decoder, out.encoding);
  auto hyps = beam_search(params, out.decoder_prefix, out.decoder, out.encoding, beam);
  return hyps.empty() ? std::vector<int>{} : hyps.front().labels;
}

template <typename Scalar>
EvalReport evaluate(const std::vector<Utterance>& corpus, const ParameterSet<Scalar>& params, const SuperNetConfig& cfg,
                    int k, DecodeMode mode = DecodeMode::kGreedy, int beam = 4) {
  std::vector<UtteranceResult> utts;
  for (const Utterance& u : corpus) {
    UtteranceResult r;
    r.reference = u.labels;
    r.hypothesis = transcribe(params, cfg, k, u, mode, beam);
    r.errors = wer(r.reference, r.hypothesis).errors();
    utts.push_back(std::move(r));
  }
  return aggregate(std::move(utts));
}

// ---------------------------------------------------------------------------
// Experiment drivers for two-pass (medium, large) configs.

struct TensionRow {
  std::vector<double> weights;
  DecoderSharing sharing = DecoderSharing::kSeparate;
  std::uint64_t seed = 0;
  double wer_medium = 0;
  double wer_large = 0;
};

std::vector<TensionRow> tension_study(const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
                                      const SuperNetConfig& base, const std::vector<std::vector<double>>& grid,
                                      const std::vector<std::uint64_t>& seeds, const TrainConfig& tc,
                                      std::ostream* log = nullptr);

struct DownsampleRow {
  Downsample method = Downsample::kFunnel;
  std::uint64_t seed = 0;
  double wer_medium = 0;
  double wer_large = 0;
  Index params = 0;
};

std::vector<DownsampleRow> compare_downsampling(const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
                                                const SuperNetConfig& base, const std::vector<std::uint64_t>& seeds,
                                                const TrainConfig& tc, std::ostream* log = nullptr);

}  // namespace dce
