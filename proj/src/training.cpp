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

#include "dce/training.hpp"

#include <sstream>

namespace dce {
namespace {

void check_weights(const std::vector<double>& w, int K, const char* what) {
  if (w.empty()) return;
  if (static_cast<int>(w.size()) != K) {
    throw ConfigError(std::string(what) + ": expected " + std::to_string(K) + " weights, got " +
                      std::to_string(w.size()));
  }
  double total = 0;
  for (double x : w) {
    if (!(x >= 0)) throw ConfigError(std::string(what) + ": weights must be >= 0");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(std::string(what) + ": weights must sum to 1");
}

}  // namespace

void TrainConfig::validate(int num_submodels) const {
  check_weights(loss_weights, num_submodels, "train");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (warmup_steps < 0) throw ConfigError("train: warmup_steps must be >= 0");
}

double TrainConfig::learning_rate_at(int step) const {
  if (warmup_steps == 0 || step >= warmup_steps) return learning_rate;
  return learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
}

void MwerConfig::validate(int num_submodels) const {
  check_weights(sampling_weights, num_submodels, "mwer");
  if (beam < 2) throw ConfigError("mwer: beam must be >= 2");
  if (batch_size < 1) throw ConfigError("mwer: batch_size must be >= 1");
  if (steps < 0) throw ConfigError("mwer: steps must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("mwer: learning_rate must be > 0");
}

SubmodelSampler::SubmodelSampler(const std::vector<double>& weights, std::uint64_t seed)
    : rng_(seed), dist_(weights.begin(), weights.end()) {
  if (weights.empty()) throw ConfigError("sampler: no weights");
}

int SubmodelSampler::next() { return dist_(rng_); }

BatchSampler::BatchSampler(std::size_t n, int batch_size, std::uint64_t seed)
    : n_(n), batch_(batch_size), rng_(seed), order_(n) {
  if (n == 0) throw DataError("batch sampler: empty corpus");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> out;
  for (int i = 0; i < batch_; ++i) {
    if (pos_ == n_) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

std::string format_step(const StepRecord& r) {
  std::ostringstream os;
  os << "step=" << r.step << " loss=" << r.loss;
  for (std::size_t k = 0; k < r.sub_losses.size(); ++k) os << " L" << k << "=" << r.sub_losses[k];
  os << " grad_norm=" << r.grad_norm;
  return os.str();
}

EvalReport aggregate(std::vector<UtteranceResult> utts) {
  EvalReport r;
  for (const auto& u : utts) {
    r.errors += u.errors;
    r.reference_labels += static_cast<int>(u.reference.size());
  }
  r.wer = static_cast<double>(r.errors) / static_cast<double>(std::max(1, r.reference_labels));
  r.utterances = std::move(utts);
  return r;
}

std::vector<TensionRow> tension_study(const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
                                      const SuperNetConfig& base, const std::vector<std::vector<double>>& grid,
                                      const std::vector<std::uint64_t>& seeds, const TrainConfig& tc,
                                      std::ostream* log) {
  if (base.num_submodels() != 2) throw ConfigError("tension_study: expects a (medium, large) config");
  std::vector<TensionRow> rows;
  for (const auto& weights : grid) {
    for (DecoderSharing mode : {DecoderSharing::kShared, DecoderSharing::kSeparate}) {
      for (std::uint64_t seed : seeds) {
        SuperNetConfig cfg = base;
        cfg.sharing = mode;
        cfg.loss_weights = weights;
        cfg.validate();
        TrainConfig t = tc;
        t.loss_weights = weights;
        t.seed = seed;
        auto trained = train_mle(train, cfg, build_supernet<float>(cfg, seed), t);
        if (trained.diverged) throw NumericError("tension_study: training diverged (" + trained.failure + ")");
        TensionRow row{weights, mode, seed, evaluate(dev, trained.params, cfg, 0).wer,
                       evaluate(dev, trained.params, cfg, 1).wer};
        if (log) {
          *log << "tension weights=" << weights[0] << "/" << weights[1] << " decoder=" << to_string(mode)
               << " seed=" << seed << " wer_medium=" << row.wer_medium << " wer_large=" << row.wer_large << "\n";
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<DownsampleRow> compare_downsampling(const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
                                                const SuperNetConfig& base, const std::vector<std::uint64_t>& seeds,
                                                const TrainConfig& tc, std::ostream* log) {
  if (base.num_submodels() != 2) throw ConfigError("compare_downsampling: expects a (medium, large) config");
  std::vector<DownsampleRow> rows;
  for (Downsample method : {Downsample::kStacking, Downsample::kAvgPool, Downsample::kFunnel}) {
    SuperNetConfig cfg = base;
    cfg.encoder.downsample = method;
    cfg.validate();
    const Index n = count_params(cfg).supernet_total;
    for (std::uint64_t seed : seeds) {
      TrainConfig t = tc;
      t.seed = seed;
      auto trained = train_mle(train, cfg, build_supernet<float>(cfg, seed), t);
      if (trained.diverged) throw NumericError("compare_downsampling: training diverged (" + trained.failure + ")");
      DownsampleRow row{method, seed, evaluate(dev, trained.params, cfg, 0).wer,
                        evaluate(dev, trained.params, cfg, 1).wer, n};
      if (log) {
        *log << "downsample method=" << to_string(method) << " seed=" << seed << " params=" << n
             << " wer_medium=" << row.wer_medium << " wer_large=" << row.wer_large << "\n";
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace dce
