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

#include "dce/transducer.hpp"

namespace dce {

std::string to_string(Lattice l) { return l == Lattice::kMonotonic ? "monotonic" : "standard"; }

Lattice parse_lattice(const std::string& s) {
  if (s == "monotonic") return Lattice::kMonotonic;
  if (s == "standard") return Lattice::kStandard;
  throw ConfigError("unknown lattice '" + s + "' (expected monotonic|standard)");
}

std::vector<std::string> DecoderConfig::violations() const {
  std::vector<std::string> v;
  if (vocab_size < 1) v.push_back("decoder vocab_size must be >= 1");
  if (embed_dim < 1) v.push_back("decoder embed_dim must be >= 1");
  if (label_context < 0) v.push_back("decoder label_context must be >= 0");
  if (joint_dim < 1) v.push_back("decoder joint_dim must be >= 1");
  if (max_symbols_per_frame < 1) v.push_back("decoder max_symbols_per_frame must be >= 1");
  return v;
}

std::string decoder_prefix(int k) { return "dec." + std::to_string(k); }

TensorLayout decoder_layout(const DecoderConfig& cfg, int encoder_dim, const std::string& prefix) {
  TensorLayout out;
  const Index K = cfg.num_outputs(), E = cfg.embed_dim, J = cfg.joint_dim;
  for (int i = 0; i < cfg.label_context; ++i) {
    out.push_back({prefix + ".embed." + std::to_string(i), K, E, Init::kGlorotUniform});
  }
  if (cfg.label_context > 0) {
    add_linear(out, prefix + ".pred", Index(cfg.label_context) * E, E);
  } else {
    out.push_back({prefix + ".pred.b", 1, E, Init::kZeros});
  }
  add_linear(out, prefix + ".joint.enc", encoder_dim, J);
  add_linear(out, prefix + ".joint.pred", E, J, false);
  add_linear(out, prefix + ".joint.out", J, K);
  return out;
}

Index decoder_param_count(const DecoderConfig& cfg, int encoder_dim) {
  const Index K = cfg.num_outputs(), E = cfg.embed_dim, J = cfg.joint_dim, c = cfg.label_context;
  const Index embed = c * K * E;
  const Index pred = (c > 0 ? c * E * E : 0) + E;
  const Index joint = (Index(encoder_dim) * J + J) + E * J + (J * K + K);
  return embed + pred + joint;
}

std::vector<std::vector<int>> label_contexts(const std::vector<int>& labels, int label_context) {
  std::vector<std::vector<int>> out;
  for (std::size_t u = 0; u <= labels.size(); ++u) {
    std::vector<int> ctx(static_cast<std::size_t>(label_context), kBlank);
    for (int i = 0; i < label_context; ++i) {
      const long src = static_cast<long>(u) - label_context + i;
      if (src >= 0) ctx[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

WerResult wer(const std::vector<int>& ref, const std::vector<int>& hyp) {
  const std::size_t R = ref.size(), H = hyp.size();
  // cost[i][j] for ref[0..i) against hyp[0..j).
  std::vector<std::vector<int>> cost(R + 1, std::vector<int>(H + 1, 0));
  for (std::size_t i = 0; i <= R; ++i) cost[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= H; ++j) cost[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= R; ++i) {
    for (std::size_t j = 1; j <= H; ++j) {
      const int sub = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cost[i][j] = std::min({sub, cost[i - 1][j] + 1, cost[i][j - 1] + 1});
    }
  }
  WerResult r;
  r.reference_length = static_cast<int>(R);
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && cost[i][j] == cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  r.rate = static_cast<double>(r.errors()) / static_cast<double>(std::max<std::size_t>(1, R));
  return r;
}

}  // namespace dce
