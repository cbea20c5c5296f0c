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

// Cascaded super-net: one causal stack followed by one non-causal stack, K
// sub-models cut at prefixes of both, each with its own decoder (or a single
// shared one). Also model files, size accounting and int8 quantization.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "dce/binary_io.hpp"
#include "dce/corpus.hpp"
#include "dce/encoder.hpp"
#include "dce/transducer.hpp"

namespace dce {

enum class DecoderSharing { kSeparate, kShared };

std::string to_string(DecoderSharing s);
DecoderSharing parse_decoder_sharing(const std::string& s);

struct SubModelConfig {
  int n_causal = 0;
  int m_non_causal = 0;
  DecoderConfig decoder;

  int encoder_layers() const { return n_causal + m_non_causal; }
};

struct SuperNetConfig {
  std::string name = "custom";
  FrontendConfig frontend;
  EncoderConfig encoder;  // layers [0, num_causal) causal, the rest non-causal
  std::vector<SubModelConfig> submodels;
  std::vector<double> loss_weights;
  DecoderSharing sharing = DecoderSharing::kSeparate;

  int num_submodels() const { return static_cast<int>(submodels.size()); }
  int encoder_dim(int k) const { return encoder.output_dim(submodels[k].encoder_layers()); }
  // Parameter prefix of the decoder used by sub-model k.
  std::string decoder_of(int k) const;

  std::vector<std::string> violations() const;
  void validate() const;
};

// Canonical key=value text, one key per line, stable ordering.
std::string config_to_text(const SuperNetConfig& cfg);
// Applies the keys in `text` on top of `base`; unknown keys are errors.
SuperNetConfig config_from_text(const std::string& text, const SuperNetConfig& base = SuperNetConfig{});

std::vector<std::string> preset_names();
SuperNetConfig preset(const std::string& name);

TensorLayout supernet_layout(const SuperNetConfig& cfg);

// Scaled-uniform initialisation in layout order; values are drawn in double
// and rounded to Scalar so float and double builds agree.
template <typename Scalar>
ParameterSet<Scalar> build_supernet(const SuperNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParameterSet<Scalar> params;
  for (const TensorSpec& t : supernet_layout(cfg)) {
    Mat<Scalar> m(t.rows, t.cols);
    switch (t.init) {
      case Init::kZeros:
        m.setZero();
        break;
      case Init::kOnes:
        m.setOnes();
        break;
      case Init::kGlorotUniform: {
        const double s = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        std::uniform_real_distribution<double> u(-s, s);
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(u(rng));
        break;
      }
    }
    params.emplace(t.name, std::move(m));
  }
  return params;
}

// Encoder outputs of every sub-model from a single pass through the deepest
// path needed; entry k is the output after sub-model k's last layer.
template <typename Scalar>
std::vector<Var<Scalar>> submodel_encodings(Binder<Scalar>& p, const SuperNetConfig& cfg, const Var<Scalar>& x) {
  int deepest = 0;
  for (const auto& s : cfg.submodels) deepest = std::max(deepest, s.encoder_layers());
  EncoderActivations<Scalar> acts = encoder_forward(p, cfg.encoder, x, deepest);
  std::vector<Var<Scalar>> out;
  for (const auto& s : cfg.submodels) {
    const int n = s.encoder_layers();
    out.push_back(n == 0 ? x : acts.taps[static_cast<std::size_t>(n - 1)]);
  }
  return out;
}

template <typename Scalar>
struct SubModelOutput {
  Mat<Scalar> encoding;
  std::string decoder_prefix;
  DecoderConfig decoder;
};

template <typename Scalar>
SubModelOutput<Scalar> submodel_forward(const ParameterSet<Scalar>& params, const SuperNetConfig& cfg, int k,
                                        const Mat<Scalar>& x) {
  if (k < 0 || k >= cfg.num_submodels()) throw ConfigError("submodel_forward: k out of range");
  const SubModelConfig& s = cfg.submodels[k];
  return {encoder_forward(params, cfg.encoder, x, s.encoder_layers()), cfg.decoder_of(k), s.decoder};
}

// Standalone single-sub-model config for sub-model k: truncated encoder, one
// decoder renamed to dec.0, unit loss weight.
SuperNetConfig extracted_config(const SuperNetConfig& cfg, int k);

// Name in the super-net of tensor `name` of extracted sub-model k.
std::string extraction_source(const SuperNetConfig& cfg, int k, const std::string& name);

template <typename Scalar>
ParameterSet<Scalar> extract_parameters(const ParameterSet<Scalar>& params, const SuperNetConfig& cfg, int k) {
  cfg.validate();
  const SuperNetConfig sub = extracted_config(cfg, k);
  ParameterSet<Scalar> out;
  for (const TensorSpec& t : supernet_layout(sub)) {
    const std::string from = extraction_source(cfg, k, t.name);
    auto it = params.find(from);
    if (it == params.end()) throw DataError("extract: missing parameter " + from);
    if (it->second.rows() != t.rows || it->second.cols() != t.cols) {
      throw DataError("extract: parameter " + from + " has unexpected shape");
    }
    out.emplace(t.name, it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Size accounting.

struct CountSegment {
  std::string name;
  Index params = 0;
};

struct ParamReport {
  std::vector<CountSegment> causal_segments;      // between consecutive cut points
  std::vector<CountSegment> non_causal_segments;
  std::vector<CountSegment> decoders;             // one per distinct decoder
  std::vector<Index> submodel_totals;             // standalone size of each sub-model
  Index encoder_total = 0;
  Index supernet_total = 0;
  Index standalone_sum = 0;
  double reduction_ratio = 0;                     // 1 - supernet / sum of standalone
};

// Closed-form counts from layer configs.
ParamReport count_params(const SuperNetConfig& cfg);

// 1 - unified / separate, where sub-model k owns the first segments_used[k]
// encoder segments plus decoder k, and the unified net stores each once.
double sharing_reduction_ratio(const std::vector<double>& segment_sizes, const std::vector<double>& decoder_sizes,
                               const std::vector<int>& segments_used);

// ---------------------------------------------------------------------------
// Model files.

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1, kI8 = 2 };

constexpr std::uint32_t kModelFormatVersion = 1;

struct QuantizedTensor {
  Index rows = 0;
  Index cols = 0;
  float scale = 1.0f;
  std::vector<std::int8_t> values;  // row-major
};

struct QuantizedBundle {
  std::map<std::string, QuantizedTensor> tensors;
};

// Symmetric per-tensor quantization, scale = max|w| / 127. All-zero tensors
// use scale 1.
template <typename Scalar>
QuantizedBundle quantize_int8(const ParameterSet<Scalar>& params) {
  QuantizedBundle b;
  for (const auto& [name, m] : params) {
    QuantizedTensor q;
    q.rows = m.rows();
    q.cols = m.cols();
    double amax = 0;
    for (Index i = 0; i < m.size(); ++i) amax = std::max(amax, std::abs(static_cast<double>(m.data()[i])));
    q.scale = amax > 0 ? static_cast<float>(amax / 127.0) : 1.0f;
    const double s = q.scale;
    q.values.resize(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.size(); ++i) {
      const double r = std::nearbyint(static_cast<double>(m.data()[i]) / s);
      q.values[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(std::clamp(r, -127.0, 127.0));
    }
    b.tensors.emplace(name, std::move(q));
  }
  return b;
}

template <typename Scalar>
ParameterSet<Scalar> dequantize(const QuantizedBundle& b) {
  ParameterSet<Scalar> out;
  for (const auto& [name, q] : b.tensors) {
    Mat<Scalar> m(q.rows, q.cols);
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<Scalar>(static_cast<double>(q.values[static_cast<std::size_t>(i)]) *
                                        static_cast<double>(q.scale));
    }
    out.emplace(name, std::move(m));
  }
  return out;
}

struct ModelFile {
  SuperNetConfig config;
  DType dtype = DType::kF32;
  ParameterSet<double> params;  // dequantized when dtype is kI8
  QuantizedBundle quantized;    // only filled for kI8
};

std::vector<std::uint8_t> encode_model(const SuperNetConfig& cfg, const ParameterSet<double>& params, DType dtype);
std::vector<std::uint8_t> encode_quantized(const SuperNetConfig& cfg, const QuantizedBundle& bundle);
ModelFile decode_model(const std::vector<std::uint8_t>& bytes, const std::string& what);

ModelFile load_model(const std::string& path);

template <typename Scalar>
void save_model(const std::string& path, const SuperNetConfig& cfg, const ParameterSet<Scalar>& params) {
  constexpr DType dt = std::is_same_v<Scalar, float> ? DType::kF32 : DType::kF64;
  io::write_file(path, encode_model(cfg, cast_parameters<double>(params), dt));
}

void save_quantized(const std::string& path, const SuperNetConfig& cfg, const QuantizedBundle& bundle);

// Bytes of a quantized model file computed from the layout alone: one byte
// per weight plus a fixed per-tensor record (name, shape, checksum, scale)
// and the header with the embedded config.
std::uint64_t quantized_size_bytes(const SuperNetConfig& cfg);

}  // namespace dce
