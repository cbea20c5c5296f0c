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

#include "dce/encoder.hpp"

#include <sstream>

namespace dce {

std::string to_string(Downsample d) {
  switch (d) {
    case Downsample::kStacking:
      return "stacking";
    case Downsample::kAvgPool:
      return "avgpool";
    case Downsample::kFunnel:
      return "funnel";
  }
  return "?";
}

Downsample parse_downsample(const std::string& s) {
  if (s == "stacking") return Downsample::kStacking;
  if (s == "avgpool") return Downsample::kAvgPool;
  if (s == "funnel") return Downsample::kFunnel;
  throw ConfigError("unknown downsample method '" + s + "' (expected stacking|avgpool|funnel)");
}

Pooling EncoderConfig::pooling(int layer) const {
  if (layer != downsample_layer) return Pooling::kNone;
  switch (downsample) {
    case Downsample::kStacking:
      return Pooling::kStacking;
    case Downsample::kAvgPool:
      return Pooling::kAvgPool;
    case Downsample::kFunnel:
      return Pooling::kFunnel;
  }
  return Pooling::kNone;
}

int EncoderConfig::layer_input_dim(int layer) const {
  const int raw = layer == 0 ? input_dim : layers[layer - 1].model_dim;
  return pooling(layer) == Pooling::kStacking ? 2 * raw : raw;
}

int EncoderConfig::output_dim(int upto) const { return upto == 0 ? input_dim : layers[upto - 1].model_dim; }

bool EncoderConfig::has_input_projection(int layer) const {
  return layer_input_dim(layer) != layers[layer].model_dim;
}

std::vector<std::string> EncoderConfig::violations() const {
  std::vector<std::string> v;
  auto fail = [&v](const std::string& msg) { v.push_back(msg); };
  if (input_dim < 1) fail("encoder input_dim must be >= 1");
  if (num_causal < 0 || num_causal > num_layers()) fail("num_causal outside [0, layers]");
  if (downsample_layer < 0 || downsample_layer > num_causal) {
    fail("downsample position " + std::to_string(downsample_layer) + " must lie in [0, N=" +
         std::to_string(num_causal) + "]");
  }
  for (int i = 0; i < num_layers(); ++i) {
    const auto& l = layers[i];
    const std::string tag = "layer " + std::to_string(i) + ": ";
    if (l.model_dim < 1 || l.num_heads < 1 || l.model_dim % l.num_heads != 0) {
      fail(tag + "model_dim must be a positive multiple of num_heads");
    }
    if (l.ffn_expansion < 1) fail(tag + "ffn_expansion must be >= 1");
    if (l.conv_kernel < 1) fail(tag + "conv_kernel must be >= 1");
    if (l.left_context < 0 || l.right_context < 0) fail(tag + "contexts must be >= 0");
    if (i < num_causal && (l.right_context != 0 || !l.causal_conv)) {
      fail(tag + "causal layers need right_context == 0 and causal convolution");
    }
  }
  if (downsample == Downsample::kFunnel && downsample_layer < num_layers() &&
      downsample_layer >= 0 && !layers[downsample_layer].has_self_attention) {
    fail("funnel pooling at layer " + std::to_string(downsample_layer) + " requires self-attention");
  }
  return v;
}

void EncoderConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::ostringstream os;
  os << "invalid encoder config:";
  for (const auto& m : v) os << "\n  - " << m;
  throw ConfigError(os.str());
}

std::string layer_prefix(int layer) { return "enc." + std::to_string(layer); }

TensorLayout conformer_layer_layout(const ConformerLayerConfig& cfg, int in_dim, const std::string& prefix) {
  TensorLayout out;
  const Index D = cfg.model_dim;
  const Index F = static_cast<Index>(cfg.model_dim) * cfg.ffn_expansion;
  if (in_dim != cfg.model_dim) add_linear(out, prefix + ".proj", in_dim, D);
  for (const char* ffn : {".ffn1", ".ffn2"}) {
    add_norm(out, prefix + ffn + ".ln", D);
    add_linear(out, prefix + ffn + ".l1", D, F);
    add_linear(out, prefix + ffn + ".l2", F, D);
  }
  if (cfg.has_self_attention) {
    add_norm(out, prefix + ".mhsa.ln", D);
    for (const char* m : {".q", ".k", ".v", ".o"}) add_linear(out, prefix + ".mhsa" + m, D, D);
  }
  add_norm(out, prefix + ".conv.ln", D);
  add_linear(out, prefix + ".conv.pw1", D, 2 * D);
  out.push_back({prefix + ".conv.dw.w", cfg.conv_kernel, D, Init::kGlorotUniform});
  out.push_back({prefix + ".conv.dw.b", 1, D, Init::kZeros});
  add_norm(out, prefix + ".conv.norm", D);
  add_linear(out, prefix + ".conv.pw2", D, D);
  add_norm(out, prefix + ".out_ln", D);
  return out;
}

TensorLayout encoder_layout(const EncoderConfig& cfg) {
  TensorLayout out;
  for (int i = 0; i < cfg.num_layers(); ++i) {
    auto l = conformer_layer_layout(cfg.layers[i], cfg.layer_input_dim(i), layer_prefix(i));
    out.insert(out.end(), l.begin(), l.end());
  }
  return out;
}

Index conformer_layer_param_count(const ConformerLayerConfig& cfg, int in_dim) {
  const Index D = cfg.model_dim, F = D * cfg.ffn_expansion, K = cfg.conv_kernel;
  const Index projection = in_dim != D ? Index(in_dim) * D + D : 0;
  const Index ffn = 2 * D + (D * F + F) + (F * D + D);
  const Index attention = cfg.has_self_attention ? 2 * D + 4 * (D * D + D) : 0;
  const Index conv = 2 * D + (2 * D * D + 2 * D) + (K * D + D) + 2 * D + (D * D + D);
  return projection + 2 * ffn + attention + conv + 2 * D;
}

Mask local_attention_mask(Index T, Index left, Index right) {
  Mask m = Mask::Constant(T, T, false);
  for (Index t = 0; t < T; ++t) {
    const Index lo = std::max<Index>(0, t - left), hi = std::min<Index>(T - 1, t + right);
    for (Index j = lo; j <= hi; ++j) m(t, j) = true;
  }
  return m;
}

Mask funnel_attention_mask(Index T, Index left, Index right) {
  const Index Tq = (T + 1) / 2;
  Mask m = Mask::Constant(Tq, T, false);
  for (Index q = 0; q < Tq; ++q) {
    const Index anchor = 2 * q;
    const Index lo = std::max<Index>(0, anchor - left), hi = std::min<Index>(T - 1, anchor + right);
    for (Index j = lo; j <= hi; ++j) m(q, j) = true;
  }
  return m;
}

LayerReach layer_reach(const ConformerLayerConfig& cfg, Pooling pooling) {
  const int att_l = cfg.has_self_attention ? cfg.left_context : 0;
  const int att_r = cfg.has_self_attention ? cfg.right_context : 0;
  const int cl = cfg.conv_left(), cr = cfg.conv_right();
  switch (pooling) {
    case Pooling::kNone:
      return {1, cl + att_l, cr + att_r};
    case Pooling::kStacking:
    case Pooling::kAvgPool:
      // Attention and convolution both run on pooled rows.
      return {2, 2 * (cl + att_l), 2 * (cr + att_r) + 1};
    case Pooling::kFunnel:
      // Keys stay at the input rate; the pooled query also reads row 2t'+1.
      return {2, 2 * cl + att_l, 2 * cr + std::max(1, att_r)};
  }
  return {};
}

EncoderReach encoder_reach(const EncoderConfig& cfg, int upto) {
  EncoderReach r;
  for (int i = 0; i < upto; ++i) {
    const LayerReach l = layer_reach(cfg.layers[i], cfg.pooling(i));
    r.left += static_cast<Index>(r.stride) * l.left;
    r.right += static_cast<Index>(r.stride) * l.right;
    r.stride *= l.stride;
  }
  return r;
}

}  // namespace dce
