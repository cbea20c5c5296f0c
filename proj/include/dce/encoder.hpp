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

// Conformer-style causal / non-causal layer stacks with bounded attention
// context, 2x downsampling (stacking, average pooling, funnel pooling), and a
// streaming runner that reproduces offline outputs exactly.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dce/layout.hpp"
#include "dce/tensor.hpp"

namespace dce {

enum class Downsample { kStacking, kAvgPool, kFunnel };

std::string to_string(Downsample d);
Downsample parse_downsample(const std::string& s);

// How a particular layer changes the frame rate.
enum class Pooling { kNone, kStacking, kAvgPool, kFunnel };

struct ConformerLayerConfig {
  int model_dim = 512;
  int num_heads = 8;
  int ffn_expansion = 4;
  int conv_kernel = 8;
  int left_context = 23;
  int right_context = 0;
  bool has_self_attention = true;
  bool causal_conv = true;

  int conv_left() const { return causal_conv ? conv_kernel - 1 : (conv_kernel - 1) / 2; }
  int conv_right() const { return conv_kernel - 1 - conv_left(); }
  // Frames of look-ahead this layer needs at its own rate.
  int lookahead() const { return (has_self_attention ? right_context : 0) + conv_right(); }
};

struct EncoderConfig {
  int input_dim = 0;
  std::vector<ConformerLayerConfig> layers;  // causal stack first, then non-causal
  int num_causal = 0;
  Downsample downsample = Downsample::kFunnel;
  // Index of the layer at which the frame rate halves. Equal to layers.size()
  // when no layer of this encoder crosses it.
  int downsample_layer = 0;

  int num_layers() const { return static_cast<int>(layers.size()); }
  int num_non_causal() const { return num_layers() - num_causal; }
  Pooling pooling(int layer) const;
  // Width of the rows entering `layer` after any stacking/pooling.
  int layer_input_dim(int layer) const;
  // Width of the activation after running `upto` layers.
  int output_dim(int upto) const;
  bool has_input_projection(int layer) const;
  // Empty when valid; otherwise one message per violated rule.
  std::vector<std::string> violations() const;
  void validate() const;
};

std::string layer_prefix(int layer);

TensorLayout conformer_layer_layout(const ConformerLayerConfig& cfg, int in_dim, const std::string& prefix);
TensorLayout encoder_layout(const EncoderConfig& cfg);

// Closed-form parameter count of one layer; independent of the layout listing.
Index conformer_layer_param_count(const ConformerLayerConfig& cfg, int in_dim);

// Position t attends j with t - left <= j <= t + right, clipped to [0, T).
Mask local_attention_mask(Index T, Index left, Index right);

// ceil(T/2) queries over T keys; query t' uses the window of key 2t'.
Mask funnel_attention_mask(Index T, Index left, Index right);

// Input span an output frame depends on: output t' of a layer with `stride`
// reads input frames [stride*t' - left, stride*t' + right].
struct LayerReach {
  int stride = 1;
  int left = 0;
  int right = 0;
};

LayerReach layer_reach(const ConformerLayerConfig& cfg, Pooling pooling);

// Accumulated span over the first `upto` layers, in encoder-input frames.
struct EncoderReach {
  int stride = 1;
  Index left = 0;
  Index right = 0;
};

EncoderReach encoder_reach(const EncoderConfig& cfg, int upto);

// ---------------------------------------------------------------------------
// Downsampling.

namespace detail {

inline std::vector<Index> even_rows(Index T) {
  std::vector<Index> idx;
  for (Index t = 0; t < T; t += 2) idx.push_back(t);
  return idx;
}

// Partner of each even row; the final odd row pairs with itself.
inline std::vector<Index> odd_rows(Index T) {
  std::vector<Index> idx;
  for (Index t = 0; t < T; t += 2) idx.push_back(std::min(t + 1, T - 1));
  return idx;
}

}  // namespace detail

// Row t' = [h[2t'], h[2t'+1]]; an odd tail repeats the last frame.
template <typename Scalar>
Var<Scalar> downsample_stacking(const Var<Scalar>& h) {
  const Index T = h.rows();
  return concat<Scalar>({gather_rows(h, detail::even_rows(T)), gather_rows(h, detail::odd_rows(T))}, 1);
}

// Row t' = (h[2t'] + h[2t'+1]) / 2; an odd tail averages the lone frame with itself.
template <typename Scalar>
Var<Scalar> downsample_avgpool(const Var<Scalar>& h) {
  const Index T = h.rows();
  return scale(add(gather_rows(h, detail::even_rows(T)), gather_rows(h, detail::odd_rows(T))), Scalar(0.5));
}

// ---------------------------------------------------------------------------
// Layer blocks.

template <typename Scalar>
Var<Scalar> multi_head_attention(Binder<Scalar>& p, const std::string& prefix, int num_heads,
                                 const Var<Scalar>& query_src, const Var<Scalar>& kv_src,
                                 const Mask& mask) {
  const Var<Scalar> q = linear(p, prefix + ".q", query_src);
  const Var<Scalar> k = linear(p, prefix + ".k", kv_src);
  const Var<Scalar> v = linear(p, prefix + ".v", kv_src);
  const Index D = q.cols();
  if (D % num_heads != 0) throw ShapeError("multi_head_attention: model dim not divisible by heads");
  const Index dh = D / num_heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(Scalar(dh));
  std::vector<Var<Scalar>> heads;
  for (int h = 0; h < num_heads; ++h) {
    Var<Scalar> qh = num_heads == 1 ? q : slice(q, 1, h * dh, (h + 1) * dh);
    Var<Scalar> kh = num_heads == 1 ? k : slice(k, 1, h * dh, (h + 1) * dh);
    Var<Scalar> vh = num_heads == 1 ? v : slice(v, 1, h * dh, (h + 1) * dh);
    Var<Scalar> scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    heads.push_back(matmul(masked_softmax(scores, mask), vh));
  }
  Var<Scalar> joined = num_heads == 1 ? heads[0] : concat(heads, 1);
  return linear(p, prefix + ".o", joined);
}

// Self-attention whose queries are the average-pooled sequence and whose keys
// and values are the full-rate input. Output has ceil(T/2) rows.
template <typename Scalar>
Var<Scalar> funnel_attention(Binder<Scalar>& p, const std::string& prefix, const ConformerLayerConfig& cfg,
                             const Var<Scalar>& h) {
  if (!cfg.has_self_attention) {
    throw ConfigError("funnel_attention: layer '" + prefix + "' has no self-attention");
  }
  const Mask mask = funnel_attention_mask(h.rows(), cfg.left_context, cfg.right_context);
  return multi_head_attention(p, prefix, cfg.num_heads, downsample_avgpool(h), h, mask);
}

template <typename Scalar>
Var<Scalar> feed_forward(Binder<Scalar>& p, const std::string& prefix, const Var<Scalar>& x) {
  Var<Scalar> h = layer_norm(p, prefix + ".ln", x);
  h = swish(linear(p, prefix + ".l1", h));
  return linear(p, prefix + ".l2", h);
}

// LN -> pointwise (GLU) -> depthwise conv -> LN -> swish -> pointwise.
template <typename Scalar>
Var<Scalar> conv_module(Binder<Scalar>& p, const std::string& prefix, const ConformerLayerConfig& cfg,
                        const Var<Scalar>& x) {
  const Index D = x.cols();
  Var<Scalar> h = linear(p, prefix + ".pw1", layer_norm(p, prefix + ".ln", x));
  h = mul(slice(h, 1, 0, D), sigmoid(slice(h, 1, D, 2 * D)));
  h = depthwise_conv1d(h, p(prefix + ".dw.w"), p(prefix + ".dw.b"), cfg.conv_left());
  h = swish(layer_norm(p, prefix + ".norm", h));
  return linear(p, prefix + ".pw2", h);
}

template <typename Scalar>
Var<Scalar> conformer_layer_forward(Binder<Scalar>& p, const std::string& prefix,
                                    const ConformerLayerConfig& cfg, Pooling pooling, Var<Scalar> x) {
  if (pooling == Pooling::kStacking) x = downsample_stacking(x);
  if (pooling == Pooling::kAvgPool) x = downsample_avgpool(x);
  if (p.has(prefix + ".proj.w")) {
    x = linear(p, prefix + ".proj", x);
  } else if (x.cols() != cfg.model_dim) {
    throw ShapeError("conformer layer '" + prefix + "': input width " + std::to_string(x.cols()) +
                     " != model_dim " + std::to_string(cfg.model_dim));
  }
  const Scalar half(0.5);
  Var<Scalar> h = add(x, scale(feed_forward(p, prefix + ".ffn1", x), half));
  if (cfg.has_self_attention) {
    Var<Scalar> n = layer_norm(p, prefix + ".mhsa.ln", h);
    if (pooling == Pooling::kFunnel) {
      h = add(downsample_avgpool(h), funnel_attention(p, prefix + ".mhsa", cfg, n));
    } else {
      const Mask mask = local_attention_mask(n.rows(), cfg.left_context, cfg.right_context);
      h = add(h, multi_head_attention(p, prefix + ".mhsa", cfg.num_heads, n, n, mask));
    }
  } else if (pooling == Pooling::kFunnel) {
    throw ConfigError("conformer layer '" + prefix + "': funnel pooling needs self-attention");
  }
  h = add(h, conv_module(p, prefix + ".conv", cfg, h));
  h = add(h, scale(feed_forward(p, prefix + ".ffn2", h), half));
  return layer_norm(p, prefix + ".out_ln", h);
}

template <typename Scalar>
struct EncoderActivations {
  Var<Scalar> output;
  std::vector<Var<Scalar>> taps;  // taps[i] is the output of layer i
};

// Runs layers [0, upto). upto == 0 returns the input unchanged.
template <typename Scalar>
EncoderActivations<Scalar> encoder_forward(Binder<Scalar>& p, const EncoderConfig& cfg, const Var<Scalar>& x,
                                           int upto) {
  if (upto < 0 || upto > cfg.num_layers()) {
    throw ConfigError("encoder_forward: upto " + std::to_string(upto) + " outside [0, " +
                      std::to_string(cfg.num_layers()) + "]");
  }
  if (x.cols() != cfg.input_dim) {
    throw ShapeError("encoder_forward: input width " + std::to_string(x.cols()) + " != " +
                     std::to_string(cfg.input_dim));
  }
  EncoderActivations<Scalar> acts;
  acts.output = x;
  for (int i = 0; i < upto; ++i) {
    acts.output = conformer_layer_forward(p, layer_prefix(i), cfg.layers[i], cfg.pooling(i), acts.output);
    acts.taps.push_back(acts.output);
  }
  return acts;
}

// Offline convenience wrapper without differentiation.
template <typename Scalar>
Mat<Scalar> encoder_forward(const ParameterSet<Scalar>& params, const EncoderConfig& cfg, const Mat<Scalar>& x,
                            int upto) {
  Tape<Scalar> tape(false);
  Binder<Scalar> binder(params, tape);
  return encoder_forward(binder, cfg, tape.constant(x), upto).output.value();
}

// ---------------------------------------------------------------------------
// Streaming.

// Rolling input window for one layer. The layer is re-run on the window and
// only outputs whose whole input span is present are emitted; since every
// primitive is row-local this matches the offline computation exactly.
template <typename Scalar>
class LayerCache {
 public:
  LayerCache(const ConformerLayerConfig& cfg, Pooling pooling, std::string prefix)
      : cfg_(cfg), pooling_(pooling), prefix_(std::move(prefix)), reach_(layer_reach(cfg, pooling)) {}

  Mat<Scalar> push(const ParameterSet<Scalar>& params, const Mat<Scalar>& rows, bool final) {
    if (rows.rows() > 0) {
      if (window_.rows() == 0) {
        window_ = rows;
      } else {
        Mat<Scalar> grown(window_.rows() + rows.rows(), rows.cols());
        grown << window_, rows;
        window_ = std::move(grown);
      }
      seen_ += rows.rows();
    }
    const Index s = reach_.stride;
    Index ready = 0;
    if (final) {
      ready = (seen_ + s - 1) / s;
    } else if (seen_ - 1 - reach_.right >= 0) {
      ready = std::min((seen_ - 1 - reach_.right) / s + 1, (seen_ + s - 1) / s);
    }
    Mat<Scalar> out(0, cfg_.model_dim);
    if (ready > emitted_) {
      Tape<Scalar> tape(false);
      Binder<Scalar> binder(params, tape);
      const Mat<Scalar>& y =
          conformer_layer_forward(binder, prefix_, cfg_, pooling_, tape.constant(window_)).value();
      out = y.middleRows(emitted_ - start_ / s, ready - emitted_);
      emitted_ = ready;
    }
    Index keep_from = std::max<Index>(0, s * emitted_ - reach_.left);
    keep_from -= keep_from % s;
    if (keep_from > start_) {
      window_ = Mat<Scalar>(window_.bottomRows(window_.rows() - (keep_from - start_)));
      start_ = keep_from;
    }
    return out;
  }

  Index cached_rows() const { return window_.rows(); }
  // Upper bound on cached_rows() between steps.
  Index bound() const { return reach_.left + reach_.right + reach_.stride - 1; }
  Index emitted() const { return emitted_; }

 private:
  ConformerLayerConfig cfg_;
  Pooling pooling_;
  std::string prefix_;
  LayerReach reach_;
  Mat<Scalar> window_;
  Index start_ = 0;  // absolute index of window_.row(0)
  Index seen_ = 0;
  Index emitted_ = 0;
};

// Streaming state for the first `upto` layers of an encoder.
template <typename Scalar>
class EncoderState {
 public:
  EncoderState(const ParameterSet<Scalar>& params, const EncoderConfig& cfg, int upto) : params_(&params) {
    cfg.validate();
    if (upto < 0 || upto > cfg.num_layers()) throw ConfigError("EncoderState: bad layer count");
    for (int i = 0; i < upto; ++i) caches_.emplace_back(cfg.layers[i], cfg.pooling(i), layer_prefix(i));
    width_ = cfg.output_dim(upto);
  }

  // Newly final rows of every layer from one step; back() is the top layer.
  struct Emission {
    std::vector<Mat<Scalar>> layers;
    Mat<Scalar> output;
  };

  Emission step(const Mat<Scalar>& frames) { return advance(frames, false); }
  Emission flush() { return advance(Mat<Scalar>(0, 0), true); }

  bool flushed() const { return flushed_; }
  const std::vector<LayerCache<Scalar>>& caches() const { return caches_; }

 private:
  Emission advance(const Mat<Scalar>& frames, bool final) {
    if (flushed_) throw ConfigError("encoder_streaming_step: state already flushed");
    flushed_ = final;
    Emission e;
    Mat<Scalar> cur = frames;
    for (auto& c : caches_) {
      cur = c.push(*params_, cur, final);
      e.layers.push_back(cur);
    }
    e.output = caches_.empty() ? frames : cur;
    if (e.output.rows() == 0) e.output.resize(0, width_);
    return e;
  }

  const ParameterSet<Scalar>* params_;
  std::vector<LayerCache<Scalar>> caches_;
  int width_ = 0;
  bool flushed_ = false;
};

template <typename Scalar>
typename EncoderState<Scalar>::Emission encoder_streaming_step(EncoderState<Scalar>& state,
                                                               const Mat<Scalar>& new_frames) {
  return state.step(new_frames);
}

template <typename Scalar>
typename EncoderState<Scalar>::Emission encoder_streaming_flush(EncoderState<Scalar>& state) {
  return state.flush();
}

}  // namespace dce
