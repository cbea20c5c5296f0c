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

#include <gtest/gtest.h>

#include "dce/encoder.hpp"
#include "dce/gradcheck.hpp"
#include "test_util.hpp"

namespace dce {
namespace {

using testing::bit_equal;
using testing::random_mat;
using testing::random_params;

ConformerLayerConfig layer(int dim, int right, bool attention = true) {
  ConformerLayerConfig l;
  l.model_dim = dim;
  l.num_heads = 2;
  l.ffn_expansion = 2;
  l.conv_kernel = 3;
  l.left_context = 3;
  l.right_context = right;
  l.has_self_attention = attention;
  return l;
}

// Two causal layers (the second halves the rate) and two non-causal layers.
EncoderConfig small_encoder(Downsample ds) {
  EncoderConfig cfg;
  cfg.input_dim = 6;
  cfg.layers = {layer(8, 0, false), layer(8, 0), layer(12, 2), layer(12, 1)};
  cfg.num_causal = 2;
  cfg.downsample = ds;
  cfg.downsample_layer = 1;
  cfg.validate();
  return cfg;
}

class EncoderByDownsample : public ::testing::TestWithParam<Downsample> {};

TEST_P(EncoderByDownsample, GradientMatchesFiniteDifference) {
  const EncoderConfig cfg = small_encoder(GetParam());
  auto params = random_params(encoder_layout(cfg), 11);
  std::mt19937_64 rng(2);
  const Mat<double> x = random_mat(7, cfg.input_dim, rng);
  const double err = finite_diff_check<double>(
      [&](Binder<double>& b) {
        return testing::probe(encoder_forward(b, cfg, b.tape().constant(x), cfg.num_layers()).output);
      },
      params, 1e-5, 1e-3);
  EXPECT_LT(err, 1e-5);
}

TEST_P(EncoderByDownsample, OutputShapes) {
  const EncoderConfig cfg = small_encoder(GetParam());
  auto params = random_params(encoder_layout(cfg), 3);
  for (Index T : {1, 2, 5, 8}) {
    const Mat<double> x = Mat<double>::Ones(T, 6);
    const Mat<double> y = encoder_forward(params, cfg, x, 4);
    EXPECT_EQ(y.rows(), (T + 1) / 2);
    EXPECT_EQ(y.cols(), 12);
    EXPECT_EQ(encoder_forward(params, cfg, x, 1).rows(), T);
  }
}

template <typename Scalar>
void check_streaming(const EncoderConfig& cfg, int upto, Index T, std::uint64_t seed) {
  auto params = random_params<Scalar>(encoder_layout(cfg), seed);
  std::mt19937_64 rng(seed + 1);
  const Mat<Scalar> x = random_mat<Scalar>(T, cfg.input_dim, rng);
  Tape<Scalar> tape(false);
  Binder<Scalar> binder(params, tape);
  const auto offline = encoder_forward(binder, cfg, tape.constant(x), upto);
  for (Index chunk : {Index(1), Index(2), Index(7), T}) {
    EncoderState<Scalar> state(params, cfg, upto);
    std::vector<std::vector<Mat<Scalar>>> per_layer(upto);
    std::vector<Mat<Scalar>> outputs;
    auto collect = [&](const typename EncoderState<Scalar>::Emission& e) {
      for (int i = 0; i < upto; ++i) per_layer[i].push_back(e.layers[i]);
      outputs.push_back(e.output);
      for (const auto& c : state.caches()) EXPECT_LE(c.cached_rows(), c.bound());
    };
    for (Index t = 0; t < T; t += chunk) collect(state.step(x.middleRows(t, std::min(chunk, T - t))));
    collect(state.flush());
    auto stitch = [](const std::vector<Mat<Scalar>>& parts, Index cols) {
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
    };
    const Mat<Scalar> streamed = stitch(outputs, cfg.output_dim(upto));
    EXPECT_TRUE(bit_equal<Scalar>(streamed, offline.output.value())) << "chunk=" << chunk;
    for (int i = 0; i < upto; ++i) {
      EXPECT_TRUE(bit_equal<Scalar>(stitch(per_layer[i], cfg.layers[i].model_dim), offline.taps[i].value()))
          << "chunk=" << chunk << " layer=" << i;
    }
  }
}

TEST_P(EncoderByDownsample, StreamingIsBitExactFloat) {
  const EncoderConfig cfg = small_encoder(GetParam());
  for (int upto : {1, 2, 4}) check_streaming<float>(cfg, upto, 23, 5);
  check_streaming<float>(cfg, 4, 1, 6);
  check_streaming<float>(cfg, 4, 2, 7);
}

TEST_P(EncoderByDownsample, StreamingIsBitExactDouble) {
  check_streaming<double>(small_encoder(GetParam()), 4, 18, 8);
}

// Perturbing input frame j may only move outputs whose reach covers j, and
// the right edge of the reach is attained.
TEST_P(EncoderByDownsample, PerturbationRespectsReach) {
  const EncoderConfig cfg = small_encoder(GetParam());
  auto params = random_params(encoder_layout(cfg), 9);
  std::mt19937_64 rng(10);
  const Index T = 40;
  const Mat<double> x = random_mat(T, 6, rng);
  for (int upto : {2, 4}) {
    const EncoderReach reach = encoder_reach(cfg, upto);
    const Mat<double> base = encoder_forward(params, cfg, x, upto);
    for (Index j : {Index(9), Index(20)}) {
      Mat<double> xp = x;
      xp.row(j).array() += 0.5;
      const Mat<double> moved = encoder_forward(params, cfg, xp, upto);
      bool edge_moved = false;
      for (Index t = 0; t < base.rows(); ++t) {
        const Index lo = reach.stride * t - reach.left, hi = reach.stride * t + reach.right;
        const bool same = bit_equal<double>(Mat<double>(base.row(t)), Mat<double>(moved.row(t)));
        if (j < lo || j > hi) {
          EXPECT_TRUE(same) << "upto=" << upto << " j=" << j << " t=" << t;
        }
        if (hi == j && !same) edge_moved = true;
      }
      if ((j - reach.right) % reach.stride == 0) {
        EXPECT_TRUE(edge_moved) << "upto=" << upto << " j=" << j;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(All, EncoderByDownsample,
                         ::testing::Values(Downsample::kStacking, Downsample::kAvgPool, Downsample::kFunnel),
                         [](const auto& info) { return to_string(info.param); });

TEST(Encoder, CausalStackHasNoLookahead) {
  const EncoderConfig cfg = small_encoder(Downsample::kStacking);
  EXPECT_EQ(encoder_reach(cfg, 1).right, 0);
  // Stacking pairs frame 2t' with 2t'+1.
  EXPECT_EQ(encoder_reach(cfg, 2).right, 1);
  // Non-causal right contexts 2 and 1 at half rate.
  EXPECT_EQ(encoder_reach(cfg, 4).right, 1 + 2 * (2 + 1));
}

TEST(Encoder, ParamCountClosedFormMatchesLayout) {
  for (int in : {8, 20}) {
    for (bool att : {true, false}) {
      ConformerLayerConfig l = layer(8, 0, att);
      l.conv_kernel = 5;
      EXPECT_EQ(conformer_layer_param_count(l, in), layout_size(conformer_layer_layout(l, in, "x")));
    }
  }
}

TEST(Encoder, StackingDoublesLayerInputWidth) {
  const EncoderConfig cfg = small_encoder(Downsample::kStacking);
  EXPECT_EQ(cfg.layer_input_dim(1), 16);
  EXPECT_TRUE(cfg.has_input_projection(1));
  EXPECT_FALSE(small_encoder(Downsample::kFunnel).has_input_projection(1));
}

TEST(Encoder, AttentionMasks) {
  const Mask m = local_attention_mask(5, 1, 2);
  EXPECT_TRUE(m(2, 1) && m(2, 2) && m(2, 3) && m(2, 4));
  EXPECT_FALSE(m(2, 0));
  EXPECT_FALSE(m(0, 3));
  const Mask f = funnel_attention_mask(5, 2, 0);
  ASSERT_EQ(f.rows(), 3);
  ASSERT_EQ(f.cols(), 5);
  EXPECT_TRUE(f(2, 2) && f(2, 3) && f(2, 4));
  EXPECT_FALSE(f(1, 3));
  EXPECT_TRUE(f(1, 0) && f(1, 2));
}

TEST(Encoder, DownsamplingOddTail) {
  Tape<double> tape(false);
  Mat<double> h(3, 1);
  h << 1, 3, 7;
  const Mat<double> s = downsample_stacking(tape.constant(h)).value();
  ASSERT_EQ(s.rows(), 2);
  EXPECT_EQ(s(1, 0), 7.0);
  EXPECT_EQ(s(1, 1), 7.0);
  const Mat<double> a = downsample_avgpool(tape.constant(h)).value();
  EXPECT_EQ(a(0, 0), 2.0);
  EXPECT_EQ(a(1, 0), 7.0);
}

TEST(Encoder, ValidationRejectsBadConfigs) {
  EncoderConfig cfg = small_encoder(Downsample::kFunnel);
  cfg.layers[0].right_context = 1;
  cfg.layers[0].has_self_attention = true;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_encoder(Downsample::kFunnel);
  cfg.downsample_layer = 0;  // layer 0 has no attention
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_encoder(Downsample::kFunnel);
  cfg.downsample_layer = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_encoder(Downsample::kFunnel);
  cfg.layers[2].num_heads = 5;
  EXPECT_EQ(cfg.violations().size(), 1u);
  EXPECT_THROW(parse_downsample("maxpool"), ConfigError);
}

TEST(Encoder, StreamingAfterFlushIsError) {
  const EncoderConfig cfg = small_encoder(Downsample::kFunnel);
  auto params = random_params<float>(encoder_layout(cfg), 1);
  EncoderState<float> s(params, cfg, 4);
  s.step(Mat<float>::Ones(3, 6));
  s.flush();
  EXPECT_THROW(s.step(Mat<float>::Ones(1, 6)), ConfigError);
}

}  // namespace
}  // namespace dce
