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

// Synthetic transduction corpus and the acoustic frontend transforms.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dce/tensor.hpp"

namespace dce {

inline constexpr int kBlank = 0;

struct Utterance {
  Mat<float> frames;        // T x D
  std::vector<int> labels;  // values in 1..V
  int domain = 0;
};

struct CorpusSpec {
  int vocab_size = 8;
  int feature_dim = 16;
  int min_frames_per_symbol = 6;
  int max_frames_per_symbol = 9;
  double noise_stddev = 1.5;  // high enough that depth and lookahead pay off
  int min_labels = 2;
  int max_labels = 8;
  int num_domains = 2;
  // Frame-rate reduction applied before the transducer sees the sequence:
  // frontend subsampling, then the encoder's 2x downsampling. The generator
  // only keeps utterances whose reduced length covers the label count.
  int frontend_factor = 3;
  int encoder_reduction = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Split { kTrain = 0, kDev = 1, kTest = 2 };

struct Corpus {
  int vocab_size = 0;
  int feature_dim = 0;
  std::vector<Utterance> utterances;
};

// Per-symbol prototypes (row v-1 is symbol v), drawn from a unit Gaussian.
Mat<float> symbol_prototypes(const CorpusSpec& spec);

// Transducer frames left after frontend and encoder reduction.
Index reduced_length(Index frames, int frontend_factor, int encoder_reduction);

// Deterministic given (spec, split); different splits use disjoint streams.
std::vector<Utterance> synth_generate(const CorpusSpec& spec, int n, Split split = Split::kTrain);

void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

struct FrontendConfig {
  int feature_dim = 128;
  int stack = 4;
  int factor = 3;
  int domain_dim = 16;

  int output_dim() const { return feature_dim * stack + domain_dim; }
};

// Row t' concatenates input rows t'*factor .. t'*factor+stack-1; rows past the
// end repeat the final frame. Output has ceil(T / factor) rows.
template <typename Scalar>
Mat<Scalar> frontend_stack_subsample(const Mat<Scalar>& frames, int stack, int factor) {
  if (frames.rows() == 0) throw DataError("frontend_stack_subsample: empty input");
  if (stack < 1 || factor < 1) throw ConfigError("frontend_stack_subsample: stack and factor must be >= 1");
  const Index T = frames.rows(), D = frames.cols();
  const Index out_rows = (T + factor - 1) / factor;
  Mat<Scalar> out(out_rows, stack * D);
  for (Index t = 0; t < out_rows; ++t) {
    for (int s = 0; s < stack; ++s) {
      const Index src = std::min<Index>(t * factor + s, T - 1);
      out.block(t, s * D, 1, D) = frames.row(src);
    }
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> append_domain_id(const Mat<Scalar>& frames, int domain, int dim) {
  if (domain < 0 || domain >= dim) {
    throw DataError("append_domain_id: domain " + std::to_string(domain) + " outside [0, " +
                    std::to_string(dim) + ")");
  }
  Mat<Scalar> out = Mat<Scalar>::Zero(frames.rows(), frames.cols() + dim);
  out.leftCols(frames.cols()) = frames;
  out.col(frames.cols() + domain).setOnes();
  return out;
}

// Frontend applied to one utterance: stacking, subsampling, domain one-hot.
template <typename Scalar>
Mat<Scalar> encoder_input(const Utterance& utt, const FrontendConfig& fe) {
  if (utt.frames.cols() != fe.feature_dim) {
    throw DataError("encoder_input: utterance has " + std::to_string(utt.frames.cols()) +
                    " feature dims, frontend expects " + std::to_string(fe.feature_dim));
  }
  Mat<Scalar> stacked = frontend_stack_subsample<Scalar>(utt.frames.cast<Scalar>(), fe.stack, fe.factor);
  return append_domain_id(stacked, utt.domain, fe.domain_dim);
}

}  // namespace dce
