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

#pragma once

#include <cstring>
#include <random>
#include <string>

#include "dce/layout.hpp"
#include "dce/tensor.hpp"

namespace dce::testing {

template <typename Scalar = double>
Mat<Scalar> random_mat(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(g(rng));
  return m;
}

// Scalar probe of a matrix-valued output: sum(y .* R) for a fixed random R,
// so every output element carries an O(1) weight.
template <typename Scalar>
Var<Scalar> probe(const Var<Scalar>& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, y.tape()->constant(random_mat<Scalar>(y.rows(), y.cols(), rng))));
}

// Every tensor drawn from N(0, scale^2); gains get 1 added so norms stay sane.
template <typename Scalar = double>
ParameterSet<Scalar> random_params(const TensorLayout& layout, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  ParameterSet<Scalar> p;
  for (const auto& t : layout) {
    Mat<Scalar> m = random_mat<Scalar>(t.rows, t.cols, rng, scale);
    if (t.init == Init::kOnes) m.array() += Scalar(1);
    p.emplace(t.name, std::move(m));
  }
  return p;
}

template <typename Scalar>
bool bit_equal(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a.data()[i], &b.data()[i], sizeof(Scalar)) != 0) return false;
  }
  return true;
}

}  // namespace dce::testing
