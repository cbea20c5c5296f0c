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

#include <algorithm>
#include <cmath>
#include <functional>

#include "dce/tensor.hpp"

namespace dce {

template <typename Scalar>
using LossFn = std::function<Var<Scalar>(Binder<Scalar>&)>;

// Reverse-mode gradient of `f` at `params`.
template <typename Scalar>
ParameterSet<Scalar> autodiff_gradient(const LossFn<Scalar>& f, const ParameterSet<Scalar>& params) {
  Tape<Scalar> tape;
  Binder<Scalar> binder(params, tape);
  Var<Scalar> loss = f(binder);
  tape.backward(loss);
  return binder.gradients();
}

template <typename Scalar>
Scalar evaluate_loss(const LossFn<Scalar>& f, const ParameterSet<Scalar>& params) {
  Tape<Scalar> tape(false);
  Binder<Scalar> binder(params, tape);
  return f(binder).value()(0, 0);
}

// Compares reverse-mode gradients against central differences and returns
// max |g_ad - g_fd| / max(floor, |g_ad| + |g_fd|) over every element. Deep
// compositions want a larger floor: gradients that vanish analytically (e.g.
// attention key biases) still pick up rounding noise in the differences.
// Never throws on disagreement; the caller decides what error is acceptable.
template <typename Scalar>
double finite_diff_check(const LossFn<Scalar>& f, const ParameterSet<Scalar>& params, double eps,
                         double floor = 1e-8) {
  const ParameterSet<Scalar> ad = autodiff_gradient(f, params);
  ParameterSet<Scalar> probe = params;
  double worst = 0.0;
  for (auto& [name, m] : probe) {
    const Mat<Scalar>& g = ad.at(name);
    for (Index i = 0; i < m.size(); ++i) {
      const Scalar orig = m.data()[i];
      m.data()[i] = orig + Scalar(eps);
      const double up = static_cast<double>(evaluate_loss(f, probe));
      m.data()[i] = orig - Scalar(eps);
      const double down = static_cast<double>(evaluate_loss(f, probe));
      m.data()[i] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double a = static_cast<double>(g.data()[i]);
      const double err = std::abs(a - fd) / std::max(floor, std::abs(a) + std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dce
