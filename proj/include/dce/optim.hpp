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

#include <cmath>
#include <string>

#include "dce/tensor.hpp"

namespace dce {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments are created on the first step and are
// shape-congruent with the parameters they track.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  long steps() const { return step_; }
  const ParameterSet<Scalar>& first_moments() const { return m_; }
  const ParameterSet<Scalar>& second_moments() const { return v_; }

  void step(ParameterSet<Scalar>& params, const ParameterSet<Scalar>& grads) {
    for (const auto& [name, g] : grads) {
      auto p = params.find(name);
      if (p == params.end()) throw ConfigError("adam: gradient for unknown parameter '" + name + "'");
      if (p->second.rows() != g.rows() || p->second.cols() != g.cols()) {
        throw ShapeError("adam: gradient shape mismatch for '" + name + "'");
      }
      if (!g.allFinite()) throw NumericError("adam: non-finite gradient for parameter '" + name + "'");
    }
    ++step_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (const auto& [name, g] : grads) {
      Mat<Scalar>& p = params.at(name);
      auto [mit, m_new] = m_.try_emplace(name, Mat<Scalar>::Zero(g.rows(), g.cols()));
      auto [vit, v_new] = v_.try_emplace(name, Mat<Scalar>::Zero(g.rows(), g.cols()));
      Mat<Scalar>& m = mit->second;
      Mat<Scalar>& v = vit->second;
      m = Scalar(b1) * m + Scalar(1.0 - b1) * g;
      v = Scalar(b2) * v + Scalar(1.0 - b2) * g.cwiseProduct(g);
      for (Index i = 0; i < p.size(); ++i) {
        const double mhat = static_cast<double>(m.data()[i]) / c1;
        const double vhat = static_cast<double>(v.data()[i]) / c2;
        p.data()[i] -= Scalar(options_.learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon));
      }
    }
  }

 private:
  AdamOptions options_;
  long step_ = 0;
  ParameterSet<Scalar> m_;
  ParameterSet<Scalar> v_;
};

}  // namespace dce
