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

#include <string>
#include <vector>

#include "dce/tensor.hpp"

namespace dce {

enum class Init { kGlorotUniform, kZeros, kOnes };

// Name, shape and initialiser of one parameter tensor.
struct TensorSpec {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Init init = Init::kGlorotUniform;

  Index size() const { return rows * cols; }
};

using TensorLayout = std::vector<TensorSpec>;

inline void add_linear(TensorLayout& out, const std::string& prefix, Index in, Index outdim,
                       bool bias = true) {
  out.push_back({prefix + ".w", in, outdim, Init::kGlorotUniform});
  if (bias) out.push_back({prefix + ".b", 1, outdim, Init::kZeros});
}

inline void add_norm(TensorLayout& out, const std::string& prefix, Index dim) {
  out.push_back({prefix + ".g", 1, dim, Init::kOnes});
  out.push_back({prefix + ".b", 1, dim, Init::kZeros});
}

inline Index layout_size(const TensorLayout& layout) {
  Index n = 0;
  for (const auto& t : layout) n += t.size();
  return n;
}

}  // namespace dce
