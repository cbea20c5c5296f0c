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

// Dense row-major matrices on a reverse-mode differentiation tape.
//
// Every forward kernel in this file computes each output row from the
// corresponding input rows with a fixed, sequential accumulation order. Row
// results therefore do not depend on how many other rows share the matrix,
// which is what lets the streaming encoder reproduce offline outputs bit for
// bit. Keep it that way: no vectorised reductions, no Eigen packet math for
// transcendental functions, no GEMM in forward passes.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dce/errors.hpp"

namespace dce {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  const Mat<Scalar>& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape<Scalar>* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  Var<Scalar> constant(Mat<Scalar> value) {
    return push("constant", std::move(value), {}, false, nullptr);
  }

  // Differentiable leaf (a parameter). Only tracked when recording.
  Var<Scalar> leaf(Mat<Scalar> value) {
    return push("leaf", std::move(value), {}, recording_, nullptr);
  }

  // Records a primitive application. `fn` runs during backward with the
  // node's own id; it reads grad(self) and accumulates into its inputs.
  Var<Scalar> record(const char* op, Mat<Scalar> value,
                     std::initializer_list<Var<Scalar>> inputs, Backward fn) {
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const auto& v : inputs) ids.push_back(v.id());
    return record(op, std::move(value), std::move(ids), std::move(fn));
  }

  Var<Scalar> record(const char* op, Mat<Scalar> value, std::vector<int> inputs,
                     Backward fn) {
    bool rg = false;
    if (recording_) {
      for (int id : inputs) rg = rg || nodes_[id].requires_grad;
    }
    return push(op, std::move(value), std::move(inputs), rg, rg ? std::move(fn) : nullptr);
  }

  const Mat<Scalar>& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }

  // Gradient buffer of a node, zero-initialised on first touch.
  Mat<Scalar>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat<Scalar>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    if (!nodes_[id].requires_grad) return;
    grad(id) += g;
  }

  // Reverse sweep from a scalar loss. Each node is visited once, in reverse
  // recording order; nodes the loss does not depend on keep empty gradients.
  void backward(const Var<Scalar>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      std::ostringstream os;
      os << "backward: loss must be scalar, got [" << loss.rows() << "x" << loss.cols() << "]";
      throw ShapeError(os.str());
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[loss.id()].requires_grad) return;
    grad(loss.id()).setConstant(Scalar(1));
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, id);
    }
  }

  // Gradient after backward(); zeros if the node was never reached.
  Mat<Scalar> grad_of(const Var<Scalar>& v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.size() == 0) return Mat<Scalar>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

 private:
  struct Node {
    Mat<Scalar> value;
    Mat<Scalar> grad;
    std::vector<int> inputs;
    bool requires_grad = false;
    Backward backward;
  };

  Var<Scalar> push(const char* op, Mat<Scalar> value, std::vector<int> inputs, bool rg,
                   Backward fn) {
    if (!value.allFinite()) {
      throw NumericError(std::string(op) + ": produced non-finite values");
    }
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.requires_grad = rg;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  bool recording_;
  std::vector<Node> nodes_;
};

namespace detail {

inline std::string shape_str(Index r, Index c) {
  std::ostringstream os;
  os << "[" << r << "x" << c << "]";
  return os.str();
}

template <typename Scalar>
std::string shape_str(const Var<Scalar>& v) {
  return shape_str(v.rows(), v.cols());
}

[[noreturn]] inline void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": shape mismatch " + detail);
}

template <typename Scalar>
void same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_fail(op, shape_str(a) + " vs " + shape_str(b));
  }
}

// out = a * b with out.row(i) accumulated over k in order.
template <typename Scalar>
Mat<Scalar> rowwise_product(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  Mat<Scalar> out = Mat<Scalar>::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (Index k = 0; k < a.cols(); ++k) {
      const Scalar s = a(i, k);
      if (s != Scalar(0)) orow.noalias() += s * b.row(k);
    }
  }
  return out;
}

template <typename Scalar, typename F>
Mat<Scalar> map(const Mat<Scalar>& x, F f) {
  Mat<Scalar> y(x.rows(), x.cols());
  const Scalar* src = x.data();
  Scalar* dst = y.data();
  for (Index i = 0; i < x.size(); ++i) dst[i] = f(src[i]);
  return y;
}

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v))
                : std::exp(v) / (Scalar(1) + std::exp(v));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra and elementwise arithmetic.

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) {
    detail::shape_fail("matmul", detail::shape_str(a) + " x " + detail::shape_str(b));
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->record("matmul", detail::rowwise_product(a.value(), b.value()), {a, b},
                          [ia, ib](Tape<Scalar>& t, int self) {
                            const Mat<Scalar>& g = t.grad(self);
                            if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
                            if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
                          });
}

// a + b. `b` may also be a single row broadcast over the rows of `a`.
template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1 && a.cols() == b.cols();
  if (!broadcast) detail::same_shape("add", a, b);
  Mat<Scalar> out = a.value();
  if (broadcast) {
    for (Index i = 0; i < out.rows(); ++i) out.row(i) += b.value();
  } else {
    out += b.value();
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->record("add", std::move(out), {a, b},
                          [ia, ib, broadcast](Tape<Scalar>& t, int self) {
                            const Mat<Scalar>& g = t.grad(self);
                            t.accumulate(ia, g);
                            if (broadcast) {
                              t.accumulate(ib, g.colwise().sum());
                            } else {
                              t.accumulate(ib, g);
                            }
                          });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("sub", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape()->record("sub", a.value() - b.value(), {a, b},
                          [ia, ib](Tape<Scalar>& t, int self) {
                            const Mat<Scalar>& g = t.grad(self);
                            t.accumulate(ia, g);
                            t.accumulate(ib, -g);
                          });
}

// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("multiply", a, b);
  const int ia = a.id(), ib = b.id();
  Mat<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record("multiply", std::move(out), {a, b},
                          [ia, ib](Tape<Scalar>& t, int self) {
                            const Mat<Scalar>& g = t.grad(self);
                            if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                            if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                          });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const int ia = a.id();
  return a.tape()->record("scale", a.value() * s, {a}, [ia, s](Tape<Scalar>& t, int self) {
    t.accumulate(ia, t.grad(self) * s);
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const int ia = a.id();
  Mat<Scalar> out = a.value().transpose();
  return a.tape()->record("transpose", std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

// ---------------------------------------------------------------------------
// Activations.

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  const int ia = a.id();
  auto y = detail::map(a.value(), [](Scalar v) { return std::tanh(v); });
  return a.tape()->record("tanh", std::move(y), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& y = t.value(self);
    t.accumulate(ia, t.grad(self).cwiseProduct((Scalar(1) - y.array().square()).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  const int ia = a.id();
  auto y = detail::map(a.value(), [](Scalar v) { return detail::sigmoid(v); });
  return a.tape()->record("sigmoid", std::move(y), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& y = t.value(self);
    t.accumulate(ia, t.grad(self).cwiseProduct((y.array() * (Scalar(1) - y.array())).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  const int ia = a.id();
  auto y = detail::map(a.value(), [](Scalar v) { return v > 0 ? v : Scalar(0); });
  return a.tape()->record("relu", std::move(y), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& x = t.value(ia);
    t.accumulate(ia, t.grad(self).cwiseProduct(
                         (x.array() > Scalar(0)).template cast<Scalar>().matrix()));
  });
}

// x * sigmoid(x)
template <typename Scalar>
Var<Scalar> swish(const Var<Scalar>& a) {
  const int ia = a.id();
  auto y = detail::map(a.value(), [](Scalar v) { return v * detail::sigmoid(v); });
  return a.tape()->record("swish", std::move(y), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar> d = detail::map(t.value(ia), [](Scalar v) {
      const Scalar s = detail::sigmoid(v);
      return s * (Scalar(1) + v * (Scalar(1) - s));
    });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

// ---------------------------------------------------------------------------
// Row-wise normalisers.

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& a) {
  const Mat<Scalar>& x = a.value();
  Mat<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < x.cols(); ++j) m = std::max(m, x(i, j));
    Scalar s = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      y(i, j) = std::exp(x(i, j) - m);
      s += y(i, j);
    }
    for (Index j = 0; j < x.cols(); ++j) y(i, j) /= s;
  }
  const int ia = a.id();
  return a.tape()->record("softmax", std::move(y), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& y = t.value(self);
    const Mat<Scalar>& g = t.grad(self);
    Mat<Scalar> dx = y.cwiseProduct(g);
    for (Index i = 0; i < y.rows(); ++i) dx.row(i) -= dx.row(i).sum() * y.row(i);
    t.accumulate(ia, dx);
  });
}

template <typename Scalar>
Var<Scalar> log_softmax(const Var<Scalar>& a) {
  const Mat<Scalar>& x = a.value();
  Mat<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < x.cols(); ++j) m = std::max(m, x(i, j));
    Scalar s = 0;
    for (Index j = 0; j < x.cols(); ++j) s += std::exp(x(i, j) - m);
    const Scalar lse = m + std::log(s);
    for (Index j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) - lse;
  }
  const int ia = a.id();
  return a.tape()->record("log_softmax", std::move(y), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& y = t.value(self);
    const Mat<Scalar>& g = t.grad(self);
    Mat<Scalar> dx = g;
    for (Index i = 0; i < y.rows(); ++i) {
      const Scalar gs = g.row(i).sum();
      for (Index j = 0; j < y.cols(); ++j) dx(i, j) -= std::exp(y(i, j)) * gs;
    }
    t.accumulate(ia, dx);
  });
}

// Softmax over the entries where `mask` is true; masked entries are exactly 0.
template <typename Scalar>
Var<Scalar> masked_softmax(const Var<Scalar>& a, const Mask& mask) {
  const Mat<Scalar>& x = a.value();
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) {
    detail::shape_fail("masked_softmax",
                       detail::shape_str(a) + " vs mask " + detail::shape_str(mask.rows(), mask.cols()));
  }
  Mat<Scalar> y = Mat<Scalar>::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < x.cols(); ++j) {
      if (mask(i, j)) m = std::max(m, x(i, j));
    }
    if (m == -std::numeric_limits<Scalar>::infinity()) continue;
    Scalar s = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (!mask(i, j)) continue;
      y(i, j) = std::exp(x(i, j) - m);
      s += y(i, j);
    }
    for (Index j = 0; j < x.cols(); ++j) y(i, j) /= s;
  }
  const int ia = a.id();
  return a.tape()->record("masked_softmax", std::move(y), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& y = t.value(self);
    const Mat<Scalar>& g = t.grad(self);
    Mat<Scalar> dx = y.cwiseProduct(g);
    for (Index i = 0; i < y.rows(); ++i) dx.row(i) -= dx.row(i).sum() * y.row(i);
    t.accumulate(ia, dx);
  });
}

inline constexpr double kLayerNormEpsilon = 1e-6;

// Per-row normalisation with affine scale `gamma` and shift `beta` (1 x C).
// Epsilon is added to the variance, so a constant row maps to beta.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Scalar eps = Scalar(kLayerNormEpsilon)) {
  const Index C = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != C || beta.rows() != 1 || beta.cols() != C) {
    detail::shape_fail("layer_norm", detail::shape_str(x) + " with gamma " +
                                         detail::shape_str(gamma) + " beta " + detail::shape_str(beta));
  }
  const Mat<Scalar>& xv = x.value();
  Mat<Scalar> xhat(xv.rows(), C);
  std::vector<Scalar> inv(xv.rows());
  for (Index i = 0; i < xv.rows(); ++i) {
    Scalar mean = 0;
    for (Index j = 0; j < C; ++j) mean += xv(i, j);
    mean /= Scalar(C);
    Scalar var = 0;
    for (Index j = 0; j < C; ++j) {
      const Scalar d = xv(i, j) - mean;
      var += d * d;
    }
    var /= Scalar(C);
    inv[i] = Scalar(1) / std::sqrt(var + eps);
    for (Index j = 0; j < C; ++j) xhat(i, j) = (xv(i, j) - mean) * inv[i];
  }
  Mat<Scalar> y(xv.rows(), C);
  for (Index i = 0; i < xv.rows(); ++i) {
    for (Index j = 0; j < C; ++j) y(i, j) = xhat(i, j) * gamma.value()(0, j) + beta.value()(0, j);
  }
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->record(
      "layer_norm", std::move(y), {x, gamma, beta},
      [ix, ig, ib, xhat = std::move(xhat), inv = std::move(inv)](Tape<Scalar>& t, int self) {
        const Mat<Scalar>& g = t.grad(self);
        const Mat<Scalar>& gam = t.value(ig);
        if (t.requires_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
        if (t.requires_grad(ix)) {
          const Index C = g.cols();
          Mat<Scalar> dx(g.rows(), C);
          for (Index i = 0; i < g.rows(); ++i) {
            Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dxh = g.row(i).cwiseProduct(gam);
            const Scalar m1 = dxh.mean();
            const Scalar m2 = dxh.cwiseProduct(xhat.row(i)).mean();
            dx.row(i) = inv[i] * (dxh.array() - m1 - xhat.row(i).array() * m2).matrix();
          }
          t.accumulate(ix, dx);
        }
      });
}

// ---------------------------------------------------------------------------
// Sequence primitives.

// Depthwise 1-D convolution over rows: out[t] = b + sum_i w[i] * x[t - left_pad + i],
// with zeros outside [0, T). `w` is K x C, `b` is 1 x C.
template <typename Scalar>
Var<Scalar> depthwise_conv1d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b,
                             Index left_pad) {
  const Index T = x.rows(), C = x.cols(), K = w.rows();
  if (w.cols() != C || b.rows() != 1 || b.cols() != C || left_pad < 0 || left_pad >= K) {
    detail::shape_fail("depthwise_conv1d", detail::shape_str(x) + " kernel " + detail::shape_str(w) +
                                               " bias " + detail::shape_str(b));
  }
  const Mat<Scalar>& xv = x.value();
  const Mat<Scalar>& wv = w.value();
  Mat<Scalar> y = Mat<Scalar>::Zero(T, C);
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < K; ++i) {
      const Index src = t - left_pad + i;
      if (src < 0 || src >= T) continue;
      y.row(t) += wv.row(i).cwiseProduct(xv.row(src));
    }
    y.row(t) += b.value();
  }
  const int ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape()->record("depthwise_conv1d", std::move(y), {x, w, b},
                          [ix, iw, ib, left_pad](Tape<Scalar>& t, int self) {
                            const Mat<Scalar>& g = t.grad(self);
                            const Mat<Scalar>& xv = t.value(ix);
                            const Mat<Scalar>& wv = t.value(iw);
                            const Index T = g.rows(), K = wv.rows();
                            Mat<Scalar> dx = Mat<Scalar>::Zero(T, g.cols());
                            Mat<Scalar> dw = Mat<Scalar>::Zero(K, g.cols());
                            for (Index tt = 0; tt < T; ++tt) {
                              for (Index i = 0; i < K; ++i) {
                                const Index src = tt - left_pad + i;
                                if (src < 0 || src >= T) continue;
                                dx.row(src) += wv.row(i).cwiseProduct(g.row(tt));
                                dw.row(i) += xv.row(src).cwiseProduct(g.row(tt));
                              }
                            }
                            t.accumulate(ix, dx);
                            t.accumulate(iw, dw);
                            t.accumulate(ib, g.colwise().sum());
                          });
}

// Concatenation along rows (axis 0) or columns (axis 1).
template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Index rows = 0, cols = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    ids.push_back(p.id());
    if (axis == 0) {
      if (p.cols() != parts[0].cols()) {
        detail::shape_fail("concat", detail::shape_str(parts[0]) + " with " + detail::shape_str(p));
      }
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts[0].rows()) {
        detail::shape_fail("concat", detail::shape_str(parts[0]) + " with " + detail::shape_str(p));
      }
      cols += p.cols();
      rows = p.rows();
    }
  }
  Mat<Scalar> out(rows, cols);
  Index off = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      out.middleRows(off, p.rows()) = p.value();
      off += p.rows();
    } else {
      out.middleCols(off, p.cols()) = p.value();
      off += p.cols();
    }
  }
  return parts[0].tape()->record("concat", std::move(out), ids, [ids, axis](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& g = t.grad(self);
    Index off = 0;
    for (int id : ids) {
      const Mat<Scalar>& v = t.value(id);
      if (axis == 0) {
        t.accumulate(id, g.middleRows(off, v.rows()));
        off += v.rows();
      } else {
        t.accumulate(id, g.middleCols(off, v.cols()));
        off += v.cols();
      }
    }
  });
}

// Half-open range [begin, end) along an axis.
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& a, int axis, Index begin, Index end) {
  const Index extent = axis == 0 ? a.rows() : a.cols();
  if ((axis != 0 && axis != 1) || begin < 0 || end > extent || begin >= end) {
    std::ostringstream os;
    os << detail::shape_str(a) << " axis " << axis << " range [" << begin << "," << end << ")";
    detail::shape_fail("slice", os.str());
  }
  Mat<Scalar> out = axis == 0 ? Mat<Scalar>(a.value().middleRows(begin, end - begin))
                              : Mat<Scalar>(a.value().middleCols(begin, end - begin));
  const int ia = a.id();
  return a.tape()->record("slice", std::move(out), {a}, [ia, axis, begin](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& g = t.grad(self);
    if (!t.requires_grad(ia)) return;
    Mat<Scalar>& ga = t.grad(ia);
    if (axis == 0) {
      ga.middleRows(begin, g.rows()) += g;
    } else {
      ga.middleCols(begin, g.cols()) += g;
    }
  });
}

// Mean over rows (axis 0, result 1 x C) or columns (axis 1, result R x 1).
template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("mean: axis must be 0 or 1");
  const Mat<Scalar>& x = a.value();
  Mat<Scalar> out = axis == 0 ? Mat<Scalar>::Zero(1, x.cols()) : Mat<Scalar>::Zero(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (axis == 0) {
        out(0, j) += x(i, j);
      } else {
        out(i, 0) += x(i, j);
      }
    }
  }
  const Scalar n = Scalar(axis == 0 ? x.rows() : x.cols());
  out /= n;
  const int ia = a.id();
  return a.tape()->record("mean", std::move(out), {a}, [ia, axis, n](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& g = t.grad(self);
    const Mat<Scalar>& x = t.value(ia);
    Mat<Scalar> dx(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = 0; j < x.cols(); ++j) dx(i, j) = (axis == 0 ? g(0, j) : g(i, 0)) / n;
    }
    t.accumulate(ia, dx);
  });
}

// Sum of all elements as a 1 x 1 tensor.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const Mat<Scalar>& x = a.value();
  Scalar s = 0;
  for (Index i = 0; i < x.size(); ++i) s += x.data()[i];
  Mat<Scalar> out(1, 1);
  out(0, 0) = s;
  const int ia = a.id();
  return a.tape()->record("sum", std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    const Mat<Scalar>& x = t.value(ia);
    t.accumulate(ia, Mat<Scalar>::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

// out.row(i) = a.row(index[i]). Embedding lookup is gather_rows over a table.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, const std::vector<Index>& index) {
  Mat<Scalar> out(static_cast<Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) {
      std::ostringstream os;
      os << "row " << index[i] << " of " << detail::shape_str(a);
      detail::shape_fail("gather_rows", os.str());
    }
    out.row(static_cast<Index>(i)) = a.value().row(index[i]);
  }
  const int ia = a.id();
  return a.tape()->record("gather_rows", std::move(out), {a}, [ia, index](Tape<Scalar>& t, int self) {
    if (!t.requires_grad(ia)) return;
    const Mat<Scalar>& g = t.grad(self);
    Mat<Scalar>& ga = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Index>(i));
  });
}

template <typename Scalar>
Var<Scalar> embedding(const Var<Scalar>& table, const std::vector<Index>& ids) {
  return gather_rows(table, ids);
}

// ---------------------------------------------------------------------------
// Named parameters and their binding to a tape.

template <typename Scalar>
using ParameterSet = std::map<std::string, Mat<Scalar>>;

template <typename Scalar>
Index numel(const ParameterSet<Scalar>& params) {
  Index n = 0;
  for (const auto& [name, m] : params) n += m.size();
  return n;
}

template <typename To, typename From>
ParameterSet<To> cast_parameters(const ParameterSet<From>& params) {
  ParameterSet<To> out;
  for (const auto& [name, m] : params) out.emplace(name, m.template cast<To>());
  return out;
}

// Lazily exposes parameters as tape leaves; a parameter that is never looked
// up never enters the tape and therefore receives a zero gradient.
template <typename Scalar>
class Binder {
 public:
  Binder(const ParameterSet<Scalar>& params, Tape<Scalar>& tape) : params_(&params), tape_(&tape) {}

  Var<Scalar> operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    auto p = params_->find(name);
    if (p == params_->end()) throw ConfigError("missing parameter '" + name + "'");
    Var<Scalar> v = tape_->leaf(p->second);
    bound_.emplace(name, v);
    return v;
  }

  bool has(const std::string& name) const { return params_->count(name) != 0; }
  Tape<Scalar>& tape() { return *tape_; }
  const ParameterSet<Scalar>& parameters() const { return *params_; }
  const std::map<std::string, Var<Scalar>>& bound() const { return bound_; }

  Var<Scalar> constant(Mat<Scalar> m) { return tape_->constant(std::move(m)); }

  // Gradients for every parameter after tape().backward(); zeros when unbound.
  ParameterSet<Scalar> gradients() const {
    ParameterSet<Scalar> out;
    for (const auto& [name, m] : *params_) {
      auto it = bound_.find(name);
      out.emplace(name, it == bound_.end() ? Mat<Scalar>::Zero(m.rows(), m.cols()).eval()
                                           : tape_->grad_of(it->second));
    }
    return out;
  }

 private:
  const ParameterSet<Scalar>* params_;
  Tape<Scalar>* tape_;
  std::map<std::string, Var<Scalar>> bound_;
};

// x W + b with parameters `<prefix>.w` (in x out) and `<prefix>.b` (1 x out).
template <typename Scalar>
Var<Scalar> linear(Binder<Scalar>& p, const std::string& prefix, const Var<Scalar>& x) {
  return add(matmul(x, p(prefix + ".w")), p(prefix + ".b"));
}

template <typename Scalar>
Var<Scalar> layer_norm(Binder<Scalar>& p, const std::string& prefix, const Var<Scalar>& x) {
  return layer_norm(x, p(prefix + ".g"), p(prefix + ".b"));
}

}  // namespace dce
