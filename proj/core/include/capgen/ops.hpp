/*
 * Copyright 2026 The capgen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Differentiable operations over Tape-recorded values. Every op validates its
// operand shapes, computes the forward value eagerly and records the rule
// that propagates the output gradient back to its inputs.
//
// There is no implicit broadcasting: operands of binary ops have identical
// shapes, and row-wise bias terms go through repeat_rows().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <vector>

#include "capgen/autodiff.hpp"

namespace capgen {

using Index = std::vector<std::size_t>;

namespace detail {

template <typename T>
Tape<T>& common_tape(const Var<T>& a, const Var<T>& b) {
  if (&a.tape() != &b.tape()) throw UsageError("operands live on different tapes");
  return a.tape();
}

inline void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

inline void require_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(s));
  }
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(s));
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const char* op, const Var<T>& x, Fwd fwd, Deriv deriv) {
  Tape<T>& tape = x.tape();
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xi = x.id();
  return tape.record(op, std::move(out), {xi}, [xi, deriv](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(Var<T>(&t, self));
    const Tensor<T>& xv = t.value(xi);
    const Tensor<T>& yv = t.value(self);
    Tensor<T>& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

// C[m×n] += A[m×k] · B[k×n], with optional transposes of the stored operands.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
              bool trans_a, bool trans_b) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == T{0}) continue;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      } else {
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::common_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor<T> out({m, n});
  detail::gemm_acc(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n,
                   false, false);
  const std::size_t ai = a.id(), bi = b.id();
  return tape.record("matmul", std::move(out), {ai, bi},
                     [ai, bi, m, k, n](Tape<T>& t, std::size_t self) {
                       const T* g = t.grad(Var<T>(&t, self)).data().data();
                       if (t.requires_grad(ai)) {
                         // dA = G · Bᵀ
                         detail::gemm_acc(g, t.value(bi).data().data(),
                                          t.grad_buffer(ai).data().data(), m, n, k, false, true);
                       }
                       if (t.requires_grad(bi)) {
                         // dB = Aᵀ · G
                         detail::gemm_acc(t.value(ai).data().data(), g,
                                          t.grad_buffer(bi).data().data(), k, m, n, true, false);
                       }
                     });
}

/// Batched product of [B×m×k] and [B×k×n].
template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::common_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[1]) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::size_t batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
  Tensor<T> out({batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    detail::gemm_acc(a.value().data().data() + i * m * k, b.value().data().data() + i * k * n,
                     out.data().data() + i * m * n, m, k, n, false, false);
  }
  const std::size_t ai = a.id(), bi = b.id();
  return tape.record(
      "bmm", std::move(out), {ai, bi}, [ai, bi, batch, m, k, n](Tape<T>& t, std::size_t self) {
        const T* g = t.grad(Var<T>(&t, self)).data().data();
        for (std::size_t i = 0; i < batch; ++i) {
          if (t.requires_grad(ai)) {
            detail::gemm_acc(g + i * m * n, t.value(bi).data().data() + i * k * n,
                             t.grad_buffer(ai).data().data() + i * m * k, m, n, k, false, true);
          }
          if (t.requires_grad(bi)) {
            detail::gemm_acc(t.value(ai).data().data() + i * m * k, g + i * m * n,
                             t.grad_buffer(bi).data().data() + i * k * n, k, m, n, true, false);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Element-wise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::common_tape(a, b);
  detail::require_same_shape("add", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return tape.record("add", std::move(out), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(Var<T>(&t, self));
    for (std::size_t id : {ai, bi}) {
      if (!t.requires_grad(id)) continue;
      Tensor<T>& gx = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::common_tape(a, b);
  detail::require_same_shape("sub", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return tape.record("sub", std::move(out), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(Var<T>(&t, self));
    if (t.requires_grad(ai)) {
      Tensor<T>& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      Tensor<T>& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::common_tape(a, b);
  detail::require_same_shape("mul", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return tape.record("mul", std::move(out), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(Var<T>(&t, self));
    if (t.requires_grad(ai)) {
      const Tensor<T>& bv = t.value(bi);
      Tensor<T>& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      const Tensor<T>& av = t.value(ai);
      Tensor<T>& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

/// x · s for a scalar constant s.
template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  return detail::unary<T>(
      "scale", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

/// x + s for a scalar constant s.
template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return detail::unary<T>(
      "add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
  return scale(x, T{-1});
}

// ---------------------------------------------------------------------------
// Non-linearities
// ---------------------------------------------------------------------------

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  return detail::unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  for (T v : x.value().data()) {
    if (!(v > T{0})) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return detail::unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

/// GELU, tanh approximation.
template <typename T>
Var<T> gelu(const Var<T>& x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T a = static_cast<T>(0.044715);
  return detail::unary<T>(
      "gelu", x,
      [=](T v) { return T{0.5} * v * (T{1} + std::tanh(c * (v + a * v * v * v))); },
      [=](T v, T) {
        const T th = std::tanh(c * (v + a * v * v * v));
        return T{0.5} * (T{1} + th) +
               T{0.5} * v * (T{1} - th * th) * c * (T{1} + T{3} * a * v * v);
      });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s{0};
  for (T v : x.value().data()) s += v;
  const std::size_t xi = x.id();
  return x.tape().record("sum", Tensor<T>::scalar(s), {xi}, [xi](Tape<T>& t, std::size_t self) {
    const T g = t.grad(Var<T>(&t, self))[0];
    Tensor<T>& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.size()));
}

/// Column means of a [m×n] matrix, shape [1×n].
template <typename T>
Var<T> mean_rows(const Var<T>& x) {
  detail::require_rank("mean_rows", x.shape(), 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor<T> out({1, n});
  const auto& xv = x.value();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[c] += xv[r * n + c];
  const T inv = T{1} / static_cast<T>(m);
  for (auto& v : out.data()) v *= inv;
  const std::size_t xi = x.id();
  return x.tape().record("mean_rows", std::move(out), {xi},
                         [xi, m, n, inv](Tape<T>& t, std::size_t self) {
                           const Tensor<T>& g = t.grad(Var<T>(&t, self));
                           Tensor<T>& gx = t.grad_buffer(xi);
                           for (std::size_t r = 0; r < m; ++r)
                             for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += g[c] * inv;
                         });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  const std::size_t xi = x.id();
  return x.tape().record("reshape", std::move(out), {xi}, [xi](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(Var<T>(&t, self));
    Tensor<T>& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

/// Tiles a tensor holding n values into an [m×n] matrix, one copy per row.
template <typename T>
Var<T> repeat_rows(const Var<T>& x, std::size_t m) {
  if (m == 0) throw DimensionError("repeat_rows: zero repetitions");
  const std::size_t n = x.size();
  Tensor<T> out({m, n});
  const auto& xv = x.value();
  for (std::size_t r = 0; r < m; ++r) std::copy(xv.vec().begin(), xv.vec().end(), &out[r * n]);
  const std::size_t xi = x.id();
  return x.tape().record("repeat_rows", std::move(out), {xi},
                         [xi, m, n](Tape<T>& t, std::size_t self) {
                           const Tensor<T>& g = t.grad(Var<T>(&t, self));
                           Tensor<T>& gx = t.grad_buffer(xi);
                           for (std::size_t r = 0; r < m; ++r)
                             for (std::size_t c = 0; c < n; ++c) gx[c] += g[r * n + c];
                         });
}

/// out[i] = x[index[i]] reshaped to `shape`. Indices may repeat; the gradient
/// scatter-adds. All permutations and tilings in the model go through here.
template <typename T>
Var<T> gather(const Var<T>& x, std::shared_ptr<const Index> index, Shape shape) {
  if (shape_numel(shape) != index->size()) {
    throw DimensionError("gather: index length " + std::to_string(index->size()) +
                         " does not match output shape " + shape_str(shape));
  }
  const auto& xv = x.value();
  Tensor<T> out(std::move(shape));
  for (std::size_t i = 0; i < index->size(); ++i) {
    const std::size_t src = (*index)[i];
    if (src >= xv.size()) throw DimensionError("gather: index out of range");
    out[i] = xv[src];
  }
  const std::size_t xi = x.id();
  return x.tape().record("gather", std::move(out), {xi}, [xi, index](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(Var<T>(&t, self));
    Tensor<T>& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < index->size(); ++i) gx[(*index)[i]] += g[i];
  });
}

template <typename T>
Var<T> gather(const Var<T>& x, Index index, Shape shape) {
  return gather(x, std::make_shared<const Index>(std::move(index)), std::move(shape));
}

/// Index map for a general axis permutation of a tensor with shape `shape`.
Index permute_index(const Shape& shape, const std::vector<std::size_t>& axes, Shape* out_shape);

template <typename T>
Var<T> permute(const Var<T>& x, const std::vector<std::size_t>& axes) {
  Shape out_shape;
  Index idx = permute_index(x.shape(), axes, &out_shape);
  return gather(x, std::move(idx), std::move(out_shape));
}

template <typename T>
Var<T> transpose(const Var<T>& x) {
  detail::require_rank("transpose", x.shape(), 2);
  return permute(x, {1, 0});
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat of zero tensors");
  Tape<T>& tape = parts.front().tape();
  Shape out_shape = parts.front().shape();
  if (axis >= out_shape.size()) throw DimensionError("concat: axis out of range");
  out_shape[axis] = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (&p.tape() != &tape) throw UsageError("operands live on different tapes");
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != out_shape[d]) {
        throw DimensionError("concat: shape mismatch " + shape_str(parts.front().shape()) +
                             " vs " + shape_str(s));
      }
    }
    offsets.push_back(out_shape[axis]);
    out_shape[axis] += s[axis];
  }
  const auto split = detail::split_axis(out_shape, axis);
  Tensor<T> out(out_shape);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value();
    const std::size_t ext = pv.dim(axis);
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(&pv[o * ext * split.inner], ext * split.inner,
                  &out[(o * split.extent + offsets[k]) * split.inner]);
    }
    ids.push_back(parts[k].id());
    extents.push_back(ext);
  }
  return tape.record("concat", std::move(out), ids,
                     [ids, extents, offsets, split](Tape<T>& t, std::size_t self) {
                       const Tensor<T>& g = t.grad(Var<T>(&t, self));
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!t.requires_grad(ids[k])) continue;
                         Tensor<T>& gx = t.grad_buffer(ids[k]);
                         const std::size_t ext = extents[k];
                         for (std::size_t o = 0; o < split.outer; ++o) {
                           const T* src = &g[(o * split.extent + offsets[k]) * split.inner];
                           T* dst = &gx[o * ext * split.inner];
                           for (std::size_t i = 0; i < ext * split.inner; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

/// Half-open range [begin, end) along `axis`.
template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto split = detail::split_axis(x.shape(), axis);
  if (begin >= end || end > split.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for shape " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  Tensor<T> out(out_shape);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(&xv[(o * split.extent + begin) * split.inner], len * split.inner,
                &out[o * len * split.inner]);
  }
  const std::size_t xi = x.id();
  return x.tape().record("slice", std::move(out), {xi},
                         [xi, split, begin, len](Tape<T>& t, std::size_t self) {
                           const Tensor<T>& g = t.grad(Var<T>(&t, self));
                           Tensor<T>& gx = t.grad_buffer(xi);
                           for (std::size_t o = 0; o < split.outer; ++o) {
                             const T* src = &g[o * len * split.inner];
                             T* dst = &gx[(o * split.extent + begin) * split.inner];
                             for (std::size_t i = 0; i < len * split.inner; ++i) dst[i] += src[i];
                           }
                         });
}

/// Rows of `table` selected by `ids`, shape [ids.size() × E].
template <typename T>
Var<T> embedding(const Var<T>& table, const std::vector<std::size_t>& ids) {
  detail::require_rank("embedding", table.shape(), 2);
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  if (ids.empty()) throw UsageError("embedding lookup with no ids");
  Tensor<T> out({ids.size(), width});
  const auto& tv = table.value();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= vocab) {
      throw UsageError("embedding id " + std::to_string(ids[r]) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(&tv[ids[r] * width], width, &out[r * width]);
  }
  const std::size_t ti = table.id();
  return table.tape().record("embedding", std::move(out), {ti},
                             [ti, ids, width](Tape<T>& t, std::size_t self) {
                               const Tensor<T>& g = t.grad(Var<T>(&t, self));
                               Tensor<T>& gt = t.grad_buffer(ti);
                               for (std::size_t r = 0; r < ids.size(); ++r)
                                 for (std::size_t c = 0; c < width; ++c)
                                   gt[ids[r] * width + c] += g[r * width + c];
                             });
}

// ---------------------------------------------------------------------------
// Normalizations
// ---------------------------------------------------------------------------

template <typename T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  const auto s = detail::split_axis(x.shape(), axis);
  const auto& xv = x.value();
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T mx = xv[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
      T total{0};
      for (std::size_t e = 0; e < s.extent; ++e) {
        const T v = std::exp(xv[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  const std::size_t xi = x.id();
  return x.tape().record("softmax", std::move(out), {xi}, [xi, s](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(Var<T>(&t, self));
    const Tensor<T>& y = t.value(self);
    Tensor<T>& gx = t.grad_buffer(xi);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        T dot{0};
        for (std::size_t e = 0; e < s.extent; ++e) {
          dot += g[base + e * s.inner] * y[base + e * s.inner];
        }
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t i = base + e * s.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> log_softmax(const Var<T>& x, std::size_t axis) {
  const auto s = detail::split_axis(x.shape(), axis);
  const auto& xv = x.value();
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T mx = xv[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
      T total{0};
      for (std::size_t e = 0; e < s.extent; ++e) total += std::exp(xv[base + e * s.inner] - mx);
      const T lse = mx + std::log(total);
      for (std::size_t e = 0; e < s.extent; ++e) {
        out[base + e * s.inner] = xv[base + e * s.inner] - lse;
      }
    }
  }
  const std::size_t xi = x.id();
  return x.tape().record(
      "log_softmax", std::move(out), {xi}, [xi, s](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(Var<T>(&t, self));
        const Tensor<T>& y = t.value(self);
        Tensor<T>& gx = t.grad_buffer(xi);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            T gsum{0};
            for (std::size_t e = 0; e < s.extent; ++e) gsum += g[base + e * s.inner];
            for (std::size_t e = 0; e < s.extent; ++e) {
              const std::size_t i = base + e * s.inner;
              gx[i] += g[i] - std::exp(y[i]) * gsum;
            }
          }
        }
      });
}

/// Row-wise layer normalization of [m×n] with per-column gain and shift (n values each).
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  Tape<T>& tape = detail::common_tape(x, gamma);
  detail::common_tape(x, beta);
  detail::require_rank("layer_norm", x.shape(), 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gamma.size() != n || beta.size() != n) {
    throw DimensionError("layer_norm: gain/shift of shape " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " for input " + shape_str(x.shape()));
  }
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  Tensor<T> out({m, n});
  auto stats = std::make_shared<std::vector<T>>(2 * m);  // (mean, rstd) per row
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = &xv[r * n];
    T mu{0};
    for (std::size_t c = 0; c < n; ++c) mu += row[c];
    mu /= static_cast<T>(n);
    T var{0};
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(n);
    const T rstd = T{1} / std::sqrt(var + eps);
    (*stats)[2 * r] = mu;
    (*stats)[2 * r + 1] = rstd;
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = (row[c] - mu) * rstd * gv[c] + bv[c];
  }
  const std::size_t xi = x.id(), gi = gamma.id(), bi = beta.id();
  return tape.record(
      "layer_norm", std::move(out), {xi, gi, bi},
      [xi, gi, bi, m, n, stats](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(Var<T>(&t, self));
        const Tensor<T>& xv = t.value(xi);
        const Tensor<T>& gv = t.value(gi);
        std::vector<T> xhat(n), dy(n);
        for (std::size_t r = 0; r < m; ++r) {
          const T mu = (*stats)[2 * r], rstd = (*stats)[2 * r + 1];
          T mean_dy{0}, mean_dy_xhat{0};
          for (std::size_t c = 0; c < n; ++c) {
            xhat[c] = (xv[r * n + c] - mu) * rstd;
            dy[c] = g[r * n + c] * gv[c];
            mean_dy += dy[c];
            mean_dy_xhat += dy[c] * xhat[c];
          }
          mean_dy /= static_cast<T>(n);
          mean_dy_xhat /= static_cast<T>(n);
          if (t.requires_grad(xi)) {
            Tensor<T>& gx = t.grad_buffer(xi);
            for (std::size_t c = 0; c < n; ++c) {
              gx[r * n + c] += rstd * (dy[c] - mean_dy - xhat[c] * mean_dy_xhat);
            }
          }
          if (t.requires_grad(gi)) {
            Tensor<T>& gg = t.grad_buffer(gi);
            for (std::size_t c = 0; c < n; ++c) gg[c] += g[r * n + c] * xhat[c];
          }
          if (t.requires_grad(bi)) {
            Tensor<T>& gb = t.grad_buffer(bi);
            for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
          }
        }
      });
}

/// x·W + b for x [m×in], W [in×out], b holding `out` values.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  return add(matmul(x, weight), repeat_rows(bias, x.dim(0)));
}

}  // namespace capgen
