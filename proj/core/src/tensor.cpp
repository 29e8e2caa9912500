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

#include "capgen/tensor.hpp"

#include <numeric>

#include "capgen/ops.hpp"

namespace capgen {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Index permute_index(const Shape& shape, const std::vector<std::size_t>& axes, Shape* out_shape) {
  const std::size_t rank = shape.size();
  if (axes.size() != rank) throw DimensionError("permute: axes do not match rank");
  std::vector<bool> seen(rank, false);
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (axes[i] >= rank || seen[axes[i]]) throw DimensionError("permute: invalid axis list");
    seen[axes[i]] = true;
    out[i] = shape[axes[i]];
  }
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * shape[i];

  const std::size_t n = shape_numel(shape);
  Index index(n);
  std::vector<std::size_t> coord(rank, 0);  // coordinate in the output
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += coord[i] * in_stride[axes[i]];
    index[flat] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++coord[i] < out[i]) break;
      coord[i] = 0;
    }
  }
  if (out_shape) *out_shape = std::move(out);
  return index;
}

}  // namespace capgen
