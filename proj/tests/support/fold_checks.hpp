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

#include <algorithm>
#include <string>
#include <vector>

#include "capgen/data.hpp"

namespace capgen::testing {

/// Empty when the split is disjoint, covers 0..n-1 and is balanced within 1.
inline std::string fold_violation(const FoldSplit& split, std::size_t n, std::size_t k) {
  if (split.k() != k) return "wrong fold count";
  std::vector<int> seen(n, 0);
  std::size_t lo = n, hi = 0;
  for (const auto& f : split.folds) {
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
    for (auto i : f) {
      if (i >= n) return "index out of range";
      if (seen[i]++) return "index " + std::to_string(i) + " in two folds";
    }
  }
  if (std::count(seen.begin(), seen.end(), 0)) return "not covering";
  if (hi - lo > 1) return "unbalanced";
  for (std::size_t f = 0; f < k; ++f) {
    const auto train = split.train_indices(f);
    if (train.size() + split.folds[f].size() != n) return "train/held-out sizes disagree";
    for (auto i : split.folds[f]) {
      if (std::binary_search(train.begin(), train.end(), i)) return "held-out index in training";
    }
  }
  return {};
}

}  // namespace capgen::testing
