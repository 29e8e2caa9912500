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

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "capgen/errors.hpp"

namespace capgen {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<Tokens, std::size_t>;

/// Every contiguous length-n subsequence with its multiplicity.
NgramCounts ngram_counts(const Tokens& tokens, std::size_t n);

enum class Smoothing {
  none,    // competition-style corpus BLEU
  add_one  // (matches + 1) / (total + 1) for every order
};

struct BleuReport {
  double bleu4 = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  /// {"bleu4": .., "p": [p1, p2, p3, p4], "bp": .., "hyp_len": .., "ref_len": ..}
  std::string to_json() const;
  static BleuReport from_json(const std::string& text);
};

/// Corpus BLEU with one reference per hypothesis: clipped n-gram precisions
/// pooled over the corpus (n = 1..4), uniform weights, brevity penalty
/// exp(1 - r/c) when c <= r (0 for an empty hypothesis corpus).
BleuReport bleu4(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                 Smoothing smoothing = Smoothing::none);

}  // namespace capgen
