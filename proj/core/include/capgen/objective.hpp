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

// Training objective: token cross-entropy on the clean teacher-forced pass
// plus a β-weighted cross-entropy on a pass whose input tokens were randomly
// corrupted. Both terms score predictions against the clean targets.

#include <cstddef>
#include <random>
#include <vector>

#include "capgen/decoder.hpp"

namespace capgen {

struct NoiseConfig {
  double beta = 0.1;
  double rate = 0.1;  // per-position corruption probability
  bool enabled = true;

  void validate() const;

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

template <typename T>
struct LossBreakdown {
  Var<T> main;
  Var<T> fake;
  Var<T> total;

  double main_value() const { return static_cast<double>(main.value().item()); }
  double fake_value() const { return static_cast<double>(fake.value().item()); }
  double total_value() const { return static_cast<double>(total.value().item()); }
};

/// Mean over non-pad positions of -log softmax(logits[t])[targets[t]].
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<std::size_t>& targets,
                     std::size_t pad_id = kPadId);

struct Corruption {
  std::vector<std::size_t> tokens;
  std::vector<bool> changed;  // one flag per position

  std::size_t num_changed() const;
};

/// Replaces each non-special position with probability `rate` by a uniformly
/// drawn non-special id different from the original. Special ids are kept.
Corruption corrupt_targets(const std::vector<std::size_t>& tokens, const NoiseConfig& cfg,
                           std::size_t vocab_size, std::mt19937_64& rng);

/// Clean plus corrupted pass with an explicit corrupted sequence.
template <typename T>
LossBreakdown<T> combined_loss(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                               const std::vector<std::size_t>& tokens,
                               const std::vector<std::size_t>& corrupted, const NoiseConfig& cfg);

/// Draws the corruption from `rng`; disabled noise skips the second pass.
template <typename T>
LossBreakdown<T> combined_loss(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                               const std::vector<std::size_t>& tokens, const NoiseConfig& cfg,
                               std::mt19937_64& rng);

}  // namespace capgen
