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

#include "capgen/objective.hpp"

#include <algorithm>
#include <string>

namespace capgen {

void NoiseConfig::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise.rate must lie in [0, 1]");
  if (!(beta >= 0.0)) throw ConfigError("noise.beta must be non-negative");
}

std::size_t Corruption::num_changed() const {
  return static_cast<std::size_t>(std::count(changed.begin(), changed.end(), true));
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<std::size_t>& targets,
                     std::size_t pad_id) {
  detail::require_rank("cross_entropy", logits.shape(), 2);
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " logit rows");
  }
  Index picks;
  for (std::size_t t = 0; t < rows; ++t) {
    if (targets[t] == pad_id) continue;
    if (targets[t] >= classes) {
      throw UsageError("cross_entropy: target " + std::to_string(targets[t]) + " outside " +
                       std::to_string(classes) + " classes");
    }
    picks.push_back(t * classes + targets[t]);
  }
  if (picks.empty()) throw UsageError("cross_entropy: every position is padding");
  const std::size_t count = picks.size();
  Var<T> picked = gather(log_softmax(logits, 1), std::move(picks), {count});
  return neg(mean(picked));
}

Corruption corrupt_targets(const std::vector<std::size_t>& tokens, const NoiseConfig& cfg,
                           std::size_t vocab_size, std::mt19937_64& rng) {
  cfg.validate();
  Corruption out{tokens, std::vector<bool>(tokens.size(), false)};
  // Two or more ordinary ids are needed to pick a different one.
  if (vocab_size < kNumSpecials + 2 || cfg.rate == 0.0) return out;
  std::bernoulli_distribution coin(cfg.rate);
  std::uniform_int_distribution<std::size_t> other(kNumSpecials, vocab_size - 2);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::size_t tok = tokens[i];
    if (tok < kNumSpecials) continue;
    if (!coin(rng)) continue;
    // Draw from the ordinary ids minus the original: skip over it.
    std::size_t r = other(rng);
    if (r >= tok) ++r;
    out.tokens[i] = r;
    out.changed[i] = true;
  }
  return out;
}

template <typename T>
LossBreakdown<T> combined_loss(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                               const std::vector<std::size_t>& tokens,
                               const std::vector<std::size_t>& corrupted, const NoiseConfig& cfg) {
  cfg.validate();
  if (corrupted.size() != tokens.size()) {
    throw UsageError("corrupted sequence length differs from the clean sequence");
  }
  const std::vector<std::size_t> targets(tokens.begin() + 1, tokens.end());
  LossBreakdown<T> out;
  out.main = cross_entropy(decoder.teacher_forced_forward(tokens, enc).logits, targets);
  if (!cfg.enabled) {
    out.fake = enc.features.tape().constant(Tensor<T>::scalar(T{0}));
    out.total = out.main;
    return out;
  }
  out.fake = cross_entropy(decoder.teacher_forced_forward(corrupted, enc).logits, targets);
  out.total = add(out.main, scale(out.fake, static_cast<T>(cfg.beta)));
  return out;
}

template <typename T>
LossBreakdown<T> combined_loss(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                               const std::vector<std::size_t>& tokens, const NoiseConfig& cfg,
                               std::mt19937_64& rng) {
  if (!cfg.enabled) return combined_loss(decoder, enc, tokens, tokens, cfg);
  Corruption c = corrupt_targets(tokens, cfg, decoder.config().vocab_size, rng);
  return combined_loss(decoder, enc, tokens, c.tokens, cfg);
}

#define CAPGEN_INSTANTIATE_OBJECTIVE(T)                                                      \
  template Var<T> cross_entropy<T>(const Var<T>&, const std::vector<std::size_t>&,           \
                                   std::size_t);                                             \
  template LossBreakdown<T> combined_loss<T>(const CaptionDecoder<T>&, const EncoderOutput<T>&, \
                                             const std::vector<std::size_t>&,                \
                                             const std::vector<std::size_t>&,                \
                                             const NoiseConfig&);                            \
  template LossBreakdown<T> combined_loss<T>(const CaptionDecoder<T>&, const EncoderOutput<T>&, \
                                             const std::vector<std::size_t>&,                \
                                             const NoiseConfig&, std::mt19937_64&);

CAPGEN_INSTANTIATE_OBJECTIVE(float)
CAPGEN_INSTANTIATE_OBJECTIVE(double)

}  // namespace capgen
