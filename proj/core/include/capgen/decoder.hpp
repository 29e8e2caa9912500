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

// Attention LSTM caption decoder. At every step the previous hidden state
// queries the encoder grid with an unscaled dot product; the attended vector
// feeds both the LSTM input (next to the token embedding) and the output
// projection.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "capgen/encoder.hpp"
#include "capgen/ops.hpp"
#include "capgen/params.hpp"

namespace capgen {

/// Reserved token ids shared by the vocabulary, decoder and search.
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kStartId = 1;
inline constexpr std::size_t kEndId = 2;
inline constexpr std::size_t kUnkId = 3;
inline constexpr std::size_t kNumSpecials = 4;

struct DecoderConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t enc_dim = 0;
  std::size_t num_layers = 1;

  void validate() const;

  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

/// Per-layer LSTM memory plus the attention weights of the step that produced it.
/// h.back() is the top-layer hidden state that queries the encoder.
template <typename T>
struct DecoderState {
  std::vector<Var<T>> h;  // each [1×hidden]
  std::vector<Var<T>> c;
  std::optional<Var<T>> alpha;  // [L]

  const Var<T>& top() const { return h.back(); }
};

template <typename T>
struct AttentionOutput {
  Var<T> attended;  // [1×D]
  Var<T> alpha;     // [L]
};

/// Late-fusion attention: α = softmax(features · query), attended = αᵀ · features.
/// `projection` ([hidden×D]) maps the hidden state to the feature width when they differ.
template <typename T>
AttentionOutput<T> attend(const Var<T>& hidden, const EncoderOutput<T>& enc,
                          const std::optional<Var<T>>& projection);

/// One LSTM cell update. Gate columns of `weight` ([(in+H)×4H]) are ordered i, f, g, o.
template <typename T>
std::pair<Var<T>, Var<T>> lstm_step(const Var<T>& x, const Var<T>& h, const Var<T>& c,
                                    const Var<T>& weight, const Var<T>& bias);

template <typename T>
struct StepOutput {
  Var<T> logits;  // [N]
  DecoderState<T> state;
};

template <typename T>
struct TeacherForcedOutput {
  Var<T> logits;  // [(T-1)×N]
  Var<T> alphas;  // [(T-1)×L]
};

template <typename T>
class CaptionDecoder {
 public:
  /// Registers all decoder parameters (group "decoder") in `store`.
  CaptionDecoder(DecoderConfig config, ParameterStore<T>& store, std::uint64_t seed);

  const DecoderConfig& config() const { return config_; }

  /// h = tanh(W_h · mean(features) + b_h), likewise for c, per layer.
  DecoderState<T> init_state(const EncoderOutput<T>& enc) const;

  AttentionOutput<T> attend(const Var<T>& hidden, const EncoderOutput<T>& enc) const;

  StepOutput<T> decode_step(std::size_t token, const DecoderState<T>& state,
                            const EncoderOutput<T>& enc) const;

  /// Step t consumes tokens[t] and predicts tokens[t+1].
  TeacherForcedOutput<T> teacher_forced_forward(const std::vector<std::size_t>& tokens,
                                                const EncoderOutput<T>& enc) const;

 private:
  struct Layer {
    Parameter<T>* init_h_weight;
    Parameter<T>* init_h_bias;
    Parameter<T>* init_c_weight;
    Parameter<T>* init_c_bias;
    Parameter<T>* weight;
    Parameter<T>* bias;
  };

  DecoderConfig config_;
  Parameter<T>* embed_;
  Parameter<T>* att_proj_ = nullptr;
  Parameter<T>* out_weight_;
  Parameter<T>* out_bias_;
  std::vector<Layer> layers_;
};

}  // namespace capgen
