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

#include "capgen/decoder.hpp"

#include <string>

namespace capgen {

void DecoderConfig::validate() const {
  if (vocab_size < kNumSpecials) {
    throw ConfigError("decoder config: vocab_size " + std::to_string(vocab_size) +
                      " is smaller than the " + std::to_string(kNumSpecials) + " special tokens");
  }
  if (embed_dim == 0 || hidden_dim == 0 || enc_dim == 0 || num_layers == 0) {
    throw ConfigError("decoder config: extents must be positive");
  }
}

template <typename T>
AttentionOutput<T> attend(const Var<T>& hidden, const EncoderOutput<T>& enc,
                          const std::optional<Var<T>>& projection) {
  if (!enc.features.valid() || enc.locations() == 0) {
    throw UsageError("attend: encoder output has no locations");
  }
  const std::size_t locations = enc.features.dim(0);
  Var<T> query = projection ? matmul(hidden, *projection) : hidden;  // [1×D]
  if (query.shape() != Shape{1, enc.features.dim(1)}) {
    throw DimensionError("attend: query " + shape_str(query.shape()) +
                         " does not match encoder features " + shape_str(enc.features.shape()));
  }
  Var<T> scores = reshape(matmul(enc.features, transpose(query)), {locations});
  Var<T> alpha = softmax(scores, 0);
  Var<T> attended = matmul(reshape(alpha, {1, locations}), enc.features);
  return {attended, alpha};
}

template <typename T>
std::pair<Var<T>, Var<T>> lstm_step(const Var<T>& x, const Var<T>& h, const Var<T>& c,
                                    const Var<T>& weight, const Var<T>& bias) {
  const std::size_t hidden = h.dim(1);
  if (weight.shape() != Shape{x.dim(1) + hidden, 4 * hidden}) {
    throw DimensionError("lstm_step: weight " + shape_str(weight.shape()) + " for input " +
                         shape_str(x.shape()) + " and hidden " + shape_str(h.shape()));
  }
  Var<T> z = linear(concat<T>({x, h}, 1), weight, bias);
  Var<T> in_gate = sigmoid(slice(z, 1, 0, hidden));
  Var<T> forget_gate = sigmoid(slice(z, 1, hidden, 2 * hidden));
  Var<T> candidate = tanh(slice(z, 1, 2 * hidden, 3 * hidden));
  Var<T> out_gate = sigmoid(slice(z, 1, 3 * hidden, 4 * hidden));
  Var<T> c_next = add(mul(forget_gate, c), mul(in_gate, candidate));
  Var<T> h_next = mul(out_gate, tanh(c_next));
  return {h_next, c_next};
}

template <typename T>
CaptionDecoder<T>::CaptionDecoder(DecoderConfig config, ParameterStore<T>& store,
                                  std::uint64_t seed)
    : config_(config) {
  config_.validate();
  const std::string group = "decoder";
  const std::size_t n = config_.vocab_size, e = config_.embed_dim, h = config_.hidden_dim,
                    d = config_.enc_dim;
  embed_ = &store.add_uniform("decoder.embed", group, {n, e}, 1.0, seed);
  if (h != d) {
    att_proj_ = &store.add_uniform("decoder.att_proj.weight", group, {h, d}, fan_in_bound(h), seed);
  }
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "decoder.layer" + std::to_string(l) + ".";
    const std::size_t in = (l == 0) ? e + d : h;
    Layer layer;
    layer.init_h_weight = &store.add_uniform(p + "init_h.weight", group, {d, h}, fan_in_bound(d), seed);
    layer.init_h_bias = &store.add_uniform(p + "init_h.bias", group, {h}, fan_in_bound(d), seed);
    layer.init_c_weight = &store.add_uniform(p + "init_c.weight", group, {d, h}, fan_in_bound(d), seed);
    layer.init_c_bias = &store.add_uniform(p + "init_c.bias", group, {h}, fan_in_bound(d), seed);
    layer.weight = &store.add_uniform(p + "lstm.weight", group, {in + h, 4 * h}, fan_in_bound(h), seed);
    layer.bias = &store.add_uniform(p + "lstm.bias", group, {4 * h}, fan_in_bound(h), seed);
    layers_.push_back(layer);
  }
  out_weight_ = &store.add_uniform("decoder.out.weight", group, {h + d, n}, fan_in_bound(h + d), seed);
  out_bias_ = &store.add_uniform("decoder.out.bias", group, {n}, fan_in_bound(h + d), seed);
}

template <typename T>
DecoderState<T> CaptionDecoder<T>::init_state(const EncoderOutput<T>& enc) const {
  if (enc.features.dim(1) != config_.enc_dim) {
    throw DimensionError("decoder expects encoder width " + std::to_string(config_.enc_dim) +
                         ", got " + shape_str(enc.features.shape()));
  }
  Tape<T>& tape = enc.features.tape();
  Var<T> pooled = mean_rows(enc.features);
  DecoderState<T> state;
  for (const Layer& layer : layers_) {
    state.h.push_back(
        tanh(linear(pooled, tape.param(*layer.init_h_weight), tape.param(*layer.init_h_bias))));
    state.c.push_back(
        tanh(linear(pooled, tape.param(*layer.init_c_weight), tape.param(*layer.init_c_bias))));
  }
  return state;
}

template <typename T>
AttentionOutput<T> CaptionDecoder<T>::attend(const Var<T>& hidden,
                                             const EncoderOutput<T>& enc) const {
  std::optional<Var<T>> proj;
  if (att_proj_) proj = enc.features.tape().param(*att_proj_);
  return capgen::attend(hidden, enc, proj);
}

template <typename T>
StepOutput<T> CaptionDecoder<T>::decode_step(std::size_t token, const DecoderState<T>& state,
                                             const EncoderOutput<T>& enc) const {
  if (token >= config_.vocab_size) {
    throw UsageError("token id " + std::to_string(token) + " outside vocabulary of " +
                     std::to_string(config_.vocab_size));
  }
  if (state.h.size() != layers_.size() || state.c.size() != layers_.size()) {
    throw UsageError("decoder state has the wrong number of layers");
  }
  Tape<T>& tape = enc.features.tape();
  AttentionOutput<T> att = attend(state.top(), enc);
  Var<T> input = concat<T>({embedding(tape.param(*embed_), {token}), att.attended}, 1);

  StepOutput<T> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto [h, c] = lstm_step(input, state.h[l], state.c[l], tape.param(*layers_[l].weight),
                            tape.param(*layers_[l].bias));
    out.state.h.push_back(h);
    out.state.c.push_back(c);
    input = h;
  }
  out.state.alpha = att.alpha;
  Var<T> fused = concat<T>({out.state.top(), att.attended}, 1);
  out.logits = reshape(linear(fused, tape.param(*out_weight_), tape.param(*out_bias_)),
                       {config_.vocab_size});
  return out;
}

template <typename T>
TeacherForcedOutput<T> CaptionDecoder<T>::teacher_forced_forward(
    const std::vector<std::size_t>& tokens, const EncoderOutput<T>& enc) const {
  if (tokens.size() < 2) {
    throw UsageError("teacher forcing needs at least a start token and one target");
  }
  if (tokens.front() != kStartId) throw UsageError("token sequence must begin with the start token");
  const std::size_t n = config_.vocab_size;
  const std::size_t locations = enc.features.dim(0);
  DecoderState<T> state = init_state(enc);
  std::vector<Var<T>> logit_rows, alpha_rows;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    StepOutput<T> step = decode_step(tokens[t], state, enc);
    logit_rows.push_back(reshape(step.logits, {1, n}));
    alpha_rows.push_back(reshape(*step.state.alpha, {1, locations}));
    state = std::move(step.state);
  }
  return {concat(logit_rows, 0), concat(alpha_rows, 0)};
}

#define CAPGEN_INSTANTIATE_DECODER(T)                                                          \
  template AttentionOutput<T> attend<T>(const Var<T>&, const EncoderOutput<T>&,                \
                                        const std::optional<Var<T>>&);                         \
  template std::pair<Var<T>, Var<T>> lstm_step<T>(const Var<T>&, const Var<T>&, const Var<T>&, \
                                                  const Var<T>&, const Var<T>&);               \
  template class CaptionDecoder<T>;

CAPGEN_INSTANTIATE_DECODER(float)
CAPGEN_INSTANTIATE_DECODER(double)

}  // namespace capgen
