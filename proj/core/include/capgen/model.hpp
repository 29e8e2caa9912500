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

#include <cstdint>

#include "capgen/decoder.hpp"
#include "capgen/encoder.hpp"
#include "capgen/params.hpp"

namespace capgen {

/// Encoder, decoder and the store that owns both parameter sets.
template <typename T>
class CaptionModel {
 public:
  /// `decoder.enc_dim` is overwritten with the encoder's output width.
  CaptionModel(const EncoderConfig& encoder, DecoderConfig decoder, std::uint64_t seed)
      : encoder_(encoder, store_, derive_seed(seed, "encoder")),
        decoder_(with_enc_dim(std::move(decoder), encoder), store_, derive_seed(seed, "decoder")) {}

  CaptionModel(const CaptionModel&) = delete;
  CaptionModel& operator=(const CaptionModel&) = delete;

  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }
  const SwinEncoder<T>& encoder() const { return encoder_; }
  const CaptionDecoder<T>& decoder() const { return decoder_; }

 private:
  static DecoderConfig with_enc_dim(DecoderConfig d, const EncoderConfig& e) {
    d.enc_dim = e.output_dim();
    return d;
  }

  ParameterStore<T> store_;
  SwinEncoder<T> encoder_;
  CaptionDecoder<T> decoder_;
};

}  // namespace capgen
