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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "capgen/decoder.hpp"

namespace capgen {

struct DecodeConfig {
  std::size_t beam_width = 2;
  std::size_t max_len = 30;  // tokens, counting the start and end markers

  void validate() const;

  friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

/// Partial hypothesis. `alphas` holds one attention row per generated token.
template <typename T>
struct Beam {
  std::vector<std::size_t> tokens;
  double logprob = 0.0;
  DecoderState<T> state;
  bool finished = false;
  std::vector<std::vector<double>> alphas;
};

struct DecodeResult {
  std::vector<std::size_t> tokens;  // starts with the start marker
  double logprob = 0.0;
  bool finished = false;  // ended with the end marker rather than the length cap
  std::vector<std::vector<double>> alphas;
};

/// Arg-max token per step (ties → smallest id) until the end marker or max_len.
template <typename T>
DecodeResult greedy_decode(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                           const DecodeConfig& cfg);

/// Keeps the beam_width best hypotheses by summed log-probability. Finished
/// hypotheses stay in the pool unchanged and compete with live extensions.
/// Ordering is (logprob desc, token ids lexicographic asc).
template <typename T>
DecodeResult beam_search(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                         const DecodeConfig& cfg);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// α reshaped to grid_h×grid_w, min-max scaled to [0, 255] and upsampled
/// (nearest neighbour) to image_size². A constant α maps to all zeros.
GrayImage attention_map(const std::vector<double>& alpha, std::size_t grid_h, std::size_t grid_w,
                        std::size_t image_size);

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

/// Writes `<index>_<word>.pgm` for every generated token; returns the paths.
std::vector<std::filesystem::path> export_attention(const std::vector<std::vector<double>>& alphas,
                                                    const std::vector<std::string>& words,
                                                    std::size_t grid_h, std::size_t grid_w,
                                                    std::size_t image_size,
                                                    const std::filesystem::path& out_dir);

}  // namespace capgen
