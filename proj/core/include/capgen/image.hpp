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
#include <filesystem>
#include <random>
#include <string>
#include <string_view>

#include "capgen/tensor.hpp"

namespace capgen {

/// Image transform settings. Images are [3×H×W] float tensors in [0, 1]
/// until normalized.
struct AugmentConfig {
  std::size_t image_size = 224;
  std::size_t resize = 0;  // 0: image_size · 8/7 (256 for 224)
  double flip_p = 0.5;
  double crop_p = 0.5;
  bool enabled = true;
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};

  std::size_t resize_size() const;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// Binary PPM (P6), maxval 1..65535. Errors name the byte offset.
Tensor<float> parse_ppm(std::string_view bytes, const std::string& source = "<memory>");
Tensor<float> read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor<float>& rgb);

/// Half-pixel-centred bilinear resampling.
Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t height, std::size_t width);
Tensor<float> hflip(const Tensor<float>& image);
Tensor<float> crop(const Tensor<float>& image, std::size_t top, std::size_t left, std::size_t size);
Tensor<float> center_crop(const Tensor<float>& image, std::size_t size);
Tensor<float> normalize_image(const Tensor<float>& image, const std::array<float, 3>& mean,
                              const std::array<float, 3>& std);

/// Resize, then (train mode with augmentation enabled) random flip and
/// random-or-center crop, else center crop; finally per-channel normalization.
Tensor<float> augment(const Tensor<float>& image, const AugmentConfig& cfg, bool train_mode,
                      std::mt19937_64& rng);

Tensor<float> load_and_augment(const std::filesystem::path& image_file, const AugmentConfig& cfg,
                               bool train_mode, std::mt19937_64& rng);

}  // namespace capgen
