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
#include <filesystem>
#include <string>
#include <vector>

#include "capgen/decoder.hpp"
#include "capgen/encoder.hpp"
#include "capgen/image.hpp"
#include "capgen/inference.hpp"
#include "capgen/objective.hpp"
#include "capgen/optimizer.hpp"

namespace capgen {

/// Decoder sizes that do not depend on the data (vocab) or the encoder.
struct DecoderSettings {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 1;

  friend bool operator==(const DecoderSettings&, const DecoderSettings&) = default;
};

struct OptimSettings {
  double lr_encoder = 1e-4;
  double lr_decoder = 4e-4;
  AdamConfig adam;

  friend bool operator==(const OptimSettings&, const OptimSettings&) = default;
};

/// T0 == 0 means one cycle per epoch.
struct SchedSettings {
  std::size_t T0 = 0;
  double T_mult = 1.0;
  double eta_min = 0.0;

  friend bool operator==(const SchedSettings&, const SchedSettings&) = default;
};

struct TrainSettings {
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t folds = 4;
  std::size_t min_count = 1;

  friend bool operator==(const TrainSettings&, const TrainSettings&) = default;
};

/// Switching one off reproduces the matching ablation run.
struct AblationSwitches {
  bool noise = true;
  bool beam = true;
  bool augment = true;
  bool preprocess = true;

  friend bool operator==(const AblationSwitches&, const AblationSwitches&) = default;
};

struct AugmentSettings {
  std::size_t resize = 0;
  double flip_p = 0.5;
  double crop_p = 0.5;

  friend bool operator==(const AugmentSettings&, const AugmentSettings&) = default;
};

struct RunConfig {
  EncoderConfig encoder;
  DecoderSettings decoder;
  NoiseConfig noise;
  OptimSettings optim;
  SchedSettings sched;
  TrainSettings train;
  DecodeConfig decode;
  AugmentSettings augment;
  AblationSwitches ablation;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  /// Throws ConfigError naming the first bad field.
  void validate() const;

  /// Accepts nested objects and/or dotted keys ("train.epochs"). Keys not
  /// listed here raise ConfigError; missing keys keep their defaults.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Nested JSON with every field, keys sorted.
  std::string to_json(int indent = 2) const;

  /// Every accepted dotted key, sorted.
  static std::vector<std::string> keys();

  DecoderConfig decoder_config(std::size_t vocab_size) const;
  NoiseConfig effective_noise() const;
  DecodeConfig effective_decode() const;
  AugmentConfig augment_config() const;
  SchedulerConfig scheduler_config(std::size_t steps_per_epoch) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace capgen
