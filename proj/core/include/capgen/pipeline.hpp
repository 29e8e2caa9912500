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
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capgen/checkpoint.hpp"
#include "capgen/config.hpp"
#include "capgen/data.hpp"
#include "capgen/inference.hpp"
#include "capgen/metrics.hpp"
#include "capgen/model.hpp"

namespace capgen {

/// One line of the training log.
struct StepRecord {
  std::size_t fold = 0;
  std::size_t step = 0;
  double lr_factor = 0.0;
  double main = 0.0;
  double fake = 0.0;
  double total = 0.0;

  std::string to_json() const;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t held_out_size = 0;
  std::size_t steps = 0;
  std::size_t vocab_size = 0;
  std::optional<StepRecord> last;
  std::optional<BleuReport> validation;  // absent when nothing is held out
  std::filesystem::path checkpoint;
};

struct TrainOptions {
  /// Human-readable progress; null for silence.
  std::ostream* progress = nullptr;
  /// Print a progress line every this many steps (0: only per fold).
  std::size_t progress_every = 0;
  /// Skip the held-out evaluation after each fold.
  bool skip_validation = false;
};

/// Trains one model per fold and writes into `out_dir`:
///   run_config.json, train_log.jsonl, fold<k>.ckpt, fold<k>_eval.json.
/// A non-finite loss aborts with NumericError after logging the step.
std::vector<FoldResult> train(const RunConfig& config, const std::filesystem::path& data_dir,
                              const std::filesystem::path& out_dir, const TrainOptions& options = {});

/// A loaded model ready for decoding.
class Captioner {
 public:
  explicit Captioner(const Checkpoint& ckpt);
  static Captioner load(const std::filesystem::path& path);

  struct Result {
    std::vector<std::string> words;
    DecodeResult decode;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;

    std::string text() const;
  };

  /// `image` is a normalized [3×S×S] tensor.
  Result caption(const Tensor<float>& image, const DecodeConfig& cfg) const;
  /// Loads, resizes and center-crops a PPM file first.
  Result caption_file(const std::filesystem::path& image_file, const DecodeConfig& cfg) const;

  /// Decodes every record in `data_dir` and scores against its cleaned
  /// caption. Hypotheses are appended to `hypotheses` when given.
  BleuReport evaluate(const std::filesystem::path& data_dir, const DecodeConfig& cfg,
                      std::vector<std::string>* hypotheses = nullptr) const;
  BleuReport evaluate(const std::filesystem::path& data_dir, const std::vector<CaptionRecord>& records,
                      const DecodeConfig& cfg, std::vector<std::string>* hypotheses = nullptr) const;

  /// Greedy decode, then one PGM per generated word in `out_dir`.
  std::vector<std::filesystem::path> export_attention(const std::filesystem::path& image_file,
                                                      const std::filesystem::path& out_dir) const;

  const RunConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const CaptionModel<float>& model() const { return *model_; }

 private:
  RunConfig config_;
  Vocab vocab_;
  std::unique_ptr<CaptionModel<float>> model_;
};

}  // namespace capgen
