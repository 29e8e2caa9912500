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

// capgen: train, caption, eval and attention export from the command line.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or
// checkpoint error, 3 numeric failure during training.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "capgen/pipeline.hpp"

namespace {

using namespace capgen;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct TrainArgs {
  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> folds, epochs, beam, max_len;
  bool no_noise = false, no_augment = false, no_preprocess = false, no_beam = false;
  bool quiet = false;
  std::size_t progress_every = 0;
};

struct DecodeArgs {
  std::string checkpoint, image, data, out;
  std::optional<std::size_t> beam, max_len;
};

RunConfig build_config(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.folds) cfg.train.folds = *a.folds;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.beam) cfg.decode.beam_width = *a.beam;
  if (a.max_len) cfg.decode.max_len = *a.max_len;
  if (a.no_noise) cfg.ablation.noise = false;
  if (a.no_augment) cfg.ablation.augment = false;
  if (a.no_preprocess) cfg.ablation.preprocess = false;
  if (a.no_beam) cfg.ablation.beam = false;
  cfg.validate();
  return cfg;
}

DecodeConfig decode_config(const Captioner& c, const DecodeArgs& a) {
  DecodeConfig d = c.config().effective_decode();
  if (a.beam) d.beam_width = *a.beam;
  if (a.max_len) d.max_len = *a.max_len;
  d.validate();
  return d;
}

int run_train(const TrainArgs& a) {
  const RunConfig cfg = build_config(a);
  TrainOptions opt;
  opt.progress = a.quiet ? nullptr : &std::cerr;
  opt.progress_every = a.progress_every;
  const auto results = train(cfg, a.data, a.out, opt);
  for (const auto& r : results) {
    std::cout << "fold " << r.fold << ": " << r.steps << " steps";
    if (r.last) std::cout << ", final total " << r.last->total;
    if (r.validation) std::cout << ", held-out bleu4 " << r.validation->bleu4;
    std::cout << " -> " << r.checkpoint.string() << "\n";
  }
  return kOk;
}

int run_caption(const DecodeArgs& a) {
  const Captioner c = Captioner::load(a.checkpoint);
  std::cout << c.caption_file(a.image, decode_config(c, a)).text() << "\n";
  return kOk;
}

int run_eval(const DecodeArgs& a) {
  const Captioner c = Captioner::load(a.checkpoint);
  const std::string report = c.evaluate(a.data, decode_config(c, a)).to_json();
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f || !(f << report << "\n")) throw DataError("cannot write '" + a.out + "'");
  }
  std::cout << report << "\n";
  return kOk;
}

int run_attention(const DecodeArgs& a) {
  const Captioner c = Captioner::load(a.checkpoint);
  for (const auto& p : c.export_attention(a.image, a.out)) std::cout << p.string() << "\n";
  return kOk;
}

void add_decode_flags(CLI::App* cmd, DecodeArgs& a) {
  cmd->add_option("--beam", a.beam, "Beam width; 1 selects greedy decoding")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-len", a.max_len, "Maximum caption length in tokens, markers included")
      ->check(CLI::Range(2, 100000));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capgen: image caption generation with a windowed-attention encoder"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train one model per fold and write checkpoints");
  train->add_option("--config", train_args.config, "JSON run configuration")
      ->check(CLI::ExistingFile);
  train->add_option("--data", train_args.data, "Dataset root (captions.jsonl + images/)")
      ->required()
      ->check(CLI::ExistingDirectory);
  train->add_option("--out", train_args.out, "Output directory")->required();
  train->add_option("--seed", train_args.seed, "Master seed");
  train->add_option("--folds", train_args.folds, "Number of folds (1: train on everything)")
      ->check(CLI::PositiveNumber);
  train->add_option("--epochs", train_args.epochs, "Epochs per fold");
  train->add_option("--beam", train_args.beam, "Beam width for held-out evaluation")
      ->check(CLI::PositiveNumber);
  train->add_option("--max-len", train_args.max_len, "Maximum decode length")
      ->check(CLI::Range(2, 100000));
  train->add_flag("--no-noise", train_args.no_noise, "Disable noise injection");
  train->add_flag("--no-augment", train_args.no_augment, "Disable flip/crop augmentation");
  train->add_flag("--no-preprocess", train_args.no_preprocess, "Skip caption cleaning");
  train->add_flag("--no-beam", train_args.no_beam, "Greedy decoding for held-out evaluation");
  train->add_option("--progress-every", train_args.progress_every, "Progress line every N steps");
  train->add_flag("-q,--quiet", train_args.quiet, "No progress output");

  DecodeArgs caption_args;
  auto* caption = app.add_subcommand("caption", "Caption one PPM image");
  caption->add_option("checkpoint", caption_args.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  caption->add_option("image", caption_args.image, "PPM image")->required()->check(CLI::ExistingFile);
  add_decode_flags(caption, caption_args);

  DecodeArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Corpus BLEU4 over a dataset");
  eval->add_option("checkpoint", eval_args.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--data", eval_args.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_args.out, "Also write the report to this file");
  add_decode_flags(eval, eval_args);

  DecodeArgs attention_args;
  auto* attention = app.add_subcommand("attention", "Write one attention map per generated word");
  attention->add_option("checkpoint", attention_args.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  attention->add_option("image", attention_args.image, "PPM image")
      ->required()
      ->check(CLI::ExistingFile);
  attention->add_option("--out", attention_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return run_train(train_args);
    if (*caption) return run_caption(caption_args);
    if (*eval) return run_eval(eval_args);
    if (*attention) return run_attention(attention_args);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
