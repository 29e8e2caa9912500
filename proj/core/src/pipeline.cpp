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

#include "capgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <map>
#include <ostream>
#include <random>

#include <json.hpp>

#include "capgen/image.hpp"
#include "capgen/objective.hpp"
#include "capgen/ops.hpp"

namespace capgen {

namespace fs = std::filesystem;

std::string StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["fold"] = fold;
  j["step"] = step;
  j["lr_factor"] = lr_factor;
  j["main"] = main;
  j["fake"] = fake;
  j["total"] = total;
  return j.dump();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f << text << '\n';
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

using ImageCache = std::map<std::string, Tensor<float>>;

struct FoldPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> held_out;
};

std::vector<FoldPlan> plan_folds(std::size_t n, const RunConfig& cfg) {
  if (cfg.train.folds == 1) {
    FoldPlan all;
    all.train.resize(n);
    std::iota(all.train.begin(), all.train.end(), std::size_t{0});
    return {all};
  }
  const FoldSplit split = kfold_split(n, cfg.train.folds, derive_seed(cfg.train.seed, "folds"));
  std::vector<FoldPlan> plans;
  for (std::size_t f = 0; f < split.k(); ++f) {
    FoldPlan p;
    p.train = split.train_indices(f);
    p.held_out = split.folds[f];
    std::sort(p.held_out.begin(), p.held_out.end());
    plans.push_back(std::move(p));
  }
  return plans;
}

FoldResult train_fold(const RunConfig& cfg, std::size_t fold, const FoldPlan& plan,
                      const std::vector<CaptionRecord>& records, const ImageCache& images,
                      const fs::path& data_dir, const fs::path& out_dir, std::ostream& log,
                      const TrainOptions& options) {
  FoldResult result;
  result.fold = fold;
  result.train_size = plan.train.size();
  result.held_out_size = plan.held_out.size();

  std::vector<std::string> captions;
  for (auto i : plan.train) captions.push_back(records[i].caption);
  const Vocab vocab = build_vocab(captions, cfg.train.min_count);
  result.vocab_size = vocab.size();

  std::map<std::size_t, std::vector<std::size_t>> tokens;
  for (auto i : plan.train) tokens[i] = vocab.encode(std::string_view(records[i].caption));

  CaptionModel<float> model(cfg.encoder, cfg.decoder_config(vocab.size()),
                            derive_seed(cfg.train.seed, "model", fold));
  Adam<float> adam({{"encoder", cfg.optim.lr_encoder, model.params().group("encoder")},
                    {"decoder", cfg.optim.lr_decoder, model.params().group("decoder")}},
                   cfg.optim.adam);

  const std::size_t batch = cfg.train.batch_size;
  const std::size_t steps_per_epoch = (plan.train.size() + batch - 1) / batch;
  const SchedulerConfig sched = cfg.scheduler_config(steps_per_epoch);
  const AugmentConfig augment_cfg = cfg.augment_config();
  const NoiseConfig noise = cfg.effective_noise();

  std::mt19937_64 order_rng(derive_seed(cfg.train.seed, "order", fold));
  std::mt19937_64 augment_rng(derive_seed(cfg.train.seed, "augment", fold));
  std::mt19937_64 noise_rng(derive_seed(cfg.train.seed, "noise", fold));

  if (options.progress) {
    *options.progress << "fold " << fold << ": " << plan.train.size() << " train, "
                      << plan.held_out.size() << " held out, vocab " << vocab.size() << ", "
                      << steps_per_epoch * cfg.train.epochs << " steps\n";
  }

  std::size_t step = 0;
  std::vector<std::size_t> order = plan.train;
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += batch, ++step) {
      const std::size_t end = std::min(begin + batch, order.size());
      const double factor = cawr_factor(static_cast<double>(step), sched);

      Tape<float> tape;
      std::optional<Var<float>> sum;
      double main_sum = 0.0, fake_sum = 0.0;
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t i = order[b];
        const Tensor<float> image =
            augment(images.at(records[i].image_file), augment_cfg, true, augment_rng);
        const auto enc = model.encoder().encode(tape, image);
        const auto loss = combined_loss(model.decoder(), enc, tokens.at(i), noise, noise_rng);
        main_sum += loss.main_value();
        fake_sum += loss.fake_value();
        sum = sum ? add(*sum, loss.total) : loss.total;
      }
      const float inv = 1.0f / static_cast<float>(end - begin);
      const Var<float> total = scale(*sum, inv);

      StepRecord rec;
      rec.fold = fold;
      rec.step = step;
      rec.lr_factor = factor;
      rec.main = main_sum * inv;
      rec.fake = fake_sum * inv;
      rec.total = static_cast<double>(total.value().item());
      log << rec.to_json() << '\n';
      log.flush();
      if (!std::isfinite(rec.total) || !std::isfinite(rec.main) || !std::isfinite(rec.fake)) {
        throw NumericError("non-finite loss at fold " + std::to_string(fold) + " step " +
                           std::to_string(step));
      }

      tape.backward(total);
      adam.step(factor);
      adam.zero_grad();
      result.last = rec;

      if (options.progress && options.progress_every && (step + 1) % options.progress_every == 0) {
        *options.progress << "fold " << fold << " step " << step + 1 << " total " << rec.total
                          << "\n";
      }
    }
  }
  result.steps = step;

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.vocab = vocab;
  ckpt.fold = fold;
  ckpt.params = snapshot(model.params());
  snapshot_optimizer(adam, ckpt);
  result.checkpoint = out_dir / ("fold" + std::to_string(fold) + ".ckpt");
  save_checkpoint(result.checkpoint, ckpt);

  if (!plan.held_out.empty() && !options.skip_validation) {
    std::vector<CaptionRecord> held;
    for (auto i : plan.held_out) held.push_back(records[i]);
    const Captioner captioner(ckpt);
    result.validation = captioner.evaluate(data_dir, held, cfg.effective_decode());
    write_text(out_dir / ("fold" + std::to_string(fold) + "_eval.json"),
               result.validation->to_json());
    if (options.progress) {
      *options.progress << "fold " << fold << " held-out bleu4 " << result.validation->bleu4 << "\n";
    }
  }
  return result;
}

}  // namespace

std::vector<FoldResult> train(const RunConfig& config, const fs::path& data_dir,
                              const fs::path& out_dir, const TrainOptions& options) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir.string() + "': " + ec.message());
  write_text(out_dir / "run_config.json", config.to_json());

  const auto records = load_captions(data_dir, config.ablation.preprocess, options.progress);
  if (records.empty()) throw DataError("no usable captions in '" + data_dir.string() + "'");
  if (config.train.folds > records.size()) {
    throw ConfigError("train.folds = " + std::to_string(config.train.folds) + " exceeds the " +
                      std::to_string(records.size()) + " available samples");
  }
  ImageCache images;
  for (const auto& r : records) {
    if (!images.count(r.image_file)) {
      images.emplace(r.image_file, read_ppm(resolve_image(data_dir, r.image_file)));
    }
  }

  std::ofstream log(out_dir / "train_log.jsonl");
  if (!log) throw DataError("cannot open the training log in '" + out_dir.string() + "'");

  std::vector<FoldResult> results;
  const auto plans = plan_folds(records.size(), config);
  for (std::size_t f = 0; f < plans.size(); ++f) {
    results.push_back(train_fold(config, f, plans[f], records, images, data_dir, out_dir, log, options));
  }
  return results;
}

std::string Captioner::Result::text() const { return join_tokens(words); }

Captioner::Captioner(const Checkpoint& ckpt) : config_(ckpt.config), vocab_(ckpt.vocab) {
  model_ = std::make_unique<CaptionModel<float>>(config_.encoder, config_.decoder_config(vocab_.size()),
                                                 derive_seed(config_.train.seed, "model", ckpt.fold));
  restore(model_->params(), ckpt.params);
}

Captioner Captioner::load(const fs::path& path) { return Captioner(load_checkpoint(path)); }

Captioner::Result Captioner::caption(const Tensor<float>& image, const DecodeConfig& cfg) const {
  cfg.validate();
  Tape<float> tape(false);
  const auto enc = model_->encoder().encode(tape, image);
  Result r;
  r.decode = cfg.beam_width == 1 ? greedy_decode(model_->decoder(), enc, cfg)
                                 : beam_search(model_->decoder(), enc, cfg);
  r.words = vocab_.decode(r.decode.tokens);
  r.grid_h = enc.grid_h;
  r.grid_w = enc.grid_w;
  return r;
}

Captioner::Result Captioner::caption_file(const fs::path& image_file, const DecodeConfig& cfg) const {
  std::mt19937_64 unused(0);
  return caption(load_and_augment(image_file, config_.augment_config(), false, unused), cfg);
}

BleuReport Captioner::evaluate(const fs::path& data_dir, const DecodeConfig& cfg,
                               std::vector<std::string>* hypotheses) const {
  return evaluate(data_dir, load_captions(data_dir, true), cfg, hypotheses);
}

BleuReport Captioner::evaluate(const fs::path& data_dir, const std::vector<CaptionRecord>& records,
                               const DecodeConfig& cfg, std::vector<std::string>* hypotheses) const {
  std::map<std::string, std::vector<std::string>> decoded;
  std::vector<Tokens> hyps, refs;
  for (const auto& rec : records) {
    auto it = decoded.find(rec.image_file);
    if (it == decoded.end()) {
      it = decoded.emplace(rec.image_file,
                           caption_file(resolve_image(data_dir, rec.image_file), cfg).words).first;
    }
    hyps.push_back(it->second);
    refs.push_back(tokenize(clean_caption(rec.caption)));
    if (hypotheses) hypotheses->push_back(join_tokens(it->second));
  }
  return bleu4(hyps, refs);
}

std::vector<fs::path> Captioner::export_attention(const fs::path& image_file,
                                                  const fs::path& out_dir) const {
  DecodeConfig greedy = config_.decode;
  greedy.beam_width = 1;
  const Result r = caption_file(image_file, greedy);
  std::vector<std::string> words;
  for (std::size_t i = 1; i < r.decode.tokens.size(); ++i) words.push_back(vocab_.token(r.decode.tokens[i]));
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir.string() + "': " + ec.message());
  return capgen::export_attention(r.decode.alphas, words, r.grid_h, r.grid_w,
                                  config_.encoder.image_size, out_dir);
}

}  // namespace capgen
