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

// Micro-benchmarks for the hot paths: matmul, encoder forward, a training
// step, beam search and corpus BLEU.

#include <benchmark/benchmark.h>

#include <random>

#include "capgen/inference.hpp"
#include "capgen/metrics.hpp"
#include "capgen/model.hpp"
#include "capgen/objective.hpp"
#include "capgen/ops.hpp"

namespace {

using namespace capgen;

Tensor<float> random_tensor(Shape shape, std::uint64_t seed) {
  Tensor<float> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

EncoderConfig bench_encoder(std::size_t image_size) {
  EncoderConfig cfg;
  cfg.image_size = image_size;
  cfg.patch_size = 4;
  cfg.embed_dim = 32;
  cfg.stages = {{2, 2}, {2, 4}};
  cfg.window_size = 4;
  return cfg;
}

DecoderConfig bench_decoder(std::size_t vocab) {
  DecoderConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embed_dim = 32;
  cfg.hidden_dim = 64;
  return cfg;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Tape<float> tape(false);
  const auto a = tape.constant(random_tensor({n, n}, 1));
  const auto b = tape.constant(random_tensor({n, n}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).value().data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_EncoderForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  ParameterStore<float> store;
  const SwinEncoder<float> encoder(bench_encoder(size), store, 3);
  const Tensor<float> image = random_tensor({3, size, size}, 4);
  for (auto _ : state) {
    Tape<float> tape(false);
    benchmark::DoNotOptimize(encoder.encode(tape, image).features.value().data().data());
  }
}
BENCHMARK(BM_EncoderForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  CaptionModel<float> model(bench_encoder(32), bench_decoder(40), 5);
  const Tensor<float> image = random_tensor({3, 32, 32}, 6);
  const std::vector<std::size_t> tokens = {kStartId, 4, 9, 17, 23, 8, kEndId};
  std::mt19937_64 rng(7);
  for (auto _ : state) {
    Tape<float> tape;
    const auto enc = model.encoder().encode(tape, image);
    const auto loss = combined_loss(model.decoder(), enc, tokens, NoiseConfig{}, rng);
    tape.backward(loss.total);
    model.params().zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_BeamSearch(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  ParameterStore<float> store;
  DecoderConfig cfg = bench_decoder(200);
  cfg.enc_dim = 64;
  const CaptionDecoder<float> decoder(cfg, store, 8);
  const Tensor<float> features = random_tensor({16, 64}, 9);
  for (auto _ : state) {
    Tape<float> tape(false);
    const EncoderOutput<float> enc{tape.constant(features), 4, 4};
    benchmark::DoNotOptimize(beam_search(decoder, enc, DecodeConfig{width, 20}).logprob);
  }
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_Bleu4(benchmark::State& state) {
  const auto pairs = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> word(0, 50), len(5, 20);
  std::vector<Tokens> hyps(pairs), refs(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    for (int k = len(rng); k > 0; --k) hyps[i].push_back("w" + std::to_string(word(rng)));
    for (int k = len(rng); k > 0; --k) refs[i].push_back("w" + std::to_string(word(rng)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(bleu4(hyps, refs).bleu4);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs));
}
BENCHMARK(BM_Bleu4)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
