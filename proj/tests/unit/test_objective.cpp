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

#include <doctest.h>

#include <cmath>

#include "capgen/objective.hpp"
#include "support/objective_checks.hpp"

using namespace capgen;

TEST_CASE("cross entropy of a confident correct prediction is near zero") {
  Tensor<double> logits({3, 5}, 0.0);
  const std::vector<std::size_t> targets = {4, 1, 2};
  for (std::size_t t = 0; t < 3; ++t) logits.at(t, targets[t]) = 20.0;
  Tape<double> tape(false);
  CHECK(cross_entropy(tape.constant(logits), targets).value().item() < 1e-6);
}

TEST_CASE("cross entropy of uniform logits is ln N") {
  Tape<double> tape(false);
  const double ce = cross_entropy(tape.constant(Tensor<double>({4, 7}, 0.3)), {4, 5, 6, 1}).value().item();
  CHECK(ce == doctest::Approx(std::log(7.0)).epsilon(1e-15));
}

TEST_CASE("cross entropy hand instance with a padded position") {
  // Rows: [1, 2, 3] target 2 and [0, 0, ln 2] target 1; a third row is padding.
  const double l2 = std::log(2.0);
  Tape<double> tape(false);
  const Tensor<double> logits({3, 3}, {1.0, 2.0, 3.0, 0.0, 0.0, l2, 9.0, -9.0, 0.0});
  const double ce = cross_entropy(tape.constant(logits), {2, 1, kPadId}).value().item();
  const double row0 = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  const double row1 = -std::log(1.0 / 4.0);
  CHECK(ce == doctest::Approx((row0 + row1) / 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(cross_entropy(tape.constant(logits), {kPadId, kPadId, kPadId}), UsageError);
  CHECK_THROWS_AS(cross_entropy(tape.constant(logits), {1, 3, 1}), UsageError);
}

TEST_CASE("corruption never touches specials and always changes forced positions") {
  const std::vector<std::size_t> tokens = {kStartId, 4, 5, kUnkId, 9, 4, kEndId, kPadId};
  std::mt19937_64 rng(1);
  NoiseConfig cfg;
  cfg.rate = 0.0;
  auto c = corrupt_targets(tokens, cfg, 12, rng);
  CHECK(c.tokens == tokens);
  CHECK(c.num_changed() == 0);

  cfg.rate = 1.0;
  for (int rep = 0; rep < 200; ++rep) {
    c = corrupt_targets(tokens, cfg, 12, rng);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] < kNumSpecials) {
        CHECK(c.tokens[i] == tokens[i]);
        CHECK_FALSE(c.changed[i]);
      } else {
        CHECK(c.changed[i]);
        CHECK(c.tokens[i] != tokens[i]);
        CHECK(c.tokens[i] >= kNumSpecials);
        CHECK(c.tokens[i] < 12);
      }
    }
  }
}

TEST_CASE("corruption covers every alternative id uniformly enough") {
  NoiseConfig cfg;
  cfg.rate = 1.0;
  std::mt19937_64 rng(2);
  std::map<std::size_t, int> seen;
  for (int rep = 0; rep < 4000; ++rep) ++seen[corrupt_targets({kStartId, 6, kEndId}, cfg, 10, rng).tokens[1]];
  CHECK(seen.size() == 5);  // ids 4, 5, 7, 8, 9
  CHECK_FALSE(seen.count(6));
  for (const auto& [id, n] : seen) CHECK(std::abs(n - 800) < 150);
}

TEST_CASE("corruption rate estimate") {
  NoiseConfig cfg;
  cfg.rate = 0.5;
  std::vector<std::size_t> tokens(10002, 7);
  tokens.front() = kStartId;
  tokens.back() = kEndId;
  std::mt19937_64 rng(3);
  const auto c = corrupt_targets(tokens, cfg, 50, rng);
  CHECK(std::abs(static_cast<double>(c.num_changed()) / 10000.0 - 0.5) < 0.02);

  std::mt19937_64 a(9), b(9);
  CHECK(corrupt_targets(tokens, cfg, 50, a).tokens == corrupt_targets(tokens, cfg, 50, b).tokens);
}

TEST_CASE("noise config validation") {
  NoiseConfig cfg;
  cfg.rate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("combined loss equals two independent cross-entropy passes") {
  ParameterStore<double> store;
  DecoderConfig dc;
  dc.vocab_size = 10;
  dc.embed_dim = 4;
  dc.hidden_dim = 6;
  dc.enc_dim = 6;
  const CaptionDecoder<double> dec(dc, store, 5);
  std::mt19937_64 rng(6);
  const auto feats = capgen::testing::random_tensor({4, 6}, rng);
  const std::vector<std::size_t> tokens = {kStartId, 4, 8, 6, kEndId}, fake = {kStartId, 9, 8, 5, kEndId};
  const std::vector<std::size_t> targets(tokens.begin() + 1, tokens.end());
  auto ce_of = [&](const std::vector<std::size_t>& input) {
    Tape<double> t(false);
    EncoderOutput<double> enc{t.constant(feats), 2, 2};
    return cross_entropy(dec.teacher_forced_forward(input, enc).logits, targets).value().item();
  };
  Tape<double> tape(false);
  EncoderOutput<double> enc{tape.constant(feats), 2, 2};
  NoiseConfig cfg;
  const auto loss = combined_loss(dec, enc, tokens, fake, cfg);
  CHECK(loss.main_value() == ce_of(tokens));
  CHECK(loss.fake_value() == ce_of(fake));
  CHECK(loss.total_value() == doctest::Approx(ce_of(tokens) + 0.1 * ce_of(fake)).epsilon(1e-14));
  CHECK_THROWS_AS(combined_loss(dec, enc, tokens, {kStartId, kEndId}, cfg), UsageError);
}

TEST_CASE("objective is linear in value and gradient") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = capgen::testing::linearity_check(seed);
    INFO("seed " << seed << " worst " << r.worst);
    CHECK(r.value_error < 1e-6);
    CHECK(r.gradient_error < 1e-5);
    CHECK(r.beta_zero_exact);
    CHECK(r.disabled_exact);
    CHECK(r.rate_zero_exact);
  }
}
