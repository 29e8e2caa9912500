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

#include "capgen/decoder.hpp"
#include "support/gradcheck_cases.hpp"

using namespace capgen;
using capgen::testing::random_tensor;

namespace {

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

DecoderConfig small_config(std::size_t hidden = 5, std::size_t enc_dim = 4, std::size_t layers = 1) {
  DecoderConfig cfg;
  cfg.vocab_size = 9;
  cfg.embed_dim = 3;
  cfg.hidden_dim = hidden;
  cfg.enc_dim = enc_dim;
  cfg.num_layers = layers;
  return cfg;
}

}  // namespace

TEST_CASE("decoder config validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.vocab_size = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.num_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("attention weights are a softmax of feature-query scores") {
  std::mt19937_64 rng(2);
  const auto h = random_tensor({1, 4}, rng), f = random_tensor({6, 4}, rng);
  Tape<double> tape(false);
  EncoderOutput<double> enc{tape.constant(f), 2, 3};
  const auto out = attend<double>(tape.constant(h), enc, std::nullopt);
  std::vector<double> score(6);
  double z = 0.0;
  for (std::size_t l = 0; l < 6; ++l) {
    for (std::size_t d = 0; d < 4; ++d) score[l] += f.at(l, d) * h[d];
    z += std::exp(score[l]);
  }
  double total = 0.0;
  for (std::size_t l = 0; l < 6; ++l) {
    CHECK(out.alpha.value()[l] == doctest::Approx(std::exp(score[l]) / z).epsilon(1e-12));
    total += out.alpha.value()[l];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t d = 0; d < 4; ++d) {
    double want = 0.0;
    for (std::size_t l = 0; l < 6; ++l) want += std::exp(score[l]) / z * f.at(l, d);
    CHECK(out.attended.value()[d] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(attend<double>(tape.constant(random_tensor({1, 3}, rng)), enc, std::nullopt),
                  DimensionError);
}

TEST_CASE("lstm step follows the gate equations") {
  std::mt19937_64 rng(3);
  const std::size_t in = 2, hid = 3;
  const auto x = random_tensor({1, in}, rng), h = random_tensor({1, hid}, rng),
             c = random_tensor({1, hid}, rng), w = random_tensor({in + hid, 4 * hid}, rng),
             b = random_tensor({4 * hid}, rng);
  Tape<double> tape(false);
  const auto [hn, cn] = lstm_step(tape.constant(x), tape.constant(h), tape.constant(c),
                                  tape.constant(w), tape.constant(b));
  std::vector<double> xh = {x[0], x[1], h[0], h[1], h[2]};
  for (std::size_t k = 0; k < hid; ++k) {
    auto z = [&](std::size_t gate) {
      double s = b[gate * hid + k];
      for (std::size_t r = 0; r < in + hid; ++r) s += xh[r] * w.at(r, gate * hid + k);
      return s;
    };
    const double c_next = sigm(z(1)) * c[k] + sigm(z(0)) * std::tanh(z(2));
    CHECK(cn.value()[k] == doctest::Approx(c_next).epsilon(1e-12));
    CHECK(hn.value()[k] == doctest::Approx(sigm(z(3)) * std::tanh(c_next)).epsilon(1e-12));
  }
}

TEST_CASE("attention projection exists only when widths differ") {
  ParameterStore<double> same, differ;
  CaptionDecoder<double>(small_config(4, 4), same, 1);
  CaptionDecoder<double>(small_config(5, 4), differ, 1);
  CHECK_FALSE(same.contains("decoder.att_proj.weight"));
  CHECK(differ.contains("decoder.att_proj.weight"));
  CHECK(differ.get("decoder.out.weight").value.shape() == Shape{5 + 4, 9});
}

TEST_CASE("teacher forcing equals step-by-step decoding") {
  ParameterStore<double> store;
  const CaptionDecoder<double> dec(small_config(5, 4, 2), store, 3);
  std::mt19937_64 rng(4);
  const auto f = random_tensor({6, 4}, rng);
  const std::vector<std::size_t> tokens = {kStartId, 5, 8, 4, kEndId};
  Tape<double> tape(false);
  EncoderOutput<double> enc{tape.constant(f), 2, 3};
  const auto tf = dec.teacher_forced_forward(tokens, enc);
  REQUIRE(tf.logits.shape() == Shape{4, 9});
  REQUIRE(tf.alphas.shape() == Shape{4, 6});
  auto state = dec.init_state(enc);
  REQUIRE(state.h.size() == 2);
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    const auto step = dec.decode_step(tokens[t], state, enc);
    REQUIRE(step.logits.shape() == Shape{9});
    for (std::size_t k = 0; k < 9; ++k) CHECK(step.logits.value()[k] == tf.logits.value()[t * 9 + k]);
    double total = 0.0;
    for (std::size_t l = 0; l < 6; ++l) {
      CHECK(step.state.alpha->value()[l] == tf.alphas.value()[t * 6 + l]);
      total += tf.alphas.value()[t * 6 + l];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    state = step.state;
  }
}

TEST_CASE("teacher forcing rejects malformed sequences") {
  ParameterStore<double> store;
  const CaptionDecoder<double> dec(small_config(), store, 3);
  Tape<double> tape(false);
  std::mt19937_64 rng(5);
  EncoderOutput<double> enc{tape.constant(random_tensor({6, 4}, rng)), 2, 3};
  CHECK_THROWS_AS(dec.teacher_forced_forward({kStartId}, enc), UsageError);
  CHECK_THROWS_AS(dec.teacher_forced_forward({5, 6, kEndId}, enc), UsageError);
  CHECK_THROWS_AS(dec.teacher_forced_forward({kStartId, 42, kEndId}, enc), UsageError);
}

TEST_CASE("composed decoder and objective pass gradient checks") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = capgen::testing::decoder_gradcheck(seed);
    INFO("seed " << seed << " worst " << r.worst << " error " << r.max_rel_error);
    CHECK(r.max_rel_error < 1e-5);
  }
}
