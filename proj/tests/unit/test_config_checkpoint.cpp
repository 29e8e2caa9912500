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

#include <cstring>
#include <fstream>
#include <sstream>

#include "capgen/checkpoint.hpp"
#include "capgen/config.hpp"
#include "capgen/serialize.hpp"
#include "support/checkpoint_checks.hpp"

using namespace capgen;
using namespace capgen::testing;

TEST_CASE("defaults validate and round trip through JSON") {
  const RunConfig d;
  CHECK_NOTHROW(d.validate());
  CHECK(d.train.batch_size == 16);
  CHECK(d.train.folds == 4);
  CHECK(d.decode.beam_width == 2);
  CHECK(d.optim.lr_encoder == 1e-4);
  CHECK(d.optim.lr_decoder == 4e-4);
  CHECK(RunConfig::from_json(d.to_json()) == d);
  CHECK(RunConfig::from_json(d.to_json(-1)) == d);

  RunConfig t = toy_config();
  t.train.seed = 0xffffffffffffffffULL;
  t.noise.beta = 0.123456789012345;
  t.ablation.beam = false;
  CHECK(RunConfig::from_json(t.to_json()) == t);
  CHECK(RunConfig::keys().size() == 36);
}

TEST_CASE("nested and dotted keys are equivalent") {
  const RunConfig nested = RunConfig::from_json(R"({"train": {"epochs": 3, "seed": 9}, "decode": {"beam_width": 1}})");
  const RunConfig dotted = RunConfig::from_json(R"({"train.epochs": 3, "train.seed": 9, "decode.beam_width": 1})");
  const RunConfig mixed = RunConfig::from_json(R"({"train": {"epochs": 3}, "train.seed": 9, "decode.beam_width": 1})");
  CHECK(nested == dotted);
  CHECK(mixed == dotted);
  CHECK(nested.train.epochs == 3);
  CHECK(nested.train.seed == 9);
  CHECK(nested.effective_decode().beam_width == 1);

  const RunConfig stages = RunConfig::from_json(R"({"encoder": {"stages": [[2, 2], [2, 4]], "embed_dim": 32}})");
  CHECK(stages.encoder.stages.size() == 2);
  CHECK(stages.encoder.stages[1].heads == 4);
}

TEST_CASE("config errors") {
  CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"train": {"epoch": 3}})"), doctest::Contains("train.epoch"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"train": {"epochs": 3}, "train.epochs": 4})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"train.epochs": -1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"train.epochs": 1.5})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"ablation.noise": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"noise.beta": "x"})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"encoder.stages": [[1]]})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"encoder.stages": []})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("{"), ConfigError);
  // Semantic validation after parsing.
  CHECK_THROWS_AS(RunConfig::from_json(R"({"train.batch_size": 0})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"noise.rate": 1.5})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"augment.flip_p": -0.1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"encoder.patch_size": 5})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"optim.beta1": 1.0})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"decode.max_len": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"sched.T_mult": 0.5})"), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::load("/nonexistent/cfg.json"), doctest::Contains("cfg.json"), ConfigError);
}

TEST_CASE("derived settings follow the ablation switches") {
  RunConfig c = toy_config();
  CHECK(c.decoder_config(20).enc_dim == c.encoder.output_dim());
  CHECK(c.decoder_config(20).vocab_size == 20);
  CHECK(c.effective_noise().enabled);
  CHECK(c.augment_config().enabled);
  CHECK(c.augment_config().image_size == c.encoder.image_size);
  c.ablation = {false, false, false, false};
  CHECK_FALSE(c.effective_noise().enabled);
  CHECK(c.effective_decode().beam_width == 1);
  CHECK_FALSE(c.augment_config().enabled);
  CHECK(c.scheduler_config(7).T0 == 7);
  c.sched.T0 = 3;
  CHECK(c.scheduler_config(7).T0 == 3);
}

TEST_CASE("tensor record format") {
  const Tensor<float> t({2, 3}, {1.5f, -2.0f, 0.0f, 3.25f, -0.0f, 1e-30f});
  const std::string bytes = encode_tensor(t);
  REQUIRE(bytes.size() == 4 + 4 + 1 + 1 + 2 * 4 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "VCAP");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 0);
  CHECK(bytes[9] == 2);
  CHECK(bytes[10] == 2);
  CHECK(bytes[14] == 3);
  float first;
  std::memcpy(&first, bytes.data() + 18, 4);
  CHECK(first == 1.5f);
  const Tensor<float> back = decode_tensor(bytes);
  CHECK(back == t);
  CHECK(encode_tensor(back) == bytes);

  CHECK_THROWS_AS(decode_tensor("VCAX" + bytes.substr(4)), DataError);
  CHECK_THROWS_AS(decode_tensor(bytes.substr(0, bytes.size() - 1)), DataError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_tensor(bad_version), DataError);
  std::string bad_dtype = bytes;
  bad_dtype[8] = 1;
  CHECK_THROWS_AS(decode_tensor(bad_dtype), DataError);
  std::string zero_extent = bytes;
  zero_extent[10] = 0;
  CHECK_THROWS_AS(decode_tensor(zero_extent), DataError);
}

TEST_CASE("checkpoint byte round trip") {
  const Checkpoint ckpt = sample_checkpoint();
  CHECK(ckpt.optimizer_step == 2);
  CHECK(ckpt.adam_m.size() == ckpt.params.size());
  CHECK(checkpoint_roundtrip_ok(ckpt));

  const std::string bytes = encode_checkpoint(ckpt);
  CHECK(bytes.substr(0, 4) == "VCKP");
  TempDir dir("ckpt");
  save_checkpoint(dir / "a.ckpt", ckpt);
  std::ifstream f(dir / "a.ckpt", std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == bytes);
  const Checkpoint loaded = load_checkpoint(dir / "a.ckpt");
  CHECK(loaded.params == ckpt.params);
  CHECK(loaded.vocab == ckpt.vocab);

  Checkpoint bare = ckpt;
  bare.adam_m.clear();
  bare.adam_v.clear();
  bare.optimizer_step = 0;
  CHECK(checkpoint_roundtrip_ok(bare));
}

TEST_CASE("restoring parameters and optimizer state") {
  const Checkpoint ckpt = sample_checkpoint();
  CaptionModel<float> model(ckpt.config.encoder, ckpt.config.decoder_config(ckpt.vocab.size()), 123);
  CHECK(snapshot(model.params()) != ckpt.params);
  restore(model.params(), ckpt.params);
  CHECK(snapshot(model.params()) == ckpt.params);

  Adam<float> adam({{"encoder", 1e-3, model.params().group("encoder")},
                    {"decoder", 1e-3, model.params().group("decoder")}},
                   AdamConfig{});
  restore_optimizer(adam, ckpt);
  CHECK(adam.steps() == 2);
  Checkpoint again;
  snapshot_optimizer(adam, again);
  CHECK(again.adam_m == ckpt.adam_m);
  CHECK(again.adam_v == ckpt.adam_v);

  auto wrong_shape = ckpt.params;
  wrong_shape.begin()->second = Tensor<float>({1});
  CHECK_THROWS_WITH_AS(restore(model.params(), wrong_shape), doctest::Contains(wrong_shape.begin()->first.c_str()),
                       CheckpointError);
  auto missing = ckpt.params;
  missing.erase(missing.begin());
  CHECK_THROWS_AS(restore(model.params(), missing), CheckpointError);
  auto extra = ckpt.params;
  extra["bogus"] = Tensor<float>({1});
  CHECK_THROWS_AS(restore(model.params(), extra), CheckpointError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string bytes = encode_checkpoint(sample_checkpoint());
  CHECK_THROWS_AS(decode_checkpoint(""), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint("VCKQ" + bytes.substr(4)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 20)), CheckpointError);
  std::string version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(version), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent.ckpt"), DataError);
  // CheckpointError is a data error for exit-code purposes.
  CHECK_THROWS_AS(decode_checkpoint("x"), DataError);
}
