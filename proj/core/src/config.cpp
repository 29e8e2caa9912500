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

#include "capgen/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>

#include <json.hpp>

namespace capgen {

namespace {

using nlohmann::json;

struct Field {
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

[[noreturn]] void bad_type(const std::string& key, const char* want, const json& v) {
  throw ConfigError("config key '" + key + "' expects " + want + ", got " + v.dump());
}

void convert(const std::string& key, const json& v, std::size_t& out) {
  if (!v.is_number_unsigned()) bad_type(key, "a non-negative integer", v);
  out = v.get<std::size_t>();
}

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed uses the size_t converter");

void convert(const std::string& key, const json& v, double& out) {
  if (!v.is_number()) bad_type(key, "a number", v);
  out = v.get<double>();
}

void convert(const std::string& key, const json& v, bool& out) {
  if (!v.is_boolean()) bad_type(key, "true or false", v);
  out = v.get<bool>();
}

void convert(const std::string& key, const json& v, std::vector<StageConfig>& out) {
  if (!v.is_array() || v.empty()) bad_type(key, "a non-empty array of [blocks, heads]", v);
  std::vector<StageConfig> stages;
  for (const auto& s : v) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() ||
        !s[1].is_number_unsigned()) {
      bad_type(key, "a non-empty array of [blocks, heads]", v);
    }
    stages.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
  }
  out = std::move(stages);
}

json to_value(std::size_t v) { return v; }
json to_value(double v) { return v; }
json to_value(bool v) { return v; }
json to_value(const std::vector<StageConfig>& stages) {
  json a = json::array();
  for (const auto& s : stages) a.push_back({s.blocks, s.heads});
  return a;
}

template <typename Access>
Field field(const std::string& key, Access access) {
  return Field{
      [key, access](RunConfig& c, const json& v) { convert(key, v, access(c)); },
      [access](const RunConfig& c) { return to_value(access(const_cast<RunConfig&>(c))); }};
}

#define CAPGEN_FIELD(key, member) \
  {key, field(key, [](RunConfig& c) -> auto& { return c.member; })}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      CAPGEN_FIELD("encoder.image_size", encoder.image_size),
      CAPGEN_FIELD("encoder.patch_size", encoder.patch_size),
      CAPGEN_FIELD("encoder.embed_dim", encoder.embed_dim),
      CAPGEN_FIELD("encoder.stages", encoder.stages),
      CAPGEN_FIELD("encoder.window_size", encoder.window_size),
      CAPGEN_FIELD("encoder.mlp_ratio", encoder.mlp_ratio),
      CAPGEN_FIELD("encoder.relative_bias", encoder.relative_bias),
      CAPGEN_FIELD("decoder.embed_dim", decoder.embed_dim),
      CAPGEN_FIELD("decoder.hidden_dim", decoder.hidden_dim),
      CAPGEN_FIELD("decoder.num_layers", decoder.num_layers),
      CAPGEN_FIELD("noise.beta", noise.beta),
      CAPGEN_FIELD("noise.rate", noise.rate),
      CAPGEN_FIELD("noise.enabled", noise.enabled),
      CAPGEN_FIELD("optim.lr_encoder", optim.lr_encoder),
      CAPGEN_FIELD("optim.lr_decoder", optim.lr_decoder),
      CAPGEN_FIELD("optim.beta1", optim.adam.beta1),
      CAPGEN_FIELD("optim.beta2", optim.adam.beta2),
      CAPGEN_FIELD("optim.eps", optim.adam.eps),
      CAPGEN_FIELD("optim.weight_decay", optim.adam.weight_decay),
      CAPGEN_FIELD("sched.T0", sched.T0),
      CAPGEN_FIELD("sched.T_mult", sched.T_mult),
      CAPGEN_FIELD("sched.eta_min", sched.eta_min),
      CAPGEN_FIELD("train.batch_size", train.batch_size),
      CAPGEN_FIELD("train.epochs", train.epochs),
      CAPGEN_FIELD("train.seed", train.seed),
      CAPGEN_FIELD("train.folds", train.folds),
      CAPGEN_FIELD("train.min_count", train.min_count),
      CAPGEN_FIELD("decode.beam_width", decode.beam_width),
      CAPGEN_FIELD("decode.max_len", decode.max_len),
      CAPGEN_FIELD("augment.resize", augment.resize),
      CAPGEN_FIELD("augment.flip_p", augment.flip_p),
      CAPGEN_FIELD("augment.crop_p", augment.crop_p),
      CAPGEN_FIELD("ablation.noise", ablation.noise),
      CAPGEN_FIELD("ablation.beam", ablation.beam),
      CAPGEN_FIELD("ablation.augment", ablation.augment),
      CAPGEN_FIELD("ablation.preprocess", ablation.preprocess),
  };
  return table;
}

#undef CAPGEN_FIELD

void flatten(const json& node, const std::string& prefix, std::map<std::string, json>& out) {
  for (const auto& [name, value] : node.items()) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (value.is_object()) {
      flatten(value, key, out);
    } else if (!out.emplace(key, value).second) {
      throw ConfigError("config key '" + key + "' given twice");
    }
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void RunConfig::validate() const {
  encoder.validate();
  require(encoder.channels == 3, "encoder.channels must be 3 (RGB input)");
  require(decoder.embed_dim > 0, "decoder.embed_dim must be positive");
  require(decoder.hidden_dim > 0, "decoder.hidden_dim must be positive");
  require(decoder.num_layers > 0, "decoder.num_layers must be positive");
  noise.validate();
  require(std::isfinite(optim.lr_encoder) && optim.lr_encoder >= 0.0,
          "optim.lr_encoder must be finite and non-negative");
  require(std::isfinite(optim.lr_decoder) && optim.lr_decoder >= 0.0,
          "optim.lr_decoder must be finite and non-negative");
  require(optim.adam.beta1 >= 0.0 && optim.adam.beta1 < 1.0, "optim.beta1 must be in [0, 1)");
  require(optim.adam.beta2 >= 0.0 && optim.adam.beta2 < 1.0, "optim.beta2 must be in [0, 1)");
  require(std::isfinite(optim.adam.eps) && optim.adam.eps > 0.0, "optim.eps must be positive");
  require(std::isfinite(optim.adam.weight_decay) && optim.adam.weight_decay >= 0.0,
          "optim.weight_decay must be non-negative");
  scheduler_config(1).validate();
  require(train.batch_size > 0, "train.batch_size must be positive");
  require(train.folds > 0, "train.folds must be positive");
  require(train.min_count > 0, "train.min_count must be positive");
  decode.validate();
  require(augment.resize == 0 || augment.resize >= encoder.image_size,
          "augment.resize must be 0 or at least encoder.image_size");
  require(probability(augment.flip_p), "augment.flip_p must be in [0, 1]");
  require(probability(augment.crop_p), "augment.crop_p must be in [0, 1]");
}

RunConfig RunConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  std::map<std::string, json> flat;
  flatten(root, "", flat);

  RunConfig cfg;
  const auto& table = fields();
  for (const auto& [key, value] : flat) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return from_json(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string RunConfig::to_json(int indent) const {
  json root = json::object();
  for (const auto& [key, f] : fields()) {
    root[json::json_pointer("/" + key.substr(0, key.find('.')) + "/" +
                            key.substr(key.find('.') + 1))] = f.get(*this);
  }
  return root.dump(indent);
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, f] : fields()) out.push_back(key);
  return out;
}

DecoderConfig RunConfig::decoder_config(std::size_t vocab_size) const {
  DecoderConfig d;
  d.vocab_size = vocab_size;
  d.embed_dim = decoder.embed_dim;
  d.hidden_dim = decoder.hidden_dim;
  d.num_layers = decoder.num_layers;
  d.enc_dim = encoder.output_dim();
  return d;
}

NoiseConfig RunConfig::effective_noise() const {
  NoiseConfig n = noise;
  n.enabled = noise.enabled && ablation.noise;
  return n;
}

DecodeConfig RunConfig::effective_decode() const {
  DecodeConfig d = decode;
  if (!ablation.beam) d.beam_width = 1;
  return d;
}

AugmentConfig RunConfig::augment_config() const {
  AugmentConfig a;
  a.image_size = encoder.image_size;
  a.resize = augment.resize;
  a.flip_p = augment.flip_p;
  a.crop_p = augment.crop_p;
  a.enabled = ablation.augment;
  return a;
}

SchedulerConfig RunConfig::scheduler_config(std::size_t steps_per_epoch) const {
  SchedulerConfig s;
  s.T0 = sched.T0 ? sched.T0 : std::max<std::size_t>(steps_per_epoch, 1);
  s.T_mult = sched.T_mult;
  s.eta_min = sched.eta_min;
  return s;
}

}  // namespace capgen
