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

#include "capgen/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "capgen/serialize.hpp"

namespace capgen {

namespace {

constexpr const char* kMomentM = "adam.m/";
constexpr const char* kMomentV = "adam.v/";

void write_name(std::ostream& out, const std::string& name) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
}

void write_all(std::ostream& out, const std::string& prefix,
               const std::map<std::string, Tensor<float>>& tensors) {
  for (const auto& [name, t] : tensors) {
    write_name(out, prefix + name);
    write_tensor(out, t);
  }
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = nlohmann::json::parse(ckpt.config.to_json());
  header["vocab"] = ckpt.vocab.ordinary_tokens();
  header["fold"] = ckpt.fold;
  header["optimizer_step"] = ckpt.optimizer_step;
  const std::string text = header.dump();

  std::ostringstream out(std::ios::binary);
  out.write("VCKP", 4);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_all(out, "", ckpt.params);
  write_all(out, kMomentM, ckpt.adam_m);
  write_all(out, kMomentV, ckpt.adam_v);
  return out.str();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
  auto fail = [&](const std::string& what) -> CheckpointError {
    return CheckpointError(source + ": " + what);
  };
  std::istringstream in(bytes, std::ios::binary);
  Checkpoint ckpt;
  try {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "VCKP") throw fail("not a checkpoint (bad magic)");
    const std::uint32_t version = read_u32(in, "checkpoint version");
    if (version != kCheckpointVersion) {
      throw fail("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t header_len = read_u32(in, "header length");
    if (header_len > bytes.size()) throw fail("header length exceeds file size");
    std::string text(header_len, '\0');
    in.read(text.data(), header_len);
    if (in.gcount() != static_cast<std::streamsize>(header_len)) throw fail("truncated header");

    const auto header = nlohmann::json::parse(text);
    ckpt.config = RunConfig::from_json(header.at("config").dump());
    ckpt.vocab = Vocab(header.at("vocab").get<std::vector<std::string>>());
    ckpt.fold = header.at("fold").get<std::size_t>();
    ckpt.optimizer_step = header.at("optimizer_step").get<std::size_t>();

    while (in.peek() != std::char_traits<char>::eof()) {
      const std::uint32_t len = read_u32(in, "tensor name length");
      if (len == 0 || len > bytes.size()) throw fail("bad tensor name length");
      std::string name(len, '\0');
      in.read(name.data(), len);
      if (in.gcount() != static_cast<std::streamsize>(len)) throw fail("truncated tensor name");
      Tensor<float> t = read_tensor(in);
      auto& target = starts_with(name, kMomentM)   ? ckpt.adam_m
                     : starts_with(name, kMomentV) ? ckpt.adam_v
                                                   : ckpt.params;
      if (&target != &ckpt.params) name.erase(0, std::string(kMomentM).size());
      if (!target.emplace(name, std::move(t)).second) throw fail("duplicate tensor '" + name + "'");
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw fail(e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot read checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

std::map<std::string, Tensor<float>> snapshot(const ParameterStore<float>& store) {
  std::map<std::string, Tensor<float>> out;
  for (const auto& [name, p] : store.all()) out.emplace(name, p.value);
  return out;
}

void restore(ParameterStore<float>& store, const std::map<std::string, Tensor<float>>& tensors) {
  for (const auto& [name, t] : tensors) {
    if (!store.contains(name)) throw CheckpointError("checkpoint has unexpected tensor '" + name + "'");
  }
  for (auto& [name, p] : store.all()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError("checkpoint is missing parameter '" + name + "'");
    if (it->second.shape() != p.value.shape()) {
      throw CheckpointError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                            " in the checkpoint but " + shape_str(p.value.shape()) +
                            " in the model");
    }
    p.value = it->second;
  }
}

void snapshot_optimizer(const Adam<float>& adam, Checkpoint& ckpt) {
  ckpt.optimizer_step = adam.steps();
  ckpt.adam_m.clear();
  ckpt.adam_v.clear();
  for (const auto& [name, mom] : adam.moments()) {
    ckpt.adam_m.emplace(name, mom.m);
    ckpt.adam_v.emplace(name, mom.v);
  }
}

void restore_optimizer(Adam<float>& adam, const Checkpoint& ckpt) {
  std::map<std::string, Adam<float>::Moments> moments;
  for (const auto& [name, m] : ckpt.adam_m) {
    auto v = ckpt.adam_v.find(name);
    if (v == ckpt.adam_v.end()) throw CheckpointError("first moment without second for '" + name + "'");
    moments.emplace(name, Adam<float>::Moments{m, v->second});
  }
  if (moments.size() != ckpt.adam_v.size()) throw CheckpointError("unpaired optimizer moments");
  adam.restore(ckpt.optimizer_step, std::move(moments));
}

}  // namespace capgen
