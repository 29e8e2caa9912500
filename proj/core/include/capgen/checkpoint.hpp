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

// Checkpoint file:
//   "VCKP" | u32 version | u32 header length | UTF-8 JSON header
//   then, until end of file: u32 name length | UTF-8 name | VCAP tensor
// The header carries the run config, the ordinary vocab tokens, the fold and
// the optimizer step. Optimizer moments, when present, are stored as tensors
// named "adam.m/<param>" and "adam.v/<param>".

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "capgen/config.hpp"
#include "capgen/data.hpp"
#include "capgen/optimizer.hpp"
#include "capgen/params.hpp"

namespace capgen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

struct Checkpoint {
  RunConfig config;
  Vocab vocab;
  std::size_t fold = 0;
  std::size_t optimizer_step = 0;
  std::map<std::string, Tensor<float>> params;
  std::map<std::string, Tensor<float>> adam_m;  // empty when no optimizer state
  std::map<std::string, Tensor<float>> adam_v;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::map<std::string, Tensor<float>> snapshot(const ParameterStore<float>& store);

/// Copies tensors into `store`. Every parameter must be present with a
/// matching shape and no extras are allowed; otherwise CheckpointError.
void restore(ParameterStore<float>& store, const std::map<std::string, Tensor<float>>& tensors);

void snapshot_optimizer(const Adam<float>& adam, Checkpoint& ckpt);
void restore_optimizer(Adam<float>& adam, const Checkpoint& ckpt);

}  // namespace capgen
