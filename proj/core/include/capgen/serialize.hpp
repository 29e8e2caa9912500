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

// Binary tensor record:
//   "VCAP" | u32 version (=1) | u8 dtype (0 = f32) | u8 rank | rank × u32 extents | f32 payload
// All integers and floats little-endian; payload row-major.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "capgen/tensor.hpp"

namespace capgen {

inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32(std::istream& in, const char* what);

void write_tensor(std::ostream& out, const Tensor<float>& t);
Tensor<float> read_tensor(std::istream& in);

std::string encode_tensor(const Tensor<float>& t);
Tensor<float> decode_tensor(const std::string& bytes);

}  // namespace capgen
