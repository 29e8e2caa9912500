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

#include "capgen/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace capgen {

namespace {

void put_bytes(std::ostream& out, const unsigned char* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& in, unsigned char* p, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw DataError(std::string("truncated tensor stream while reading ") + what);
  }
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  put_bytes(out, b, 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  get_bytes(in, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_tensor(std::ostream& out, const Tensor<float>& t) {
  if (t.rank() > 255) throw DimensionError("tensor rank exceeds the format limit");
  out.write("VCAP", 4);
  write_u32(out, kTensorFormatVersion);
  const unsigned char dtype = 0, rank = static_cast<unsigned char>(t.rank());
  put_bytes(out, &dtype, 1);
  put_bytes(out, &rank, 1);
  for (auto d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("extent exceeds u32");
    write_u32(out, static_cast<std::uint32_t>(d));
  }
  for (float v : t.data()) write_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw DataError("failed writing tensor");
}

Tensor<float> read_tensor(std::istream& in) {
  char magic[4];
  get_bytes(in, reinterpret_cast<unsigned char*>(magic), 4, "magic");
  if (std::memcmp(magic, "VCAP", 4) != 0) throw DataError("bad tensor magic (expected VCAP)");
  const std::uint32_t version = read_u32(in, "version");
  if (version != kTensorFormatVersion) {
    throw DataError("unsupported tensor format version " + std::to_string(version));
  }
  unsigned char dtype = 0, rank = 0;
  get_bytes(in, &dtype, 1, "dtype");
  get_bytes(in, &rank, 1, "rank");
  if (dtype != 0) throw DataError("unsupported tensor dtype " + std::to_string(dtype));
  Shape shape(rank);
  for (auto& d : shape) {
    d = read_u32(in, "extent");
    if (d == 0) throw DataError("tensor with a zero extent");
  }
  std::vector<float> data(shape_numel(shape));
  for (auto& v : data) v = std::bit_cast<float>(read_u32(in, "payload"));
  return Tensor<float>(std::move(shape), std::move(data));
}

std::string encode_tensor(const Tensor<float>& t) {
  std::ostringstream out(std::ios::binary);
  write_tensor(out, t);
  return out.str();
}

Tensor<float> decode_tensor(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_tensor(in);
}

}  // namespace capgen
