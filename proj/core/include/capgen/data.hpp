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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "capgen/errors.hpp"

namespace capgen {

/// NFC-normalizes, lowercases, drops punctuation and decimal digits, and
/// collapses whitespace runs to single spaces. Idempotent.
std::string clean_caption(std::string_view raw);

/// Splits on single spaces (input is expected to be cleaned).
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

class Vocab {
 public:
  static constexpr const char* kSpecialNames[] = {"<pad>", "<start>", "<end>", "<unk>"};

  Vocab();
  /// Ordinary tokens in id order (ids start after the specials).
  explicit Vocab(const std::vector<std::string>& ordinary);

  std::size_t size() const { return id_to_token_.size(); }
  const std::string& token(std::size_t id) const;
  /// Unknown tokens map to the unk id.
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }

  /// start, ids..., end
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::size_t> encode(std::string_view cleaned) const { return encode(tokenize(cleaned)); }

  /// Drops pad/start/end; unk decodes to "<unk>".
  std::vector<std::string> decode(const std::vector<std::size_t>& ids) const;

  /// Ordinary tokens only, in id order.
  std::vector<std::string> ordinary_tokens() const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.id_to_token_ == b.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, std::size_t> token_to_id_;
};

/// Tokens with frequency >= min_count, ordered by (frequency desc, token asc).
Vocab build_vocab(const std::vector<std::string>& captions, std::size_t min_count = 1);

struct CaptionRecord {
  std::string id;
  std::string image_file;  // relative to the dataset root
  std::string caption;
};

/// Reads `<root>/captions.jsonl`. With `clean` set, captions pass through
/// clean_caption(); records whose caption ends up empty are dropped with a
/// warning written to `warnings` (when given).
std::vector<CaptionRecord> load_captions(const std::filesystem::path& root, bool clean,
                                         std::ostream* warnings = nullptr);

/// Resolves an image path under the dataset root; paths escaping the root are rejected.
std::filesystem::path resolve_image(const std::filesystem::path& root, const std::string& file);

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;

  std::size_t k() const { return folds.size(); }
  /// Union of every fold except `held_out`, ascending.
  std::vector<std::size_t> train_indices(std::size_t held_out) const;
};

/// Seeded shuffle of 0..n-1 dealt round-robin into k folds.
FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace capgen
