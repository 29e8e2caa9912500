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

#include "capgen/data.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "capgen/decoder.hpp"
#include "capgen/tensor.hpp"

namespace capgen {

namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFC normalizer unavailable");
  return *n;
}

icu::UnicodeString normalize(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) throw DataError("unicode normalization failed");
  return out;
}

bool dropped(UChar32 c) {
  return u_ispunct(c) || u_charType(c) == U_DECIMAL_DIGIT_NUMBER;
}

}  // namespace

std::string clean_caption(std::string_view raw) {
  icu::UnicodeString s =
      icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  s = normalize(s);
  s.toLower(icu::Locale::getRoot());

  icu::UnicodeString kept;
  bool pending_space = false;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (dropped(c)) continue;
    if (u_isUWhiteSpace(c)) {
      pending_space = !kept.isEmpty();
      continue;
    }
    if (pending_space) kept.append(static_cast<UChar>(u' '));
    pending_space = false;
    kept.append(c);
  }
  // Removing a character can leave a base letter next to a combining mark.
  kept = normalize(kept);
  std::string out;
  kept.toUTF8String(out);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t next = text.find(' ', pos);
    const std::size_t end = next == std::string_view::npos ? text.size() : next;
    if (end > pos) tokens.emplace_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

Vocab::Vocab() {
  for (const char* s : kSpecialNames) {
    token_to_id_[s] = id_to_token_.size();
    id_to_token_.emplace_back(s);
  }
}

Vocab::Vocab(const std::vector<std::string>& ordinary) : Vocab() {
  for (const auto& tok : ordinary) {
    if (!token_to_id_.emplace(tok, id_to_token_.size()).second) {
      throw UsageError("duplicate vocabulary token '" + tok + "'");
    }
    id_to_token_.push_back(tok);
  }
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= id_to_token_.size()) throw UsageError("token id " + std::to_string(id) + " out of range");
  return id_to_token_[id];
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end() || it->second < kNumSpecials) return kUnkId;
  return it->second;
}

std::vector<std::size_t> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids{kStartId};
  for (const auto& t : tokens) ids.push_back(id(t));
  ids.push_back(kEndId);
  return ids;
}

std::vector<std::string> Vocab::decode(const std::vector<std::size_t>& ids) const {
  std::vector<std::string> out;
  for (std::size_t id : ids) {
    if (id == kPadId || id == kStartId || id == kEndId) continue;
    out.push_back(token(id));
  }
  return out;
}

std::vector<std::string> Vocab::ordinary_tokens() const {
  return {id_to_token_.begin() + kNumSpecials, id_to_token_.end()};
}

Vocab build_vocab(const std::vector<std::string>& captions, std::size_t min_count) {
  std::map<std::string, std::size_t> freq;
  std::size_t total = 0;
  for (const auto& c : captions) {
    for (auto& t : tokenize(c)) {
      ++freq[t];
      ++total;
    }
  }
  if (total == 0) throw UsageError("build_vocab: the captions contain no tokens");
  std::vector<std::pair<std::string, std::size_t>> kept;
  const Vocab specials;
  for (auto& [tok, n] : freq) {
    if (specials.contains(tok)) continue;  // reserved names never become ordinary tokens
    if (n >= std::max<std::size_t>(min_count, 1)) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> ordinary;
  for (auto& [tok, n] : kept) ordinary.push_back(tok);
  return Vocab(ordinary);
}

// ---------------------------------------------------------------------------

std::filesystem::path resolve_image(const std::filesystem::path& root, const std::string& file) {
  const std::filesystem::path rel = std::filesystem::path(file).lexically_normal();
  if (file.empty() || rel.is_absolute() || rel.empty() || *rel.begin() == "..") {
    throw DataError("image path '" + file + "' does not resolve under the dataset root");
  }
  return root / rel;
}

namespace {

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

}  // namespace

std::vector<CaptionRecord> load_captions(const std::filesystem::path& root, bool clean,
                                         std::ostream* warnings) {
  const auto path = root / "captions.jsonl";
  std::ifstream f(path);
  if (!f) throw DataError("cannot read '" + path.string() + "'");
  std::vector<CaptionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (collapse_whitespace(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto field = [&](const char* key) {
      if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing string field '" +
                        key + "'");
      }
      return j[key].get<std::string>();
    };
    CaptionRecord rec{field("id"), field("file"), field("caption")};
    resolve_image(root, rec.image_file);
    rec.caption = clean ? clean_caption(rec.caption) : collapse_whitespace(rec.caption);
    if (rec.caption.empty()) {
      if (warnings) *warnings << "warning: record '" << rec.id << "' has an empty caption; skipped\n";
      continue;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FoldSplit::train_indices(std::size_t held_out) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw UsageError("kfold_split: k must be positive");
  if (n < k) {
    throw UsageError("kfold_split: " + std::to_string(n) + " samples cannot fill " +
                     std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i-- > 1;) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  FoldSplit split;
  split.folds.resize(k);
  for (std::size_t i = 0; i < n; ++i) split.folds[i % k].push_back(order[i]);
  return split;
}

}  // namespace capgen
