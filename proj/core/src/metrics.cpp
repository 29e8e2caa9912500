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

#include "capgen/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "capgen/tensor.hpp"

namespace capgen {

NgramCounts ngram_counts(const Tokens& tokens, std::size_t n) {
  if (n == 0) throw UsageError("n-gram order must be at least 1");
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

BleuReport bleu4(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                 Smoothing smoothing) {
  if (hypotheses.empty()) throw UsageError("bleu4: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw UsageError("bleu4: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                     std::to_string(references.size()) + " references");
  }
  std::array<std::size_t, 4> matches{}, totals{};
  BleuReport r;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    r.hyp_len += hypotheses[i].size();
    r.ref_len += references[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts hyp = ngram_counts(hypotheses[i], n);
      const NgramCounts ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : hyp) {
        totals[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    double p;
    if (smoothing == Smoothing::add_one) {
      p = (static_cast<double>(matches[n]) + 1.0) / (static_cast<double>(totals[n]) + 1.0);
    } else {
      p = totals[n] ? static_cast<double>(matches[n]) / static_cast<double>(totals[n]) : 0.0;
    }
    r.precisions[n] = p;
    if (p > 0.0) {
      log_sum += std::log(p);
    } else {
      any_zero = true;
    }
  }

  if (r.hyp_len > r.ref_len) {
    r.brevity_penalty = 1.0;
  } else if (r.hyp_len == 0) {
    r.brevity_penalty = 0.0;
  } else {
    r.brevity_penalty =
        std::exp(1.0 - static_cast<double>(r.ref_len) / static_cast<double>(r.hyp_len));
  }
  r.bleu4 = any_zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

std::string BleuReport::to_json() const {
  nlohmann::json j;
  j["bleu4"] = bleu4;
  j["p"] = precisions;
  j["bp"] = brevity_penalty;
  j["hyp_len"] = hyp_len;
  j["ref_len"] = ref_len;
  return j.dump();
}

BleuReport BleuReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    BleuReport r;
    r.bleu4 = j.at("bleu4").get<double>();
    r.precisions = j.at("p").get<std::array<double, 4>>();
    r.brevity_penalty = j.at("bp").get<double>();
    r.hyp_len = j.at("hyp_len").get<std::size_t>();
    r.ref_len = j.at("ref_len").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed BLEU report: ") + e.what());
  }
}

}  // namespace capgen
