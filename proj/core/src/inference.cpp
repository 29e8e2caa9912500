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

#include "capgen/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

namespace capgen {

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ConfigError("decode.beam_width must be at least 1");
  if (max_len < 2) throw ConfigError("decode.max_len must be at least 2");
}

namespace {

template <typename T>
std::vector<double> log_probs(const Tensor<T>& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (T v : logits.data()) mx = std::max(mx, static_cast<double>(v));
  double total = 0.0;
  for (T v : logits.data()) total += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

template <typename T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

}  // namespace

template <typename T>
DecodeResult greedy_decode(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                           const DecodeConfig& cfg) {
  cfg.validate();
  DecodeResult out;
  out.tokens = {kStartId};
  DecoderState<T> state = decoder.init_state(enc);
  while (out.tokens.size() < cfg.max_len) {
    StepOutput<T> step = decoder.decode_step(out.tokens.back(), state, enc);
    const std::vector<double> lp = log_probs(step.logits.value());
    std::size_t best = 0;
    double best_score = out.logprob + lp[0];
    for (std::size_t tok = 1; tok < lp.size(); ++tok) {
      const double score = out.logprob + lp[tok];
      if (score > best_score) {
        best = tok;
        best_score = score;
      }
    }
    out.tokens.push_back(best);
    out.logprob = best_score;
    out.alphas.push_back(to_doubles(step.state.alpha->value()));
    state = std::move(step.state);
    if (best == kEndId) {
      out.finished = true;
      break;
    }
  }
  return out;
}

template <typename T>
DecodeResult beam_search(const CaptionDecoder<T>& decoder, const EncoderOutput<T>& enc,
                         const DecodeConfig& cfg) {
  cfg.validate();
  auto complete = [&](const Beam<T>& b) { return b.finished || b.tokens.size() >= cfg.max_len; };

  std::vector<Beam<T>> beams(1);
  beams[0].tokens = {kStartId};
  beams[0].state = decoder.init_state(enc);

  struct Candidate {
    std::size_t parent;
    std::size_t token;  // npos for a frozen beam carried over unchanged
    double logprob;
    std::vector<std::size_t> tokens;
  };
  constexpr std::size_t kFrozen = static_cast<std::size_t>(-1);

  while (!std::all_of(beams.begin(), beams.end(), complete)) {
    std::vector<Candidate> pool;
    std::vector<StepOutput<T>> steps(beams.size());
    std::vector<std::vector<double>> step_alpha(beams.size());
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const Beam<T>& beam = beams[b];
      if (complete(beam)) {
        pool.push_back({b, kFrozen, beam.logprob, beam.tokens});
        continue;
      }
      steps[b] = decoder.decode_step(beam.tokens.back(), beam.state, enc);
      step_alpha[b] = to_doubles(steps[b].state.alpha->value());
      const std::vector<double> lp = log_probs(steps[b].logits.value());
      for (std::size_t tok = 0; tok < lp.size(); ++tok) {
        Candidate c{b, tok, beam.logprob + lp[tok], beam.tokens};
        c.tokens.push_back(tok);
        pool.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(cfg.beam_width, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.logprob != b.logprob) return a.logprob > b.logprob;
                        return a.tokens < b.tokens;
                      });
    std::vector<Beam<T>> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      Candidate& c = pool[i];
      const Beam<T>& parent = beams[c.parent];
      if (c.token == kFrozen) {
        next.push_back(parent);
        continue;
      }
      Beam<T> nb;
      nb.tokens = std::move(c.tokens);
      nb.logprob = c.logprob;
      nb.state = steps[c.parent].state;
      nb.finished = c.token == kEndId;
      nb.alphas = parent.alphas;
      nb.alphas.push_back(step_alpha[c.parent]);
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }

  const Beam<T>& best = beams.front();
  return {best.tokens, best.logprob, best.finished, best.alphas};
}

template DecodeResult greedy_decode<float>(const CaptionDecoder<float>&,
                                           const EncoderOutput<float>&, const DecodeConfig&);
template DecodeResult greedy_decode<double>(const CaptionDecoder<double>&,
                                            const EncoderOutput<double>&, const DecodeConfig&);
template DecodeResult beam_search<float>(const CaptionDecoder<float>&, const EncoderOutput<float>&,
                                         const DecodeConfig&);
template DecodeResult beam_search<double>(const CaptionDecoder<double>&,
                                          const EncoderOutput<double>&, const DecodeConfig&);

// ---------------------------------------------------------------------------

GrayImage attention_map(const std::vector<double>& alpha, std::size_t grid_h, std::size_t grid_w,
                        std::size_t image_size) {
  if (grid_h == 0 || grid_w == 0 || image_size == 0) {
    throw UsageError("attention_map: extents must be positive");
  }
  if (alpha.size() != grid_h * grid_w) {
    throw DimensionError("attention_map: " + std::to_string(alpha.size()) +
                         " weights for a " + std::to_string(grid_h) + "x" +
                         std::to_string(grid_w) + " grid");
  }
  const auto [lo_it, hi_it] = std::minmax_element(alpha.begin(), alpha.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  std::vector<std::uint8_t> cells(alpha.size(), 0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      cells[i] = static_cast<std::uint8_t>(std::lround((alpha[i] - lo) / range * 255.0));
    }
  }
  GrayImage img{image_size, image_size, std::vector<std::uint8_t>(image_size * image_size)};
  for (std::size_t y = 0; y < image_size; ++y) {
    const std::size_t gy = y * grid_h / image_size;
    for (std::size_t x = 0; x < image_size; ++x) {
      img.pixels[y * image_size + x] = cells[gy * grid_w + x * grid_w / image_size];
    }
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f << "P5\n" << image.width << " " << image.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || !f || maxval != 255 || w == 0 || h == 0) {
    throw DataError("'" + path.string() + "' is not an 8-bit P5 image");
  }
  f.get();
  GrayImage img{w, h, std::vector<std::uint8_t>(w * h)};
  f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(w * h));
  if (f.gcount() != static_cast<std::streamsize>(w * h)) {
    throw DataError("'" + path.string() + "' is truncated");
  }
  return img;
}

namespace {

std::string file_safe(const std::string& word) {
  std::string out;
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80 || std::isalnum(u) || c == '-' || c == '_') out += c;
  }
  return out.empty() ? "tok" : out;
}

}  // namespace

std::vector<std::filesystem::path> export_attention(const std::vector<std::vector<double>>& alphas,
                                                    const std::vector<std::string>& words,
                                                    std::size_t grid_h, std::size_t grid_w,
                                                    std::size_t image_size,
                                                    const std::filesystem::path& out_dir) {
  if (alphas.size() != words.size()) {
    throw UsageError("export_attention: " + std::to_string(alphas.size()) + " maps for " +
                     std::to_string(words.size()) + " words");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    auto path = out_dir / (std::to_string(i) + "_" + file_safe(words[i]) + ".pgm");
    write_pgm(path, attention_map(alphas[i], grid_h, grid_w, image_size));
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace capgen
