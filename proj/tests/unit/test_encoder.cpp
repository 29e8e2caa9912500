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

#include <cmath>
#include <numeric>
#include <set>

#include "capgen/encoder.hpp"
#include "support/gradcheck_cases.hpp"

using namespace capgen;
using capgen::testing::random_tensor;

namespace {

/// Plain-loop multi-head attention over one window, relative bias included.
Tensor<double> naive_window_attention(const Tensor<double>& x, std::size_t heads,
                                      const Tensor<double>& wqkv, const Tensor<double>& bqkv,
                                      const Tensor<double>& wp, const Tensor<double>& bp,
                                      const Tensor<double>& bias, std::size_t window) {
  const std::size_t n = x.dim(0), d = x.dim(1), dh = d / heads, span = 2 * window - 1;
  std::vector<double> qkv(n * 3 * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 3 * d; ++c) {
      double s = bqkv[c];
      for (std::size_t k = 0; k < d; ++k) s += x.at(i, k) * wqkv.at(k, c);
      qkv[i * 3 * d + c] = s;
    }
  std::vector<double> heads_out(n * d, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> score(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t e = 0; e < dh; ++e)
          s += qkv[i * 3 * d + h * dh + e] * qkv[j * 3 * d + d + h * dh + e];
        const long dy = static_cast<long>(i / window) - static_cast<long>(j / window) + static_cast<long>(window) - 1;
        const long dx = static_cast<long>(i % window) - static_cast<long>(j % window) + static_cast<long>(window) - 1;
        score[j] = s / std::sqrt(static_cast<double>(dh)) + bias.at(static_cast<std::size_t>(dy) * span + static_cast<std::size_t>(dx), h);
      }
      const double mx = *std::max_element(score.begin(), score.end());
      double z = 0.0;
      for (auto& s : score) z += (s = std::exp(s - mx));
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t e = 0; e < dh; ++e)
          heads_out[i * d + h * dh + e] += score[j] / z * qkv[j * 3 * d + 2 * d + h * dh + e];
    }
  }
  Tensor<double> out({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      double s = bp[c];
      for (std::size_t k = 0; k < d; ++k) s += heads_out[i * d + k] * wp.at(k, c);
      out.at(i, c) = s;
    }
  return out;
}

}  // namespace

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.grid_side(0) == 56);
  CHECK(cfg.grid_side(1) == 28);
  CHECK(cfg.output_dim() == 64);

  auto bad = cfg;
  bad.patch_size = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.embed_dim = 30;
  bad.stages = {{1, 4}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.window_size = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.image_size = 40;
  bad.patch_size = 4;
  bad.window_size = 5;
  bad.stages = {{1, 2}, {1, 2}};  // 10x10 grid merges to 5x5, window 5 fits
  CHECK_NOTHROW(bad.validate());
  bad.stages = {{1, 2}, {1, 2}, {1, 2}};  // 5x5 cannot merge
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("patch index gathers each patch in channel, row, column order") {
  const Index idx = patch_index(2, 4, 2);
  REQUIRE(idx.size() == 4 * 8);
  // Patch 1 is the top-right 2x2 block; column (ch, i, j) -> image[ch][i][2 + j].
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(idx[1 * 8 + (ch * 2 + i) * 2 + j] == (ch * 4 + i) * 4 + 2 + j);
}

TEST_CASE("window partition and reverse are inverse permutations") {
  for (auto [h, w, m] : {std::tuple{4, 4, 2}, {6, 4, 2}, {8, 8, 4}}) {
    const Index part = window_partition_rows(h, w, m), rev = window_reverse_rows(h, w, m);
    REQUIRE(part.size() == static_cast<std::size_t>(h * w));
    CHECK(std::set<std::size_t>(part.begin(), part.end()).size() == part.size());
    for (std::size_t i = 0; i < part.size(); ++i) CHECK(part[rev[i]] == i);
  }
  // First window of a 4x4 grid holds the top-left 2x2 block in row-major order.
  const Index part = window_partition_rows(4, 4, 2);
  CHECK(Index(part.begin(), part.begin() + 4) == Index{0, 1, 4, 5});
  CHECK(Index(part.begin() + 4, part.begin() + 8) == Index{2, 3, 6, 7});
}

TEST_CASE("cyclic shift rolls the grid and its negation undoes it") {
  const Index fwd = cyclic_shift_rows(4, 6, 2), back = cyclic_shift_rows(4, 6, -2);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) CHECK(fwd[r * 6 + c] == ((r + 2) % 4) * 6 + (c + 2) % 6);
  for (std::size_t i = 0; i < fwd.size(); ++i) CHECK(fwd[back[i]] == i);
}

TEST_CASE("patch merge concatenates 2x2 neighbourhoods") {
  const Index rows = patch_merge_rows(4, 4);
  REQUIRE(rows.size() == 16);
  CHECK(Index(rows.begin(), rows.begin() + 4) == Index{0, 4, 1, 5});
  CHECK(Index(rows.begin() + 12, rows.end()) == Index{10, 14, 11, 15});
  CHECK_THROWS_AS(patch_merge_rows(3, 4), ConfigError);
}

TEST_CASE("relative position index covers the offset table") {
  const std::size_t m = 3, n = m * m, span = 2 * m - 1;
  const Index rel = relative_position_index(m);
  std::set<std::size_t> seen(rel.begin(), rel.end());
  CHECK(seen.size() == span * span);
  CHECK(*seen.rbegin() == span * span - 1);
  const std::size_t center = (m - 1) * span + (m - 1);
  for (std::size_t i = 0; i < n; ++i) CHECK(rel[i * n + i] == center);
  // Same displacement -> same entry.
  CHECK(rel[0 * n + 4] == rel[4 * n + 8]);
  CHECK(rel[0 * n + 4] != rel[4 * n + 0]);
}

TEST_CASE("shifted window mask separates tokens that were not neighbours") {
  const std::size_t h = 8, w = 8, m = 4, s = 2, n = m * m;
  const auto mask = shifted_window_mask<double>(h, w, m, s);
  const Index part = window_partition_rows(h, w, m);
  REQUIRE(mask.shape() == Shape{4, n, n});
  auto wrapped = [&](std::size_t v, std::size_t extent) { return v + s >= extent; };
  for (std::size_t win = 0; win < 4; ++win)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t a = part[win * n + i], b = part[win * n + j];
        const bool same = wrapped(a / w, h) == wrapped(b / w, h) && wrapped(a % w, w) == wrapped(b % w, w);
        CHECK(mask[(win * n + i) * n + j] == (same ? 0.0 : kMaskedScore));
      }
}

TEST_CASE("window attention matches a plain-loop reference") {
  std::mt19937_64 rng(11);
  const std::size_t m = 2, n = 4, d = 6, heads = 3;
  const auto x = random_tensor({n, d}, rng), wqkv = random_tensor({d, 3 * d}, rng),
             bqkv = random_tensor({3 * d}, rng), wp = random_tensor({d, d}, rng),
             bp = random_tensor({d}, rng), bias = random_tensor({9, heads}, rng);
  Tape<double> tape(false);
  WindowAttentionParams<double> p{tape.constant(wqkv), tape.constant(bqkv), tape.constant(wp),
                                  tape.constant(bp), tape.constant(bias)};
  const auto r = window_attention(tape.constant(x.reshaped({1, n, d})), heads, p, static_cast<const Tensor<double>*>(nullptr));
  const auto ref = naive_window_attention(x, heads, wqkv, bqkv, wp, bp, bias, m);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(r.out.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  const auto& a = r.weights.value();
  for (std::size_t row = 0; row < heads * n; ++row) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += a[row * n + j];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("masked pairs receive zero attention") {
  std::mt19937_64 rng(12);
  const std::size_t d = 4;
  const auto mask = shifted_window_mask<double>(4, 4, 2, 1);
  Tape<double> tape(false);
  WindowAttentionParams<double> p{tape.constant(random_tensor({d, 3 * d}, rng)),
                                  tape.constant(random_tensor({3 * d}, rng)),
                                  tape.constant(random_tensor({d, d}, rng)),
                                  tape.constant(random_tensor({d}, rng)), std::nullopt};
  const auto r = window_attention(tape.constant(random_tensor({4, 4, d}, rng)), 2, p, &mask);
  const auto& a = r.weights.value();
  for (std::size_t w = 0; w < 4; ++w)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t ij = 0; ij < 16; ++ij)
        if (mask[w * 16 + ij] != 0.0) CHECK(a[(w * 2 + h) * 16 + ij] == 0.0);
}

TEST_CASE("encoder output shape, parameters and determinism") {
  const auto cfg = capgen::testing::tiny_encoder_config();
  ParameterStore<double> s1, s2;
  const SwinEncoder<double> e1(cfg, s1, 42), e2(cfg, s2, 42);
  CHECK(s1.contains("encoder.patch_embed.weight"));
  CHECK(s1.contains("encoder.stage0.block1.attn.relative_bias"));
  CHECK(s1.contains("encoder.stage0.merge.weight"));
  CHECK_FALSE(s1.contains("encoder.stage1.merge.weight"));
  CHECK(s1.group("encoder").size() == s1.all().size());

  std::mt19937_64 rng(1);
  const auto img = random_tensor({3, 8, 8}, rng);
  Tape<double> t1(false), t2(false);
  const auto o1 = e1.encode(t1, img), o2 = e2.encode(t2, img);
  CHECK(o1.grid_h == 2);
  CHECK(o1.features.shape() == Shape{4, 8});
  CHECK(o1.features.value() == o2.features.value());
  CHECK_THROWS_AS(e1.encode(t1, random_tensor({3, 4, 4}, rng)), DimensionError);
}

TEST_CASE("parameter draws do not depend on registration order") {
  ParameterStore<double> a, b;
  a.add_uniform("x", "g", {3}, 1.0, 9);
  a.add_uniform("y", "g", {3}, 1.0, 9);
  b.add_uniform("y", "g", {3}, 1.0, 9);
  b.add_uniform("x", "g", {3}, 1.0, 9);
  CHECK(a.get("x").value == b.get("x").value);
  CHECK(a.get("y").value == b.get("y").value);
  CHECK_FALSE(a.get("x").value == a.get("y").value);
}

TEST_CASE("composed encoder passes gradient checks") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = capgen::testing::encoder_gradcheck(seed);
    INFO("seed " << seed << " worst " << r.worst << " error " << r.max_rel_error);
    CHECK(r.max_rel_error < 1e-5);
  }
}
