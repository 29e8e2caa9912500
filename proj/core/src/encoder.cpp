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

#include "capgen/encoder.hpp"

#include <cmath>

namespace capgen {

void EncoderConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("encoder config: " + msg); };
  if (image_size == 0 || patch_size == 0 || channels == 0 || embed_dim == 0 || window_size == 0) {
    fail("extents must be positive");
  }
  if (image_size % patch_size != 0) {
    fail("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
         std::to_string(patch_size));
  }
  if (stages.empty()) fail("at least one stage is required");
  if (!(mlp_ratio > 0.0)) fail("mlp_ratio must be positive");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::size_t side = grid_side(s);
    const std::size_t dim = stage_dim(s);
    const auto& st = stages[s];
    if (st.blocks == 0 || st.heads == 0) fail("stage " + std::to_string(s) + " needs blocks and heads");
    if (side == 0 || side % window_size != 0) {
      fail("stage " + std::to_string(s) + " grid side " + std::to_string(side) +
           " not divisible by window_size " + std::to_string(window_size));
    }
    if (dim % st.heads != 0) {
      fail("stage " + std::to_string(s) + " width " + std::to_string(dim) +
           " not divisible by heads " + std::to_string(st.heads));
    }
    if (s + 1 < stages.size() && side % 2 != 0) {
      fail("stage " + std::to_string(s) + " grid side " + std::to_string(side) +
           " is odd and cannot be merged");
    }
  }
}

std::size_t EncoderConfig::grid_side(std::size_t stage) const {
  return (image_size / patch_size) >> stage;
}

std::size_t EncoderConfig::stage_dim(std::size_t stage) const { return embed_dim << stage; }

// ---------------------------------------------------------------------------

Index patch_index(std::size_t channels, std::size_t image_size, std::size_t patch) {
  if (patch == 0 || image_size % patch != 0) {
    throw ConfigError("image size " + std::to_string(image_size) +
                      " not divisible by patch size " + std::to_string(patch));
  }
  const std::size_t side = image_size / patch;
  const std::size_t width = channels * patch * patch;
  Index idx(side * side * width);
  for (std::size_t pr = 0; pr < side; ++pr) {
    for (std::size_t pc = 0; pc < side; ++pc) {
      const std::size_t token = pr * side + pc;
      for (std::size_t ch = 0; ch < channels; ++ch) {
        for (std::size_t i = 0; i < patch; ++i) {
          for (std::size_t j = 0; j < patch; ++j) {
            const std::size_t col = (ch * patch + i) * patch + j;
            const std::size_t y = pr * patch + i, x = pc * patch + j;
            idx[token * width + col] = (ch * image_size + y) * image_size + x;
          }
        }
      }
    }
  }
  return idx;
}

namespace {

void check_window_grid(std::size_t h, std::size_t w, std::size_t m) {
  if (m == 0 || h % m != 0 || w % m != 0) {
    throw ConfigError("grid " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by window " + std::to_string(m));
  }
}

}  // namespace

Index window_partition_rows(std::size_t grid_h, std::size_t grid_w, std::size_t window) {
  check_window_grid(grid_h, grid_w, window);
  const std::size_t wins_per_row = grid_w / window;
  Index rows(grid_h * grid_w);
  for (std::size_t r = 0; r < grid_h; ++r) {
    for (std::size_t c = 0; c < grid_w; ++c) {
      const std::size_t win = (r / window) * wins_per_row + c / window;
      const std::size_t off = (r % window) * window + c % window;
      rows[win * window * window + off] = r * grid_w + c;
    }
  }
  return rows;
}

Index window_reverse_rows(std::size_t grid_h, std::size_t grid_w, std::size_t window) {
  Index part = window_partition_rows(grid_h, grid_w, window);
  Index rows(part.size());
  for (std::size_t i = 0; i < part.size(); ++i) rows[part[i]] = i;
  return rows;
}

Index cyclic_shift_rows(std::size_t grid_h, std::size_t grid_w, std::ptrdiff_t shift) {
  const auto h = static_cast<std::ptrdiff_t>(grid_h);
  const auto w = static_cast<std::ptrdiff_t>(grid_w);
  auto wrap = [](std::ptrdiff_t v, std::ptrdiff_t n) { return ((v % n) + n) % n; };
  Index rows(grid_h * grid_w);
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      // Output (r, c) holds input ((r + s) mod H, (c + s) mod W).
      rows[static_cast<std::size_t>(r * w + c)] =
          static_cast<std::size_t>(wrap(r + shift, h) * w + wrap(c + shift, w));
    }
  }
  return rows;
}

Index patch_merge_rows(std::size_t grid_h, std::size_t grid_w) {
  if (grid_h % 2 != 0 || grid_w % 2 != 0) {
    throw ConfigError("patch merge needs an even grid, got " + std::to_string(grid_h) + "x" +
                      std::to_string(grid_w));
  }
  const std::size_t oh = grid_h / 2, ow = grid_w / 2;
  Index rows;
  rows.reserve(oh * ow * 4);
  constexpr std::size_t dr[4] = {0, 1, 0, 1};
  constexpr std::size_t dc[4] = {0, 0, 1, 1};
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      for (std::size_t k = 0; k < 4; ++k) rows.push_back((2 * r + dr[k]) * grid_w + 2 * c + dc[k]);
    }
  }
  return rows;
}

Index expand_rows(const Index& rows, std::size_t width) {
  Index idx(rows.size() * width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t d = 0; d < width; ++d) idx[i * width + d] = rows[i] * width + d;
  }
  return idx;
}

Index relative_position_index(std::size_t window) {
  const std::size_t n = window * window;
  const std::size_t span = 2 * window - 1;
  Index idx(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t dy = i / window + window - 1 - j / window;
      const std::size_t dx = i % window + window - 1 - j % window;
      idx[i * n + j] = dy * span + dx;
    }
  }
  return idx;
}

template <typename T>
Tensor<T> shifted_window_mask(std::size_t grid_h, std::size_t grid_w, std::size_t window,
                              std::size_t shift) {
  check_window_grid(grid_h, grid_w, window);
  // Label contiguous regions of the rolled grid; tokens that were not
  // neighbours before the roll carry different labels.
  auto region = [&](std::size_t v, std::size_t n) -> std::size_t {
    if (v < n - window) return 0;
    if (v < n - shift) return 1;
    return 2;
  };
  std::vector<std::size_t> label(grid_h * grid_w);
  for (std::size_t r = 0; r < grid_h; ++r)
    for (std::size_t c = 0; c < grid_w; ++c) label[r * grid_w + c] = region(r, grid_h) * 3 + region(c, grid_w);

  const Index part = window_partition_rows(grid_h, grid_w, window);
  const std::size_t n = window * window;
  const std::size_t nw = part.size() / n;
  Tensor<T> mask({nw, n, n});
  for (std::size_t w = 0; w < nw; ++w) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const bool same = label[part[w * n + i]] == label[part[w * n + j]];
        mask[(w * n + i) * n + j] = same ? T{0} : static_cast<T>(kMaskedScore);
      }
    }
  }
  return mask;
}

template Tensor<float> shifted_window_mask<float>(std::size_t, std::size_t, std::size_t,
                                                  std::size_t);
template Tensor<double> shifted_window_mask<double>(std::size_t, std::size_t, std::size_t,
                                                    std::size_t);

// ---------------------------------------------------------------------------

template <typename T>
WindowAttentionResult<T> window_attention(const Var<T>& tokens, std::size_t heads,
                                          const WindowAttentionParams<T>& params,
                                          const Tensor<T>* mask) {
  detail::require_rank("window_attention", tokens.shape(), 3);
  const std::size_t nw = tokens.dim(0), n = tokens.dim(1), d = tokens.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("window_attention: width " + std::to_string(d) +
                         " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const std::size_t wh = nw * heads;
  Tape<T>& tape = tokens.tape();

  Var<T> flat = reshape(tokens, {nw * n, d});
  Var<T> qkv = linear(flat, params.qkv_weight, params.qkv_bias);  // [W·N × 3D]
  qkv = reshape(qkv, {nw, n, 3, heads, dh});
  qkv = reshape(permute(qkv, {2, 0, 3, 1, 4}), {3 * wh, n, dh});
  Var<T> q = slice(qkv, 0, 0, wh);
  Var<T> k = slice(qkv, 0, wh, 2 * wh);
  Var<T> v = slice(qkv, 0, 2 * wh, 3 * wh);

  Var<T> scores = bmm(q, permute(k, {0, 2, 1}));  // [W·heads × N × N]
  scores = scale(scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));

  if (params.relative_bias) {
    const Var<T>& table = *params.relative_bias;
    const std::size_t window = static_cast<std::size_t>(std::lround(std::sqrt(double(n))));
    const std::size_t span = 2 * window - 1;
    if (table.shape() != Shape{span * span, heads}) {
      throw DimensionError("relative bias table has shape " + shape_str(table.shape()));
    }
    const Index rel = relative_position_index(window);
    Index idx(wh * n * n);
    for (std::size_t w = 0; w < nw; ++w)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t ij = 0; ij < n * n; ++ij)
          idx[(w * heads + h) * n * n + ij] = rel[ij] * heads + h;
    scores = add(scores, gather(table, std::move(idx), {wh, n, n}));
  }

  if (mask) {
    if (mask->shape() != Shape{nw, n, n}) {
      throw DimensionError("window mask shape " + shape_str(mask->shape()) + " does not match " +
                           shape_str({nw, n, n}));
    }
    Tensor<T> expanded({wh, n, n});
    for (std::size_t w = 0; w < nw; ++w)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(&(*mask)[w * n * n], n * n, &expanded[(w * heads + h) * n * n]);
    scores = add(scores, tape.constant(std::move(expanded)));
  }

  Var<T> weights = softmax(scores, 2);
  Var<T> mixed = bmm(weights, v);  // [W·heads × N × dh]
  mixed = permute(reshape(mixed, {nw, heads, n, dh}), {0, 2, 1, 3});
  Var<T> out = linear(reshape(mixed, {nw * n, d}), params.proj_weight, params.proj_bias);
  return {reshape(out, {nw, n, d}), weights};
}

template <typename T>
Var<T> patch_embed(const Var<T>& image, const Var<T>& weight, const Var<T>& bias,
                   std::size_t patch) {
  detail::require_rank("patch_embed", image.shape(), 3);
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h != w) throw ConfigError("patch_embed expects a square image, got " + shape_str(image.shape()));
  if (patch == 0 || h % patch != 0) {
    throw ConfigError("image side " + std::to_string(h) + " not divisible by patch " +
                      std::to_string(patch));
  }
  const std::size_t tokens = (h / patch) * (w / patch);
  Var<T> patches = gather(image, patch_index(c, h, patch), {tokens, c * patch * patch});
  return linear(patches, weight, bias);
}

template <typename T>
Var<T> patch_merge(const Var<T>& grid, const Var<T>& weight, const Var<T>& bias) {
  detail::require_rank("patch_merge", grid.shape(), 3);
  const std::size_t h = grid.dim(0), w = grid.dim(1), d = grid.dim(2);
  const Index rows = patch_merge_rows(h, w);
  const std::size_t out_tokens = (h / 2) * (w / 2);
  Var<T> cat = gather(grid, expand_rows(rows, d), {out_tokens, 4 * d});
  Var<T> out = linear(cat, weight, bias);
  return reshape(out, {h / 2, w / 2, out.dim(1)});
}

// ---------------------------------------------------------------------------

template <typename T>
SwinEncoder<T>::SwinEncoder(EncoderConfig config, ParameterStore<T>& store, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  const std::string group = "encoder";
  const std::size_t patch_width = config_.channels * config_.patch_size * config_.patch_size;
  const std::size_t d0 = config_.embed_dim;
  embed_weight_ = &store.add_uniform("encoder.patch_embed.weight", group, {patch_width, d0},
                                     fan_in_bound(patch_width), seed);
  embed_bias_ = &store.add_uniform("encoder.patch_embed.bias", group, {d0},
                                   fan_in_bound(patch_width), seed);

  const std::size_t m = config_.window_size;
  const std::size_t span = 2 * m - 1;
  for (std::size_t s = 0; s < config_.stages.size(); ++s) {
    Stage stage;
    stage.side = config_.grid_side(s);
    stage.dim = config_.stage_dim(s);
    const std::size_t dim = stage.dim;
    const std::size_t hidden =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(dim * config_.mlp_ratio)));
    for (std::size_t b = 0; b < config_.stages[s].blocks; ++b) {
      const std::string p = "encoder.stage" + std::to_string(s) + ".block" + std::to_string(b) + ".";
      Block blk;
      blk.heads = config_.stages[s].heads;
      blk.shift = (b % 2 == 1 && stage.side > m) ? m / 2 : 0;
      blk.norm1_gain = &store.add_constant(p + "norm1.gain", group, {dim}, T{1});
      blk.norm1_shift = &store.add_constant(p + "norm1.shift", group, {dim}, T{0});
      blk.qkv_weight = &store.add_uniform(p + "attn.qkv.weight", group, {dim, 3 * dim}, fan_in_bound(dim), seed);
      blk.qkv_bias = &store.add_uniform(p + "attn.qkv.bias", group, {3 * dim}, fan_in_bound(dim), seed);
      blk.proj_weight = &store.add_uniform(p + "attn.proj.weight", group, {dim, dim}, fan_in_bound(dim), seed);
      blk.proj_bias = &store.add_uniform(p + "attn.proj.bias", group, {dim}, fan_in_bound(dim), seed);
      if (config_.relative_bias) {
        blk.relative_bias =
            &store.add_constant(p + "attn.relative_bias", group, {span * span, blk.heads}, T{0});
      }
      blk.norm2_gain = &store.add_constant(p + "norm2.gain", group, {dim}, T{1});
      blk.norm2_shift = &store.add_constant(p + "norm2.shift", group, {dim}, T{0});
      blk.fc1_weight = &store.add_uniform(p + "mlp.fc1.weight", group, {dim, hidden}, fan_in_bound(dim), seed);
      blk.fc1_bias = &store.add_uniform(p + "mlp.fc1.bias", group, {hidden}, fan_in_bound(dim), seed);
      blk.fc2_weight = &store.add_uniform(p + "mlp.fc2.weight", group, {hidden, dim}, fan_in_bound(hidden), seed);
      blk.fc2_bias = &store.add_uniform(p + "mlp.fc2.bias", group, {dim}, fan_in_bound(hidden), seed);
      if (blk.shift > 0) {
        blk.mask = std::make_shared<const Tensor<T>>(
            shifted_window_mask<T>(stage.side, stage.side, m, blk.shift));
      }
      stage.blocks.push_back(std::move(blk));
    }
    if (s + 1 < config_.stages.size()) {
      const std::string p = "encoder.stage" + std::to_string(s) + ".merge.";
      stage.merge_weight = &store.add_uniform(p + "weight", group, {4 * dim, 2 * dim}, fan_in_bound(4 * dim), seed);
      stage.merge_bias = &store.add_uniform(p + "bias", group, {2 * dim}, fan_in_bound(4 * dim), seed);
    }
    stages_.push_back(std::move(stage));
  }
}

template <typename T>
Var<T> SwinEncoder<T>::run_block(const Block& block, const Var<T>& x, std::size_t side,
                                 std::size_t dim) const {
  Tape<T>& tape = x.tape();
  const std::size_t m = config_.window_size;
  const T eps = static_cast<T>(1e-5);

  Var<T> h = layer_norm(x, tape.param(*block.norm1_gain), tape.param(*block.norm1_shift), eps);
  Var<T> grid = reshape(h, {side, side, dim});
  const auto shift = static_cast<std::ptrdiff_t>(block.shift);
  if (shift) grid = cyclic_shift(grid, shift);

  WindowAttentionParams<T> ap{tape.param(*block.qkv_weight), tape.param(*block.qkv_bias),
                              tape.param(*block.proj_weight), tape.param(*block.proj_bias),
                              std::nullopt};
  if (block.relative_bias) ap.relative_bias = tape.param(*block.relative_bias);
  auto att = window_attention(window_partition(grid, m), block.heads, ap, block.mask.get());

  grid = window_reverse(att.out, side, side);
  if (shift) grid = cyclic_shift(grid, -shift);
  Var<T> y = add(x, reshape(grid, {side * side, dim}));

  Var<T> z = layer_norm(y, tape.param(*block.norm2_gain), tape.param(*block.norm2_shift), eps);
  z = gelu(linear(z, tape.param(*block.fc1_weight), tape.param(*block.fc1_bias)));
  z = linear(z, tape.param(*block.fc2_weight), tape.param(*block.fc2_bias));
  return add(y, z);
}

template <typename T>
EncoderOutput<T> SwinEncoder<T>::encode(const Var<T>& image) const {
  const Shape expected{config_.channels, config_.image_size, config_.image_size};
  if (image.shape() != expected) {
    throw DimensionError("encoder expects an image of shape " + shape_str(expected) + ", got " +
                         shape_str(image.shape()));
  }
  Tape<T>& tape = image.tape();
  Var<T> x = patch_embed(image, tape.param(*embed_weight_), tape.param(*embed_bias_),
                         config_.patch_size);
  for (const Stage& stage : stages_) {
    for (const Block& block : stage.blocks) x = run_block(block, x, stage.side, stage.dim);
    if (stage.merge_weight) {
      Var<T> grid = reshape(x, {stage.side, stage.side, stage.dim});
      grid = patch_merge(grid, tape.param(*stage.merge_weight), tape.param(*stage.merge_bias));
      x = reshape(grid, {grid.dim(0) * grid.dim(1), grid.dim(2)});
    }
  }
  const std::size_t side = stages_.back().side;
  return {x, side, side};
}

template <typename T>
EncoderOutput<T> SwinEncoder<T>::encode(Tape<T>& tape, const Tensor<T>& image) const {
  return encode(tape.constant(image));
}

#define CAPGEN_INSTANTIATE_ENCODER(T)                                                         \
  template WindowAttentionResult<T> window_attention<T>(const Var<T>&, std::size_t,           \
                                                        const WindowAttentionParams<T>&,      \
                                                        const Tensor<T>*);                    \
  template Var<T> patch_embed<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);   \
  template Var<T> patch_merge<T>(const Var<T>&, const Var<T>&, const Var<T>&);                \
  template class SwinEncoder<T>;

CAPGEN_INSTANTIATE_ENCODER(float)
CAPGEN_INSTANTIATE_ENCODER(double)

}  // namespace capgen
