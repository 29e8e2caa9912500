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

// Hierarchical windowed-attention image encoder: patch embedding, blocks of
// (shifted-)window multi-head self-attention with MLPs, and 2x2 patch merging
// between stages.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capgen/ops.hpp"
#include "capgen/params.hpp"

namespace capgen {

struct StageConfig {
  std::size_t blocks = 2;
  std::size_t heads = 2;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct EncoderConfig {
  std::size_t image_size = 224;
  std::size_t patch_size = 4;
  std::size_t channels = 3;
  std::size_t embed_dim = 32;
  std::vector<StageConfig> stages{{2, 2}, {2, 4}};
  std::size_t window_size = 4;
  double mlp_ratio = 2.0;
  bool relative_bias = true;

  /// Throws ConfigError when an extent does not divide.
  void validate() const;

  std::size_t grid_side(std::size_t stage) const;
  std::size_t stage_dim(std::size_t stage) const;
  std::size_t output_dim() const { return stage_dim(stages.size() - 1); }
  std::size_t output_side() const { return grid_side(stages.size() - 1); }
  std::size_t output_tokens() const { return output_side() * output_side(); }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// The encoder's feature grid, flattened row-major to [L×D].
template <typename T>
struct EncoderOutput {
  Var<T> features;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  std::size_t locations() const { return grid_h * grid_w; }
  std::size_t width() const { return features.dim(1); }
};

// ---------------------------------------------------------------------------
// Index maps. Row maps address tokens of a row-major Hg×Wg grid; out[i] takes
// input row map[i].
// ---------------------------------------------------------------------------

/// Element map turning a [C×S×S] image into [(S/p)²×(C·p·p)] patch rows.
/// Column order within a row is (channel, row-in-patch, col-in-patch).
Index patch_index(std::size_t channels, std::size_t image_size, std::size_t patch);

/// Token order after partitioning into M×M windows (window-major, then offset within window).
Index window_partition_rows(std::size_t grid_h, std::size_t grid_w, std::size_t window);

/// Inverse of window_partition_rows.
Index window_reverse_rows(std::size_t grid_h, std::size_t grid_w, std::size_t window);

/// Circular roll by (-shift, -shift): token (r, c) moves to ((r - s) mod H, (c - s) mod W).
/// A negative shift rolls the other way.
Index cyclic_shift_rows(std::size_t grid_h, std::size_t grid_w, std::ptrdiff_t shift);

/// For 2×2 merging: output token (r, c) concatenates input tokens
/// (2r, 2c), (2r+1, 2c), (2r, 2c+1), (2r+1, 2c+1).
Index patch_merge_rows(std::size_t grid_h, std::size_t grid_w);

/// Expands a row map over rows of width `width` into an element map.
Index expand_rows(const Index& rows, std::size_t width);

/// Offset into the (2M-1)² relative-position table for every (query, key)
/// pair of an M×M window, flattened as [M²×M²].
Index relative_position_index(std::size_t window);

/// Additive attention mask for shifted windows, [num_windows×M²×M²]:
/// 0 between tokens from the same pre-shift region, -1e9 otherwise.
template <typename T>
Tensor<T> shifted_window_mask(std::size_t grid_h, std::size_t grid_w, std::size_t window,
                              std::size_t shift);

constexpr double kMaskedScore = -1e9;

// ---------------------------------------------------------------------------
// Differentiable building blocks
// ---------------------------------------------------------------------------

template <typename T>
Var<T> window_partition(const Var<T>& grid, std::size_t window) {
  detail::require_rank("window_partition", grid.shape(), 3);
  const std::size_t h = grid.dim(0), w = grid.dim(1), d = grid.dim(2);
  auto rows = window_partition_rows(h, w, window);
  const std::size_t nw = (h / window) * (w / window);
  return gather(grid, expand_rows(rows, d), {nw, window * window, d});
}

template <typename T>
Var<T> window_reverse(const Var<T>& windows, std::size_t grid_h, std::size_t grid_w) {
  detail::require_rank("window_reverse", windows.shape(), 3);
  const std::size_t m2 = windows.dim(1), d = windows.dim(2);
  std::size_t window = 0;
  while (window * window < m2) ++window;
  if (window * window != m2 || windows.dim(0) * m2 != grid_h * grid_w) {
    throw DimensionError("window_reverse: windows " + shape_str(windows.shape()) +
                         " do not tile a " + std::to_string(grid_h) + "x" +
                         std::to_string(grid_w) + " grid");
  }
  auto rows = window_reverse_rows(grid_h, grid_w, window);
  return gather(windows, expand_rows(rows, d), {grid_h, grid_w, d});
}

template <typename T>
Var<T> cyclic_shift(const Var<T>& grid, std::ptrdiff_t shift) {
  detail::require_rank("cyclic_shift", grid.shape(), 3);
  const std::size_t h = grid.dim(0), w = grid.dim(1), d = grid.dim(2);
  return gather(grid, expand_rows(cyclic_shift_rows(h, w, shift), d), {h, w, d});
}

template <typename T>
struct WindowAttentionParams {
  Var<T> qkv_weight;   // [D×3D]
  Var<T> qkv_bias;     // 3D values
  Var<T> proj_weight;  // [D×D]
  Var<T> proj_bias;    // D values
  std::optional<Var<T>> relative_bias;  // [(2M-1)²×heads]
};

template <typename T>
struct WindowAttentionResult {
  Var<T> out;      // [W×M²×D]
  Var<T> weights;  // [W·heads×M²×M²], rows sum to 1
};

/// Multi-head scaled dot-product attention inside each window.
/// `mask`, when given, is [W×M²×M²] and is added to every head's scores.
template <typename T>
WindowAttentionResult<T> window_attention(const Var<T>& tokens, std::size_t heads,
                                          const WindowAttentionParams<T>& params,
                                          const Tensor<T>* mask);

/// Linear embedding of non-overlapping patches of a [C×S×S] image → [(S/p)²×D].
template <typename T>
Var<T> patch_embed(const Var<T>& image, const Var<T>& weight, const Var<T>& bias,
                   std::size_t patch);

/// [H×W×D] → [(H/2)×(W/2)×2D]: concatenate 2×2 neighborhoods and project 4D → 2D.
template <typename T>
Var<T> patch_merge(const Var<T>& grid, const Var<T>& weight, const Var<T>& bias);

template <typename T>
class SwinEncoder {
 public:
  /// Registers all encoder parameters (group "encoder") in `store`.
  SwinEncoder(EncoderConfig config, ParameterStore<T>& store, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }

  /// `image` is a normalized [C×S×S] tensor already on `tape`.
  EncoderOutput<T> encode(const Var<T>& image) const;

  /// Convenience: places the image on the tape and encodes it.
  EncoderOutput<T> encode(Tape<T>& tape, const Tensor<T>& image) const;

 private:
  struct Block {
    std::size_t heads = 0;
    std::size_t shift = 0;
    Parameter<T>* norm1_gain;
    Parameter<T>* norm1_shift;
    Parameter<T>* qkv_weight;
    Parameter<T>* qkv_bias;
    Parameter<T>* proj_weight;
    Parameter<T>* proj_bias;
    Parameter<T>* relative_bias = nullptr;
    Parameter<T>* norm2_gain;
    Parameter<T>* norm2_shift;
    Parameter<T>* fc1_weight;
    Parameter<T>* fc1_bias;
    Parameter<T>* fc2_weight;
    Parameter<T>* fc2_bias;
    std::shared_ptr<const Tensor<T>> mask;  // only for shifted blocks
  };
  struct Stage {
    std::size_t side = 0;
    std::size_t dim = 0;
    std::vector<Block> blocks;
    Parameter<T>* merge_weight = nullptr;  // null on the last stage
    Parameter<T>* merge_bias = nullptr;
  };

  Var<T> run_block(const Block& block, const Var<T>& x, std::size_t side, std::size_t dim) const;

  EncoderConfig config_;
  Parameter<T>* embed_weight_;
  Parameter<T>* embed_bias_;
  std::vector<Stage> stages_;
};

}  // namespace capgen
