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

#include "capgen/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace capgen {

std::size_t AugmentConfig::resize_size() const {
  if (resize) return resize;
  return static_cast<std::size_t>(std::lround(static_cast<double>(image_size) * 8.0 / 7.0));
}

namespace {

class PpmReader {
 public:
  PpmReader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(source_ + ": malformed PPM at byte " + std::to_string(pos_) + ": " + what);
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > 1'000'000) fail(std::string(what) + " too large");
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + what);
    return v;
  }

  Tensor<float> read() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '6') fail("expected magic 'P6'");
    pos_ = 2;
    const std::size_t width = number("width");
    const std::size_t height = number("height");
    const std::size_t maxval = number("maxval");
    if (width == 0 || height == 0) fail("zero image extent");
    if (maxval == 0 || maxval > 65535) fail("maxval out of range");
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("expected whitespace before pixel data");
    }
    ++pos_;
    const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
    const std::size_t need = width * height * 3 * sample_bytes;
    if (bytes_.size() - pos_ < need) {
      fail("pixel data truncated: need " + std::to_string(need) + " bytes, have " +
           std::to_string(bytes_.size() - pos_));
    }
    Tensor<float> img({3, height, width});
    const float scale = 1.0f / static_cast<float>(maxval);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          std::size_t v = static_cast<unsigned char>(bytes_[pos_]);
          if (sample_bytes == 2) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + 1]);
          if (v > maxval) fail("sample exceeds maxval");
          pos_ += sample_bytes;
          img[(c * height + y) * width + x] = static_cast<float>(v) * scale;
        }
      }
    }
    return img;
  }

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void require_image(const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("expected a [3xHxW] image, got " + shape_str(image.shape()));
  }
}

}  // namespace

Tensor<float> parse_ppm(std::string_view bytes, const std::string& source) {
  return PpmReader(bytes, source).read();
}

Tensor<float> read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read image '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_ppm(bytes, path.string());
}

void write_ppm(const std::filesystem::path& path, const Tensor<float>& rgb) {
  require_image(rgb);
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f << "P6\n" << w << " " << h << "\n255\n";
  std::string row(w * 3, '\0');
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(rgb[(c * h + y) * w + x], 0.0f, 1.0f);
        row[x * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
      }
    }
    f.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t height, std::size_t width) {
  require_image(image);
  const std::size_t ih = image.dim(1), iw = image.dim(2);
  Tensor<float> out({3, height, width});
  const double sy = static_cast<double>(ih) / static_cast<double>(height);
  const double sx = static_cast<double>(iw) / static_cast<double>(width);
  auto coord = [](std::size_t dst, double scale, std::size_t n, std::size_t& lo, std::size_t& hi,
                  float& frac) {
    double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n - 1));
    lo = static_cast<std::size_t>(std::floor(src));
    hi = std::min(lo + 1, n - 1);
    frac = static_cast<float>(src - static_cast<double>(lo));
  };
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    float fy;
    coord(y, sy, ih, y0, y1, fy);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      float fx;
      coord(x, sx, iw, x0, x1, fx);
      for (std::size_t c = 0; c < 3; ++c) {
        const float* plane = &image[c * ih * iw];
        const float top = plane[y0 * iw + x0] + (plane[y0 * iw + x1] - plane[y0 * iw + x0]) * fx;
        const float bot = plane[y1 * iw + x0] + (plane[y1 * iw + x1] - plane[y1 * iw + x0]) * fx;
        out[(c * height + y) * width + x] = top + (bot - top) * fy;
      }
    }
  }
  return out;
}

Tensor<float> hflip(const Tensor<float>& image) {
  require_image(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  Tensor<float> out(image.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(c * h + y) * w + x] = image[(c * h + y) * w + (w - 1 - x)];
  return out;
}

Tensor<float> crop(const Tensor<float>& image, std::size_t top, std::size_t left, std::size_t size) {
  require_image(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (size == 0 || top + size > h || left + size > w) {
    throw DimensionError("crop of " + std::to_string(size) + " at (" + std::to_string(top) + ", " +
                         std::to_string(left) + ") exceeds image " + shape_str(image.shape()));
  }
  Tensor<float> out({3, size, size});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < size; ++y)
      std::copy_n(&image[(c * h + top + y) * w + left], size, &out[(c * size + y) * size]);
  return out;
}

Tensor<float> center_crop(const Tensor<float>& image, std::size_t size) {
  require_image(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (size > h || size > w) throw DimensionError("center crop larger than the image");
  return crop(image, (h - size) / 2, (w - size) / 2, size);
}

Tensor<float> normalize_image(const Tensor<float>& image, const std::array<float, 3>& mean,
                              const std::array<float, 3>& std) {
  require_image(image);
  const std::size_t plane = image.dim(1) * image.dim(2);
  Tensor<float> out(image.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = (image[c * plane + i] - mean[c]) / std[c];
  return out;
}

Tensor<float> augment(const Tensor<float>& image, const AugmentConfig& cfg, bool train_mode,
                      std::mt19937_64& rng) {
  const std::size_t side = cfg.resize_size();
  if (side < cfg.image_size) throw ConfigError("resize size is smaller than the crop size");
  Tensor<float> img = resize_bilinear(image, side, side);
  if (train_mode && cfg.enabled) {
    std::bernoulli_distribution flip(cfg.flip_p), random_crop(cfg.crop_p);
    std::uniform_int_distribution<std::size_t> offset(0, side - cfg.image_size);
    if (flip(rng)) img = hflip(img);
    if (random_crop(rng)) {
      const std::size_t top = offset(rng);
      const std::size_t left = offset(rng);
      img = crop(img, top, left, cfg.image_size);
    } else {
      img = center_crop(img, cfg.image_size);
    }
  } else {
    img = center_crop(img, cfg.image_size);
  }
  return normalize_image(img, cfg.mean, cfg.std);
}

Tensor<float> load_and_augment(const std::filesystem::path& image_file, const AugmentConfig& cfg,
                               bool train_mode, std::mt19937_64& rng) {
  return augment(read_ppm(image_file), cfg, train_mode, rng);
}

}  // namespace capgen
