/*
 * Copyright 2026 The Glens Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/tensor.hpp"

namespace glens {

// [0, 1] -> 8-bit with round-half-even.
inline std::uint8_t to_byte(Real v) {
  const double x = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::nearbyint(x));
}

// Writes a [C, H, W] tensor (C = 1 or 3) as an 8-bit PNG.
inline void write_png(const std::filesystem::path& path, const Tensor& image) {
  require(image.rank() == 3 && (image.dim(0) == 1 || image.dim(0) == 3), ErrorKind::kShapeMismatch,
          "write_png expects [1|3, H, W], got " + shape_str(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  require(fp != nullptr, ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(w * c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) row[x * c + ch] = to_byte(image[(ch * h + y) * w + x]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Reads an 8-bit gray or RGB PNG into a [C, H, W] tensor in [0, 1].
inline Tensor read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  require(fp != nullptr, ErrorKind::kMissingArtifact, "cannot open '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kIo, "libpng failed reading '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_expand(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const std::size_t c = png_get_channels(png, info);
  Tensor out({c, h, w});
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (std::size_t y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out[(ch * h + y) * w + x] = static_cast<Real>(row[x * c + ch] / 255.0);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

// Tiles rows of [B, C, H, W] batches into one [C, rows*(H+pad)-pad, ...]
// image; each batch is one grid row.
inline Tensor image_grid(const std::vector<Tensor>& rows, std::size_t pad = 2, Real background = 1) {
  require(!rows.empty(), ErrorKind::kInvalidArgument, "image_grid needs at least one row");
  const std::size_t c = rows[0].dim(1), h = rows[0].dim(2), w = rows[0].dim(3);
  std::size_t cols = 0;
  for (const auto& r : rows) {
    require(r.rank() == 4 && r.dim(1) == c && r.dim(2) == h && r.dim(3) == w, ErrorKind::kShapeMismatch,
            "image_grid rows must share [C, H, W]");
    cols = std::max(cols, r.dim(0));
  }
  const std::size_t gh = rows.size() * (h + pad) - pad, gw = cols * (w + pad) - pad;
  Tensor grid({c, gh, gw}, background);
  for (std::size_t ri = 0; ri < rows.size(); ++ri)
    for (std::size_t b = 0; b < rows[ri].dim(0); ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            grid[(ch * gh + ri * (h + pad) + y) * gw + b * (w + pad) + x] = rows[ri][((b * c + ch) * h + y) * w + x];
  return grid;
}

}  // namespace glens
