/*
 * Copyright 2026 The fishfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fishfit/image.hpp"
#include "fishfit/common.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace fishfit {

SoftSilhouette binarize(const SoftSilhouette& img, double threshold) {
  SoftSilhouette out(img.width, img.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.data[i] = img.data[i] >= threshold ? 1.0 : 0.0;
  }
  return out;
}

double hard_iou(const SoftSilhouette& a, const SoftSilhouette& b) {
  FISHFIT_THROW_IF(!a.same_shape(b), ErrorCode::DimensionMismatch, "image sizes differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a.data[i] >= 0.5;
    const bool pb = b.data[i] >= 0.5;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) {
      std::fclose(f);
    }
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type,
                    int channels, const std::vector<std::uint8_t>& pixels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  FISHFIT_THROW_IF(!fp, ErrorCode::Io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  FISHFIT_THROW_IF(png == nullptr, ErrorCode::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

} // namespace

void write_png_gray(const SoftSilhouette& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> px(img.size());
  std::transform(img.data.begin(), img.data.end(), px.begin(), to_byte);
  write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 1, px);
}

void write_overlay_png(const SoftSilhouette& target, const SoftSilhouette& pred,
                       const std::filesystem::path& path) {
  FISHFIT_THROW_IF(!target.same_shape(pred), ErrorCode::DimensionMismatch, "image sizes differ");
  std::vector<std::uint8_t> px(target.size() * 3);
  for (std::size_t i = 0; i < target.size(); ++i) {
    px[3 * i] = target.data[i] >= 0.5 ? 255 : 0;
    px[3 * i + 1] = pred.data[i] >= 0.5 ? 255 : 0;
    px[3 * i + 2] = 0;
  }
  write_png_rows(path, target.width, target.height, PNG_COLOR_TYPE_RGB, 3, px);
}

SoftSilhouette read_png_gray(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  FISHFIT_THROW_IF(!fp, ErrorCode::Io, "cannot open " + path.string());
  png_byte sig[8];
  FISHFIT_THROW_IF(std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0,
                   ErrorCode::MalformedFile, path.string() + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  FISHFIT_THROW_IF(png == nullptr, ErrorCode::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::MalformedFile, "libpng failed reading " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (depth == 16) {
    png_set_strip_16(png);
  }
  if ((color & PNG_COLOR_MASK_ALPHA) != 0) {
    png_set_strip_alpha(png);
  }
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> buf(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = buf.data() + static_cast<std::size_t>(y) * rowbytes;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  SoftSilhouette img(width, height);
  const std::size_t channels = rowbytes / static_cast<std::size_t>(width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      img(x, y) = buf[static_cast<std::size_t>(y) * rowbytes + x * channels] / 255.0;
    }
  }
  return img;
}

void write_pfm(const Grid<float>& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write " + path.string());
  out << "Pf\n" << img.width << ' ' << img.height << "\n-1.0\n";
  // PFM stores rows bottom to top.
  for (int y = img.height - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(&img(0, y)),
              static_cast<std::streamsize>(sizeof(float) * img.width));
  }
}

Grid<float> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open " + path.string());
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  FISHFIT_THROW_IF(magic != "Pf" || width <= 0 || height <= 0 || scale >= 0.0,
                   ErrorCode::MalformedFile, path.string() + ": expected little-endian Pf header");
  in.get();
  Grid<float> img(width, height);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(&img(0, y)), static_cast<std::streamsize>(sizeof(float) * width));
  }
  FISHFIT_THROW_IF(!in, ErrorCode::MalformedFile, path.string() + ": truncated pixel data");
  return img;
}

} // namespace fishfit
