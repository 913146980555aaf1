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
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fishfit {

/// Row-major image; (x, y) is column x of row y.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }

  bool operator==(const Grid&) const = default;
};

/// Coverage in [0, 1]. Target masks use the same type.
using SoftSilhouette = Grid<double>;

/// 1 where value >= threshold.
SoftSilhouette binarize(const SoftSilhouette& img, double threshold = 0.5);

/// Intersection over union of the >= 0.5 level sets; 1 when both are empty.
double hard_iou(const SoftSilhouette& a, const SoftSilhouette& b);

/// Clamped to [0, 1] and quantized to 8 bits.
void write_png_gray(const SoftSilhouette& img, const std::filesystem::path& path);

/// Loads any PNG as grayscale in [0, 1] (alpha is ignored).
SoftSilhouette read_png_gray(const std::filesystem::path& path);

/// Target in red, prediction in green; overlap shows yellow.
void write_overlay_png(const SoftSilhouette& target, const SoftSilhouette& pred,
                       const std::filesystem::path& path);

/// Little-endian single-channel PFM; stores floats, so values round-trip as such.
void write_pfm(const Grid<float>& img, const std::filesystem::path& path);
Grid<float> read_pfm(const std::filesystem::path& path);

} // namespace fishfit
