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

#include "fishfit/localization.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace fishfit {

/// Normalized length distribution. Bin i covers [edges[i], edges[i+1]); the
/// last bin also includes its upper edge.
struct LengthHistogram {
  std::vector<double> edges;
  std::vector<double> mass;
  int n_used = 0;
  int n_dropped = 0;

  [[nodiscard]] int bins() const { return static_cast<int>(mass.size()); }
  [[nodiscard]] double center(int i) const { return 0.5 * (edges[i] + edges[i + 1]); }
};

std::vector<double> uniform_edges(double lo, double hi, int bins);
/// 25 bins of 20 mm over [500, 1000].
std::vector<double> default_edges();

/// Non-finite lengths count as dropped.
LengthHistogram build_histogram(const std::vector<double>& lengths_mm,
                                const std::vector<double>& edges);

struct HistogramMetrics {
  double bias_mm = 0.0;
  double rmsd_fraction = 0.0;
  double kl = 0.0;
  double emd_mm = 0.0;
};

inline constexpr double kKlEpsilon = 1e-10;

HistogramMetrics histogram_metrics(const LengthHistogram& pred, const LengthHistogram& gt);

/// 1-D earth mover's distance with the mass of each bin at its center.
double emd_1d(const std::vector<double>& centers, const std::vector<double>& p,
              const std::vector<double>& q);

struct TrackLength {
  int track_id = 0;
  int n_frames = 0;
  double length_mm = 0.0;
};

struct TrackAverages {
  std::vector<TrackLength> tracks;  // ascending track id
  std::vector<int> omitted;         // tracks without a usable frame
};

/// Mean length per track over records with status "ok".
TrackAverages average_track_lengths(const std::vector<LengthRecord>& records);

void write_tracks_csv(const std::vector<TrackLength>& tracks, const std::filesystem::path& path);
std::vector<TrackLength> read_tracks_csv(const std::filesystem::path& path);

/// Lengths from either a per-frame lengths CSV (usable rows only) or a
/// per-track CSV, recognized by header.
std::vector<double> read_length_values(const std::filesystem::path& path);

nlohmann::ordered_json metrics_report(const HistogramMetrics& m, const LengthHistogram& pred,
                                      const LengthHistogram& gt);

/// bin_center, pred_mass, gt_mass
void write_plot_csv(const LengthHistogram& pred, const LengthHistogram& gt,
                    const std::filesystem::path& path);

} // namespace fishfit
