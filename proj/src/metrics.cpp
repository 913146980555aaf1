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
#include "fishfit/metrics.hpp"
#include "fishfit/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fishfit {

std::vector<double> uniform_edges(double lo, double hi, int bins) {
  FISHFIT_THROW_IF(bins < 1 || !(hi > lo), ErrorCode::InvalidArgument, "bad histogram range");
  std::vector<double> e(bins + 1);
  const double w = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) {
    e[i] = lo + w * i;
  }
  e[bins] = hi;
  return e;
}

std::vector<double> default_edges() {
  return uniform_edges(500.0, 1000.0, 25);
}

namespace {

void check_edges(const std::vector<double>& edges) {
  FISHFIT_THROW_IF(edges.size() < 2, ErrorCode::InvalidArgument, "need at least two bin edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    FISHFIT_THROW_IF(!(edges[i] < edges[i + 1]), ErrorCode::InvalidArgument,
                     "bin edges must be strictly increasing");
  }
}

} // namespace

LengthHistogram build_histogram(const std::vector<double>& lengths_mm,
                                const std::vector<double>& edges) {
  check_edges(edges);
  LengthHistogram h;
  h.edges = edges;
  const int nb = static_cast<int>(edges.size()) - 1;
  std::vector<long long> counts(nb, 0);
  for (double l : lengths_mm) {
    if (!std::isfinite(l) || l < edges.front() || l > edges.back()) {
      ++h.n_dropped;
      continue;
    }
    // upper_bound gives the first edge > l, so a value on an interior edge
    // lands in the bin to its right.
    int bin = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), l) - edges.begin()) - 1;
    bin = std::min(bin, nb - 1);
    ++counts[bin];
    ++h.n_used;
  }
  FISHFIT_THROW_IF(h.n_used == 0, ErrorCode::AllOutOfRange,
                   "no length falls inside the histogram range");
  h.mass.resize(nb);
  for (int i = 0; i < nb; ++i) {
    h.mass[i] = static_cast<double>(counts[i]) / h.n_used;
  }
  return h;
}

double emd_1d(const std::vector<double>& centers, const std::vector<double>& p,
              const std::vector<double>& q) {
  FISHFIT_THROW_IF(centers.size() != p.size() || p.size() != q.size(), ErrorCode::DimensionMismatch,
                   "histogram sizes differ");
  double cp = 0.0;
  double cq = 0.0;
  double emd = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    cp += p[i];
    cq += q[i];
    emd += std::abs(cp - cq) * (centers[i + 1] - centers[i]);
  }
  return emd;
}

HistogramMetrics histogram_metrics(const LengthHistogram& pred, const LengthHistogram& gt) {
  FISHFIT_THROW_IF(pred.edges != gt.edges, ErrorCode::EdgeMismatch,
                   "histograms use different bin edges");
  const int nb = pred.bins();
  FISHFIT_THROW_IF(nb < 1 || gt.bins() != nb, ErrorCode::DimensionMismatch,
                   "histogram mass does not match its edges");
  HistogramMetrics m;
  std::vector<double> centers(nb);
  double mean_p = 0.0;
  double mean_g = 0.0;
  double sq = 0.0;
  double zp = 0.0;
  double zg = 0.0;
  for (int i = 0; i < nb; ++i) {
    centers[i] = pred.center(i);
    mean_p += centers[i] * pred.mass[i];
    mean_g += centers[i] * gt.mass[i];
    const double d = pred.mass[i] - gt.mass[i];
    sq += d * d;
    zp += pred.mass[i] + kKlEpsilon;
    zg += gt.mass[i] + kKlEpsilon;
  }
  m.bias_mm = mean_p - mean_g;
  m.rmsd_fraction = std::sqrt(sq / nb);
  for (int i = 0; i < nb; ++i) {
    const double p = (pred.mass[i] + kKlEpsilon) / zp;
    const double g = (gt.mass[i] + kKlEpsilon) / zg;
    m.kl += g * std::log(g / p);
  }
  m.emd_mm = emd_1d(centers, pred.mass, gt.mass);
  return m;
}

TrackAverages average_track_lengths(const std::vector<LengthRecord>& records) {
  struct Acc {
    double sum = 0.0;
    int n = 0;
  };
  std::map<int, Acc> acc;
  for (const auto& r : records) {
    Acc& a = acc[r.track_id];
    if (r.ok() && std::isfinite(r.length_mm)) {
      a.sum += r.length_mm;
      ++a.n;
    }
  }
  TrackAverages out;
  for (const auto& [id, a] : acc) {
    if (a.n == 0) {
      out.omitted.push_back(id);
    } else {
      out.tracks.push_back({id, a.n, a.sum / a.n});
    }
  }
  return out;
}

namespace {

const std::vector<std::string> kTrackColumns = {"track_id", "n_frames", "length_mm"};

} // namespace

void write_tracks_csv(const std::vector<TrackLength>& tracks, const std::filesystem::path& path) {
  CsvWriter out(path, kTrackColumns);
  for (const auto& t : tracks) {
    out.row({std::to_string(t.track_id), std::to_string(t.n_frames), format_double(t.length_mm)});
  }
}

std::vector<TrackLength> read_tracks_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  FISHFIT_THROW_IF(table.header != kTrackColumns, ErrorCode::MalformedFile,
                   path.string() + " does not have the tracks schema");
  std::vector<TrackLength> out;
  for (const auto& row : table.rows) {
    out.push_back({parse_int(row[0]), parse_int(row[1]), parse_double(row[2])});
  }
  return out;
}

std::vector<double> read_length_values(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  std::vector<double> out;
  if (table.header == kTrackColumns) {
    for (const auto& t : read_tracks_csv(path)) {
      out.push_back(t.length_mm);
    }
    return out;
  }
  for (const auto& r : read_lengths_csv(path)) {
    if (r.ok()) {
      out.push_back(r.length_mm);
    }
  }
  return out;
}

nlohmann::ordered_json metrics_report(const HistogramMetrics& m, const LengthHistogram& pred,
                                      const LengthHistogram& gt) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["bias_mm"] = m.bias_mm;
  j["rmsd_fraction"] = m.rmsd_fraction;
  j["kl"] = m.kl;
  j["emd_mm"] = m.emd_mm;
  j["bin_edges_mm"] = pred.edges;
  j["pred"] = {{"n_used", pred.n_used}, {"n_dropped", pred.n_dropped}};
  j["gt"] = {{"n_used", gt.n_used}, {"n_dropped", gt.n_dropped}};
  return j;
}

void write_plot_csv(const LengthHistogram& pred, const LengthHistogram& gt,
                    const std::filesystem::path& path) {
  FISHFIT_THROW_IF(pred.edges != gt.edges, ErrorCode::EdgeMismatch,
                   "histograms use different bin edges");
  CsvWriter out(path, {"bin_center_mm", "pred_mass", "gt_mass"});
  for (int i = 0; i < pred.bins(); ++i) {
    out.row({format_double(pred.center(i)), format_double(pred.mass[i]),
             format_double(gt.mass[i])});
  }
}

} // namespace fishfit
