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
#include "fishfit/csv.hpp"
#include "fishfit/metrics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

namespace fishfit {
namespace {

using testing::uniform;

LengthHistogram from_mass(std::vector<double> mass, double lo = 500.0, double width = 20.0) {
  LengthHistogram h;
  h.mass = std::move(mass);
  h.edges = uniform_edges(lo, lo + width * static_cast<double>(h.mass.size()),
                          static_cast<int>(h.mass.size()));
  h.n_used = 1;
  return h;
}

std::vector<double> centers_of(const LengthHistogram& h) {
  std::vector<double> c;
  for (int i = 0; i < h.bins(); ++i) {
    c.push_back(h.center(i));
  }
  return c;
}

TEST(Histogram, DefaultEdges) {
  const auto e = default_edges();
  ASSERT_EQ(e.size(), 26u);
  EXPECT_EQ(e.front(), 500.0);
  EXPECT_EQ(e.back(), 1000.0);
  EXPECT_DOUBLE_EQ(e[1] - e[0], 20.0);
}

TEST(Histogram, OneHot) {
  const LengthHistogram h = build_histogram({565.0}, default_edges());
  for (int i = 0; i < h.bins(); ++i) {
    EXPECT_EQ(h.mass[i], i == 3 ? 1.0 : 0.0) << i;
  }
  EXPECT_EQ(h.n_used, 1);
}

TEST(Histogram, UniformSamples) {
  std::mt19937_64 rng(10);
  std::vector<double> v(100000);
  for (double& x : v) {
    x = uniform(rng, 500, 1000);
  }
  const LengthHistogram h = build_histogram(v, default_edges());
  double sum = 0.0;
  for (double m : h.mass) {
    EXPECT_NEAR(m, 0.04, 0.005);
    sum += m;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Histogram, HalfOpenBinsAndDrops) {
  const LengthHistogram h = build_histogram(
      {520.0, 1000.0, 499.999, 1000.001, std::numeric_limits<double>::quiet_NaN()},
      default_edges());
  EXPECT_EQ(h.mass[1], 0.5);
  EXPECT_EQ(h.mass[24], 0.5);
  EXPECT_EQ(h.mass[0], 0.0);
  EXPECT_EQ(h.n_used, 2);
  EXPECT_EQ(h.n_dropped, 3);
  try {
    build_histogram({10.0, 2000.0}, default_edges());
    FAIL() << "expected AllOutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllOutOfRange);
  }
  EXPECT_THROW(build_histogram({600.0}, {500.0, 500.0, 600.0}), Error);
}

TEST(Metrics, IdentityIsZero) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const LengthHistogram h = from_mass(testing::random_histogram(rng, 25));
    const HistogramMetrics m = histogram_metrics(h, h);
    EXPECT_EQ(m.bias_mm, 0.0);
    EXPECT_EQ(m.rmsd_fraction, 0.0);
    EXPECT_EQ(m.emd_mm, 0.0);
    EXPECT_LT(std::abs(m.kl), 1e-8);
  }
}

TEST(Metrics, NonIdenticalIsPositive) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const LengthHistogram a = from_mass(testing::random_histogram(rng, 25));
    const LengthHistogram b = from_mass(testing::random_histogram(rng, 25));
    const HistogramMetrics m = histogram_metrics(a, b);
    EXPECT_GT(m.rmsd_fraction, 0.0);
    EXPECT_GT(m.emd_mm, 0.0);
    EXPECT_GT(m.kl, 1e-8);
  }
}

TEST(Metrics, ShiftedDeltas) {
  for (int k = 1; k < 10; ++k) {
    std::vector<double> p(25, 0.0);
    std::vector<double> g(25, 0.0);
    p[5 + k] = 1.0;
    g[5] = 1.0;
    const HistogramMetrics m = histogram_metrics(from_mass(p), from_mass(g));
    EXPECT_NEAR(m.emd_mm, 20.0 * k, 1e-9);
    EXPECT_NEAR(m.bias_mm, 20.0 * k, 1e-9);
  }
}

TEST(Metrics, HandEvaluatedRmsdAndKl) {
  const HistogramMetrics m =
      histogram_metrics(from_mass({0.5, 0.5, 0.0}), from_mass({0.0, 0.5, 0.5}));
  EXPECT_NEAR(m.rmsd_fraction, std::sqrt(0.5 / 3.0), 1e-12);
  // 0.5 ln 2 + 0.5 ln(2/3)
  const HistogramMetrics k = histogram_metrics(from_mass({0.25, 0.75}), from_mass({0.5, 0.5}));
  EXPECT_NEAR(k.kl, 0.1438410362, 1e-8);
  // Empty predicted bin under ground-truth mass stays finite.
  EXPECT_TRUE(std::isfinite(m.kl));
  EXPECT_GT(m.kl, 10.0);
}

TEST(Metrics, EdgeMismatch) {
  try {
    histogram_metrics(from_mass({1.0, 0.0}), from_mass({1.0, 0.0}, 510.0));
    FAIL() << "expected EdgeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EdgeMismatch);
  }
  EXPECT_THROW(histogram_metrics(from_mass({1.0}), from_mass({1.0, 0.0})), Error);
}

TEST(Emd, MatchesTransportOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int bins = trial % 3 == 0 ? 25 : 1 + static_cast<int>(rng() % 30);
    const LengthHistogram a = from_mass(testing::random_histogram(rng, bins));
    const LengthHistogram b = from_mass(testing::random_histogram(rng, bins));
    const auto c = centers_of(a);
    EXPECT_NEAR(emd_1d(c, a.mass, b.mass), testing::transport_cost(c, a.mass, b.mass), 1e-9);
  }
}

TEST(Emd, NonUniformCentersMatchOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> c(12);
    double x = 0.0;
    for (double& v : c) {
      x += uniform(rng, 0.5, 40);
      v = x;
    }
    const auto p = testing::random_histogram(rng, 12);
    const auto q = testing::random_histogram(rng, 12);
    EXPECT_NEAR(emd_1d(c, p, q), testing::transport_cost(c, p, q), 1e-9);
  }
}

TEST(Emd, SymmetricAndTriangle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = centers_of(from_mass(std::vector<double>(25, 0.04)));
    const auto p = testing::random_histogram(rng, 25);
    const auto q = testing::random_histogram(rng, 25);
    const auto r = testing::random_histogram(rng, 25);
    EXPECT_NEAR(emd_1d(c, p, q), emd_1d(c, q, p), 1e-12);
    EXPECT_LE(emd_1d(c, p, r), emd_1d(c, p, q) + emd_1d(c, q, r) + 1e-12);
  }
}

TEST(Bias, TranslationCovariance) {
  std::mt19937_64 rng(6);
  std::vector<double> gt(2000);
  for (double& v : gt) {
    v = uniform(rng, 700, 900);
  }
  const auto edges = uniform_edges(400, 1200, 40);
  const LengthHistogram hg = build_histogram(gt, edges);
  // Whole-bin shifts move every sample by whole bins: exact.
  for (double delta : {-60.0, 20.0, 100.0}) {
    std::vector<double> pred = gt;
    for (double& v : pred) {
      v += delta;
    }
    const HistogramMetrics m = histogram_metrics(build_histogram(pred, edges), hg);
    EXPECT_NEAR(m.bias_mm, delta, 1e-9) << delta;
  }
  // Other shifts are resolved to within one bin width.
  for (double delta : {-37.3, 3.3, 12.9}) {
    std::vector<double> pred = gt;
    for (double& v : pred) {
      v += delta;
    }
    const HistogramMetrics m = histogram_metrics(build_histogram(pred, edges), hg);
    EXPECT_NEAR(m.bias_mm, delta, 20.0) << delta;
  }
}

LengthRecord record(int track, double length, const std::string& status = kStatusOk) {
  LengthRecord r;
  r.track_id = track;
  r.length_mm = length;
  r.status = status;
  return r;
}

TEST(Tracks, MeanPerTrack) {
  const TrackAverages a = average_track_lengths(
      {record(2, 700), record(2, 710), record(2, 690), record(5, 600, "NearParallel"),
       record(2, 5000, "PointAtInfinity"), record(1, 800)});
  ASSERT_EQ(a.tracks.size(), 2u);
  EXPECT_EQ(a.tracks[0].track_id, 1);
  EXPECT_EQ(a.tracks[0].length_mm, 800.0);
  EXPECT_EQ(a.tracks[1].track_id, 2);
  EXPECT_EQ(a.tracks[1].n_frames, 3);
  EXPECT_NEAR(a.tracks[1].length_mm, 700.0, 1e-12);
  ASSERT_EQ(a.omitted.size(), 1u);
  EXPECT_EQ(a.omitted[0], 5);
}

TEST(Tracks, MonteCarloErrorSpread) {
  // 1000 frames, 50 per track, sigma 20 mm: per-track error std near
  // 20 / sqrt(50). Pooled over replications so the estimate is tight.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 20.0);
  double sq = 0.0;
  int n = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<LengthRecord> recs;
    std::vector<double> truth(20);
    for (int t = 0; t < 20; ++t) {
      truth[t] = uniform(rng, 550, 950);
      for (int f = 0; f < 50; ++f) {
        recs.push_back(record(t, truth[t] + noise(rng)));
      }
    }
    for (const auto& tl : average_track_lengths(recs).tracks) {
      sq += std::pow(tl.length_mm - truth[tl.track_id], 2);
      ++n;
    }
  }
  EXPECT_NEAR(std::sqrt(sq / n), 20.0 / std::sqrt(50.0), 0.15);
}

TEST(Tracks, CsvRoundTripAndValueReader) {
  const auto dir = testing::scratch_dir("tracks_csv");
  const std::vector<TrackLength> t = {{0, 3, 701.25}, {4, 1, 2.0 / 3.0 * 1000.0}};
  write_tracks_csv(t, dir / "tracks.csv");
  const auto back = read_tracks_csv(dir / "tracks.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].track_id, 4);
  EXPECT_EQ(back[1].n_frames, 1);
  EXPECT_EQ(back[1].length_mm, t[1].length_mm);
  EXPECT_EQ(read_length_values(dir / "tracks.csv"), (std::vector<double>{701.25, t[1].length_mm}));

  LengthRecord ok = record(0, 640.5);
  const LengthRecord skipped = skipped_record(1, 0, "ZeroChord");
  write_lengths_csv({ok, skipped}, dir / "lengths.csv");
  EXPECT_EQ(read_length_values(dir / "lengths.csv"), (std::vector<double>{640.5}));

  std::ofstream(dir / "other.csv") << "a,b\n1,2\n";
  EXPECT_THROW(read_length_values(dir / "other.csv"), Error);
}

TEST(Report, JsonAndPlotCsv) {
  const LengthHistogram p = build_histogram({510, 530, 530}, default_edges());
  const LengthHistogram g = build_histogram({510, 510, 2000}, default_edges());
  const HistogramMetrics m = histogram_metrics(p, g);
  const auto j = metrics_report(m, p, g);
  EXPECT_EQ(j.at("schema_version").get<int>(), 1);
  EXPECT_EQ(j.at("bias_mm").get<double>(), m.bias_mm);
  EXPECT_EQ(j.at("emd_mm").get<double>(), m.emd_mm);
  EXPECT_EQ(j.at("bin_edges_mm").size(), 26u);
  EXPECT_NEAR(m.bias_mm, 40.0 / 3.0, 1e-9);

  const auto dir = testing::scratch_dir("plot_csv");
  write_plot_csv(p, g, dir / "hist.csv");
  const CsvTable t = read_csv(dir / "hist.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"bin_center_mm", "pred_mass", "gt_mass"}));
  ASSERT_EQ(t.rows.size(), 25u);
  EXPECT_EQ(parse_double(t.rows[0][0]), 510.0);
  EXPECT_NEAR(parse_double(t.rows[1][1]), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(parse_double(t.rows[0][2]), 1.0);
}

} // namespace
} // namespace fishfit
