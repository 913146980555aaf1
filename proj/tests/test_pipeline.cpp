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
#include "fishfit/pipeline.hpp"
#include "fishfit/synth.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fishfit {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

/// Small, quick-to-fit scene directory.
PopulationSpec small_population(int n_fish, int frames_per_fish) {
  PopulationSpec spec;
  spec.seed = 31;
  spec.n_fish = n_fish;
  spec.frames_per_fish = frames_per_fish;
  spec.width = 200;
  spec.height = 150;
  spec.focal_px = 500.0;
  spec.n_segments = 8;
  spec.bend_max_deg = 30.0;
  spec.jitter = {0.05, 0.05, 15.0};
  return spec;
}

fs::path make_scene(const std::string& name, const PopulationSpec& spec) {
  const fs::path dir = testing::scratch_dir(name);
  write_scene_dir(generate_population(spec), dir, &spec);
  return dir;
}

PipelineConfig quick_config(const fs::path& scene, const fs::path& out) {
  PipelineConfig cfg;
  cfg.frames_dir = scene;
  cfg.output_dir = out;
  using G = ParamGroup;
  cfg.fit.stages = {{mask_of({G::RootRot, G::RootTrans, G::RootScale}), 60},
                    {mask_of({G::RootRot, G::RootTrans, G::RootScale, G::JointRot}), 60},
                    {all_groups(), 60}};
  cfg.fit.max_iters = 180;
  return cfg;
}

PipelineResult run_dir(const PipelineConfig& cfg) {
  const SceneManifest m = load_manifest(cfg.frames_dir);
  const FrameContext ctx = load_context(cfg, &m);
  PipelineResult r = run_pipeline(cfg, m, ctx);
  write_pipeline_outputs(r, cfg.output_dir);
  return r;
}

TEST(Pipeline, ThreeFrameTrack) {
  const fs::path scene = make_scene("pipe_track", small_population(1, 3));
  const fs::path out = testing::scratch_dir("pipe_track_out");
  const PipelineResult r = run_dir(quick_config(scene, out));
  ASSERT_EQ(r.frames.size(), 3u);
  EXPECT_EQ(r.n_ok, 3);
  const auto tracks = read_tracks_csv(out / "tracks.csv");
  ASSERT_EQ(tracks.size(), 1u);
  const auto rows = read_lengths_csv(out / "lengths.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(tracks[0].length_mm, (rows[0].length_mm + rows[1].length_mm + rows[2].length_mm) / 3.0,
              1e-9);
  EXPECT_EQ(tracks[0].n_frames, 3);
  const auto truth = read_tracks_csv(scene / "truth_tracks.csv");
  EXPECT_NEAR(tracks[0].length_mm, truth[0].length_mm, 0.03 * truth[0].length_mm);
  const auto summary = read_json(out / "summary.json");
  EXPECT_EQ(summary.at("n_ok").get<int>(), 3);
  EXPECT_EQ(summary.at("frames").size(), 3u);
}

TEST(Pipeline, DeterministicAcrossRunsAndJobCounts) {
  const fs::path scene = make_scene("pipe_det", small_population(2, 2));
  const fs::path a = testing::scratch_dir("pipe_det_a");
  const fs::path b = testing::scratch_dir("pipe_det_b");
  PipelineConfig ca = quick_config(scene, a);
  PipelineConfig cb = quick_config(scene, b);
  cb.jobs = 3;
  run_dir(ca);
  run_dir(cb);
  for (const char* f : {"lengths.csv", "tracks.csv", "summary.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Pipeline, CorruptFrameOnlyTouchesItsRow) {
  const fs::path scene = make_scene("pipe_crash", small_population(2, 2));
  const fs::path clean_out = testing::scratch_dir("pipe_crash_clean");
  run_dir(quick_config(scene, clean_out));
  std::ofstream(scene / "frames/0001_mask.png", std::ios::binary) << "not a png";
  const fs::path out = testing::scratch_dir("pipe_crash_out");
  const PipelineResult r = run_dir(quick_config(scene, out));
  EXPECT_EQ(r.n_ok, 3);
  const auto clean = read_lengths_csv(clean_out / "lengths.csv");
  const auto rows = read_lengths_csv(out / "lengths.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 1) {
      EXPECT_FALSE(rows[i].ok());
      EXPECT_EQ(rows[i].frame_id, 1);
    } else {
      EXPECT_EQ(rows[i].status, clean[i].status);
      EXPECT_EQ(rows[i].length_mm, clean[i].length_mm);
    }
  }
  // Track 0 now averages one frame.
  EXPECT_EQ(read_tracks_csv(out / "tracks.csv")[0].n_frames, 1);
}

TEST(Pipeline, IgnoreBendingUsesChord) {
  LengthRecord r;
  r.chord_mm = 600.0;
  r.arc_ratio = 1.1;
  r.length_mm = 660.0;
  const LengthRecord s = without_bending(r);
  EXPECT_EQ(s.arc_ratio, 1.0);
  EXPECT_EQ(s.length_mm, 600.0);
}

TEST(PipelineConfig, JsonRoundTripAndRelativePaths) {
  const fs::path dir = testing::scratch_dir("pipe_cfg");
  fs::create_directories(dir / "scene");
  PipelineConfig cfg;
  cfg.frames_dir = "scene";
  cfg.output_dir = "out";
  cfg.jobs = 2;
  cfg.edges = {400, 600, 800};
  cfg.fit.max_iters = 900;
  std::ofstream(dir / "cfg.json") << to_json(cfg).dump(2);
  const PipelineConfig back = load_pipeline_config(dir / "cfg.json");
  EXPECT_EQ(back.frames_dir, dir / "scene");
  EXPECT_EQ(back.output_dir, dir / "out");
  EXPECT_EQ(back.jobs, 2);
  EXPECT_EQ(back.edges, cfg.edges);
  EXPECT_EQ(back.fit.max_iters, 900);
  EXPECT_NO_THROW(back.validate());

  const auto j = nlohmann::json::parse(R"({"schema_version":1,"histogram":{"lo_mm":0,"hi_mm":10,"bins":5}})");
  EXPECT_EQ(pipeline_config_from_json(j).edges, uniform_edges(0, 10, 5));
}

TEST(PipelineConfig, SchemaAndValidation) {
  for (const char* text : {R"({"jobs":1})", R"({"schema_version":2})", R"([1,2])",
                           R"({"schema_version":1,"jobs":"many"})"}) {
    try {
      pipeline_config_from_json(nlohmann::json::parse(text));
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedFile) << text;
    }
  }
  PipelineConfig cfg;
  cfg.jobs = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = PipelineConfig{};
  cfg.template_path = "/nonexistent/template.obj";
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_NO_THROW(cfg.validate(false));
}

// CLI.

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FISHFIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) {
  return "'" + p.string() + "'";
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("nosuchcommand"), 1);
  EXPECT_EQ(run_cli("fit --frames /nonexistent/mask.png --out /tmp/x"), 1);
  EXPECT_EQ(run_cli("pipeline --jobs 0 --frames /tmp"), 1);
}

TEST(Cli, SynthRejectsInvalidSpec) {
  const fs::path dir = testing::scratch_dir("cli_synth_bad");
  std::ofstream(dir / "bad.json") << R"({"n_fish": 0})";
  std::ofstream(dir / "broken.json") << R"({"n_fish": )";
  EXPECT_EQ(run_cli("synth --config " + q(dir / "bad.json") + " --out " + q(dir / "o")), 1);
  EXPECT_EQ(run_cli("synth --config " + q(dir / "broken.json") + " --out " + q(dir / "o")), 1);
  EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(Cli, SynthFitAndRenderDebug) {
  const fs::path dir = testing::scratch_dir("cli_fit");
  std::ofstream(dir / "spec.json") << R"({"n_fish": 1, "seed": 5, "bend_max_deg": 30})";
  ASSERT_EQ(run_cli("synth --config " + q(dir / "spec.json") + " --out " + q(dir / "scene")), 0);
  EXPECT_TRUE(fs::exists(dir / "scene/frames/0000_mask.png"));
  EXPECT_FALSE(fs::exists(dir / "scene/frames/0001_mask.png"));

  const std::string inputs = "--frames " + q(dir / "scene/frames/0000_mask.png") + " --template " +
                             q(dir / "scene/template.obj") + " --calib " +
                             q(dir / "scene/calib.json");
  EXPECT_EQ(run_cli("fit " + inputs + " --dry-run --out " + q(dir / "dry")), 0);
  EXPECT_FALSE(fs::exists(dir / "dry"));

  ASSERT_EQ(run_cli("fit " + inputs + " --out " + q(dir / "fit")), 0);
  for (const char* f : {"params.json", "trace.csv", "overlay.png", "lengths.csv", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / "fit" / f)) << f;
  }
  EXPECT_GE(read_json(dir / "fit/summary.json").at("hard_iou").get<double>(), 0.95);
  const auto rec = read_lengths_csv(dir / "fit/lengths.csv");
  const auto truth = read_tracks_csv(dir / "scene/truth_tracks.csv");
  EXPECT_NEAR(rec.at(0).length_mm, truth.at(0).length_mm, 0.02 * truth.at(0).length_mm);

  EXPECT_EQ(run_cli("render-debug --params " + q(dir / "fit/params.json") + " " + inputs +
                    " --out " + q(dir / "render")),
            0);
  EXPECT_TRUE(fs::exists(dir / "render/render.png"));
  EXPECT_TRUE(fs::exists(dir / "render/overlay.png"));
}

TEST(Cli, PipelineExitCodes) {
  const fs::path scene = make_scene("cli_pipe", small_population(1, 2));
  const fs::path dir = testing::scratch_dir("cli_pipe_cfg");
  PipelineConfig cfg = quick_config(scene, dir / "out");
  std::ofstream(dir / "cfg.json") << to_json(cfg).dump(2);
  EXPECT_EQ(run_cli("pipeline --config " + q(dir / "cfg.json") + " --jobs 2"), 0);
  EXPECT_EQ(read_tracks_csv(dir / "out/tracks.csv").size(), 1u);

  std::ofstream(dir / "v2.json") << R"({"schema_version": 2})";
  EXPECT_EQ(run_cli("pipeline --config " + q(dir / "v2.json") + " --frames " + q(scene) +
                    " --out " + q(dir / "v2")),
            1);

  // Every mask unreadable: the run completes but nothing succeeded.
  for (const char* f : {"frames/0000_mask.png", "frames/0001_mask.png"}) {
    std::ofstream(scene / f, std::ios::binary) << "junk";
  }
  EXPECT_EQ(run_cli("pipeline --config " + q(dir / "cfg.json") + " --out " + q(dir / "bad")), 2);
  EXPECT_TRUE(fs::exists(dir / "bad/lengths.csv"));
}

TEST(Cli, EvalMetrics) {
  const fs::path dir = testing::scratch_dir("cli_eval");
  // Ground truth from a synthetic population's per-track lengths.
  PopulationSpec spec = small_population(300, 1);
  spec.seed = 8;
  const Population pop = generate_population(spec);
  std::vector<TrackLength> gt;
  std::vector<TrackLength> shifted;
  for (std::size_t i = 0; i < pop.track_lengths_mm.size(); ++i) {
    gt.push_back({static_cast<int>(i), 1, pop.track_lengths_mm[i]});
    shifted.push_back({static_cast<int>(i), 1, pop.track_lengths_mm[i] + 10.0});
  }
  write_tracks_csv(gt, dir / "gt.csv");
  write_tracks_csv(shifted, dir / "shifted.csv");
  // Wide range so the shift drops nothing.
  std::ofstream(dir / "cfg.json") << R"({"schema_version":1,"histogram":{"lo_mm":400,"hi_mm":1100,"bins":35}})";

  ASSERT_EQ(run_cli("eval " + q(dir / "gt.csv") + " " + q(dir / "gt.csv") + " --out " +
                    q(dir / "same")),
            0);
  const auto same = read_json(dir / "same/metrics.json");
  EXPECT_EQ(same.at("bias_mm").get<double>(), 0.0);
  EXPECT_EQ(same.at("emd_mm").get<double>(), 0.0);
  EXPECT_EQ(same.at("rmsd_fraction").get<double>(), 0.0);
  EXPECT_LT(std::abs(same.at("kl").get<double>()), 1e-8);
  EXPECT_TRUE(fs::exists(dir / "same/histogram.csv"));

  ASSERT_EQ(run_cli("eval " + q(dir / "shifted.csv") + " " + q(dir / "gt.csv") + " --config " +
                    q(dir / "cfg.json") + " --out " + q(dir / "shift")),
            0);
  EXPECT_NEAR(read_json(dir / "shift/metrics.json").at("bias_mm").get<double>(), 10.0, 1.0);

  // One-hot histograms one bin apart.
  write_tracks_csv({{0, 1, 610.0}}, dir / "a.csv");
  write_tracks_csv({{0, 1, 630.0}}, dir / "b.csv");
  ASSERT_EQ(run_cli("eval " + q(dir / "a.csv") + " " + q(dir / "b.csv") + " --out " + q(dir / "hot")),
            0);
  EXPECT_NEAR(read_json(dir / "hot/metrics.json").at("emd_mm").get<double>(), 20.0, 1e-9);

  std::ofstream(dir / "junk.csv") << "x,y\n1,2\n";
  EXPECT_EQ(run_cli("eval " + q(dir / "junk.csv") + " " + q(dir / "gt.csv")), 1);
  EXPECT_EQ(run_cli("eval " + q(dir / "gt.csv")), 1);
}

} // namespace
} // namespace fishfit
