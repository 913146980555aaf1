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
// fishfit command line: fit, pipeline, synth, eval, render-debug.
//
// Exit codes: 0 ok, 1 usage or input error, 2 computation failure.

#include "fishfit/image.hpp"
#include "fishfit/metrics.hpp"
#include "fishfit/pipeline.hpp"
#include "fishfit/renderer.hpp"
#include "fishfit/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace fishfit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitFailure = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile:
    case ErrorCode::Io:
    case ErrorCode::InvalidArgument:
    case ErrorCode::MissingAnnotation:
    case ErrorCode::InvalidTopology:
    case ErrorCode::EdgeMismatch:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::AllOutOfRange:
      return kExitInput;
    default:
      return kExitFailure;
  }
}

struct Common {
  std::string config;
  std::string frames;
  std::string out;
  int jobs = 0;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, Common& c, bool frames, bool jobs) {
  cmd->add_option("--config", c.config, "JSON config file");
  if (frames) {
    cmd->add_option("--frames", c.frames, "input mask or scene directory");
  }
  cmd->add_option("--out", c.out, "output directory");
  if (jobs) {
    cmd->add_option("--jobs", c.jobs, "parallel frame jobs")->check(CLI::PositiveNumber);
  }
  cmd->add_option("--seed", c.seed, "seed override");
  cmd->add_flag("--dry-run", c.dry_run, "validate inputs and exit without writing");
}

PipelineConfig pipeline_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_pipeline_config(c.config);
  if (!c.frames.empty()) {
    cfg.frames_dir = c.frames;
  }
  if (!c.out.empty()) {
    cfg.output_dir = c.out;
  }
  if (c.jobs > 0) {
    cfg.jobs = c.jobs;
  }
  if (c.seed) {
    cfg.fit.seed = *c.seed;
  }
  return cfg;
}

void write_json(const nlohmann::ordered_json& j, const fs::path& path) {
  std::ofstream out(path);
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path require_out(const fs::path& out) {
  FISHFIT_THROW_IF(out.empty(), ErrorCode::InvalidArgument, "--out is required");
  return out;
}

int cmd_fit(const Common& c, const std::string& tmpl_path, const std::string& calib_path) {
  PipelineConfig cfg = pipeline_config(c);
  if (!tmpl_path.empty()) {
    cfg.template_path = tmpl_path;
  }
  if (!calib_path.empty()) {
    cfg.calibration_path = calib_path;
  }
  FISHFIT_THROW_IF(cfg.frames_dir.empty(), ErrorCode::InvalidArgument, "--frames <mask.png> is required");
  cfg.validate();
  const fs::path out = require_out(cfg.output_dir);
  const FrameContext ctx = load_context(cfg, nullptr);
  const SoftSilhouette mask = read_png_gray(cfg.frames_dir);
  FISHFIT_THROW_IF(mask.width != ctx.calib.camera.width || mask.height != ctx.calib.camera.height,
                   ErrorCode::DimensionMismatch, "mask size does not match the calibration");
  if (c.dry_run) {
    std::cout << "config ok\n";
    return kExitOk;
  }
  const DeformParams init = initial_guess(ctx.tmpl, mask, ctx.calib.camera, ctx.hom, cfg.fit);
  FitResult fit;
  try {
    fit = fit_frame(ctx.tmpl, mask, ctx.calib.camera, cfg.fit, init);
  } catch (const FitAborted& e) {
    fs::create_directories(out);
    write_trace_csv(e.trace(), out / "trace.csv");
    throw;
  }
  fs::create_directories(out);
  save_params(fit.params, out / "params.json");
  write_trace_csv(fit.trace, out / "trace.csv");
  const DeformedMesh mesh = deform(ctx.tmpl, fit.params);
  write_overlay_png(mask, render_crisp(mesh, ctx.calib.camera),
                    out / "overlay.png");
  LengthRecord rec = localize_mesh(mesh, ctx.calib.camera, ctx.hom);
  if (cfg.ignore_bending) {
    rec = without_bending(rec);
  }
  write_lengths_csv({rec}, out / "lengths.csv");
  nlohmann::ordered_json summary;
  summary["hard_iou"] = fit.iou;
  summary["iterations"] = fit.iterations_run;
  summary["converged"] = fit.converged;
  summary["final_loss"] = fit.final_loss.total;
  summary["length_mm"] = rec.length_mm;
  summary["arc_ratio"] = rec.arc_ratio;
  write_json(summary, out / "summary.json");
  std::printf("hard_iou %.4f  length_mm %.2f  iterations %d\n", fit.iou, rec.length_mm,
              fit.iterations_run);
  return kExitOk;
}

int cmd_pipeline(const Common& c) {
  const PipelineConfig cfg = pipeline_config(c);
  FISHFIT_THROW_IF(cfg.frames_dir.empty(), ErrorCode::InvalidArgument,
                   "--frames <scene dir> is required");
  cfg.validate();
  const fs::path out = require_out(cfg.output_dir);
  const SceneManifest manifest = load_manifest(cfg.frames_dir);
  const FrameContext ctx = load_context(cfg, &manifest);
  if (c.dry_run) {
    std::cout << "config ok, " << manifest.frames.size() << " frames\n";
    return kExitOk;
  }
  const PipelineResult res = run_pipeline(cfg, manifest, ctx);
  write_pipeline_outputs(res, out);
  std::printf("%d of %zu frames ok, %zu tracks\n", res.n_ok, res.frames.size(),
              res.tracks.tracks.size());
  if (res.n_ok == 0) {
    std::cerr << "error: no frame succeeded\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_synth(const Common& c) {
  FISHFIT_THROW_IF(c.config.empty(), ErrorCode::InvalidArgument,
                   "--config <population spec> is required");
  std::ifstream in(c.config);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open " + c.config);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, c.config + ": " + e.what());
  }
  PopulationSpec spec = population_from_json(j);
  if (c.seed) {
    spec.seed = *c.seed;
  }
  spec.validate();
  const fs::path out = require_out(c.out);
  if (c.dry_run) {
    std::cout << "spec ok\n";
    return kExitOk;
  }
  const Population pop = generate_population(spec);
  write_scene_dir(pop, out, &spec);
  std::printf("%zu frames, %zu tracks\n", pop.frames.size(), pop.track_lengths_mm.size());
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& pred_path, const std::string& gt_path) {
  std::vector<double> edges = default_edges();
  if (!c.config.empty()) {
    edges = load_pipeline_config(c.config).edges;
  }
  const auto pred = build_histogram(read_length_values(pred_path), edges);
  const auto gt = build_histogram(read_length_values(gt_path), edges);
  const HistogramMetrics m = histogram_metrics(pred, gt);
  if (c.dry_run) {
    std::cout << "inputs ok\n";
    return kExitOk;
  }
  const auto report = metrics_report(m, pred, gt);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_json(report, fs::path(c.out) / "metrics.json");
    write_plot_csv(pred, gt, fs::path(c.out) / "histogram.csv");
  }
  std::printf("bias_mm %.4f  emd_mm %.4f  rmsd %.4f  kl %.6f\n", m.bias_mm, m.emd_mm,
              m.rmsd_fraction, m.kl);
  return kExitOk;
}

int cmd_render_debug(const Common& c, const std::string& params_path, const std::string& tmpl_path,
                     const std::string& calib_path) {
  PipelineConfig cfg = pipeline_config(c);
  if (!tmpl_path.empty()) {
    cfg.template_path = tmpl_path;
  }
  if (!calib_path.empty()) {
    cfg.calibration_path = calib_path;
  }
  cfg.validate();
  const fs::path out = require_out(cfg.output_dir);
  const FrameContext ctx = load_context(cfg, nullptr);
  const DeformParams params = load_params(params_path);
  std::optional<SoftSilhouette> mask;
  if (!cfg.frames_dir.empty()) {
    mask = read_png_gray(cfg.frames_dir);
  }
  if (c.dry_run) {
    std::cout << "inputs ok\n";
    return kExitOk;
  }
  const DeformedMesh mesh = deform(ctx.tmpl, params);
  const SoftSilhouette soft = render_silhouette(mesh, ctx.calib.camera, cfg.fit.render);
  fs::create_directories(out);
  write_png_gray(soft, out / "render.png");
  if (mask) {
    const SoftSilhouette crisp = render_crisp(mesh, ctx.calib.camera);
    write_overlay_png(*mask, crisp, out / "overlay.png");
    std::printf("hard_iou %.4f\n", hard_iou(binarize(*mask), crisp));
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fish length measurement by fitting a deformable template to masks"};
  app.require_subcommand(1);

  Common fit_opts;
  std::string tmpl_path;
  std::string calib_path;
  auto* fit = app.add_subcommand("fit", "fit one mask and write params, trace and overlay");
  add_common(fit, fit_opts, true, false);
  fit->add_option("--template", tmpl_path, "template .obj (overrides config)");
  fit->add_option("--calib", calib_path, "calibration JSON (overrides config)");

  Common pipe_opts;
  auto* pipe = app.add_subcommand("pipeline", "fit every frame of a scene directory");
  add_common(pipe, pipe_opts, true, true);

  Common synth_opts;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene directory");
  add_common(synth, synth_opts, false, false);

  Common eval_opts;
  std::string pred_path;
  std::string gt_path;
  auto* eval = app.add_subcommand("eval", "compare predicted and ground-truth length histograms");
  add_common(eval, eval_opts, false, false);
  eval->add_option("pred", pred_path, "predicted lengths.csv or tracks.csv")->required();
  eval->add_option("gt", gt_path, "ground-truth lengths.csv or tracks.csv")->required();

  Common render_opts;
  std::string params_path;
  auto* render = app.add_subcommand("render-debug", "render a parameter file");
  add_common(render, render_opts, true, false);
  render->add_option("--params", params_path, "params JSON")->required();
  render->add_option("--template", tmpl_path, "template .obj (overrides config)");
  render->add_option("--calib", calib_path, "calibration JSON (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit) {
      return cmd_fit(fit_opts, tmpl_path, calib_path);
    }
    if (*pipe) {
      return cmd_pipeline(pipe_opts);
    }
    if (*synth) {
      return cmd_synth(synth_opts);
    }
    if (*eval) {
      return cmd_eval(eval_opts, pred_path, gt_path);
    }
    return cmd_render_debug(render_opts, params_path, tmpl_path, calib_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
