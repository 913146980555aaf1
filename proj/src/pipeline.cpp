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
#include "fishfit/image.hpp"

#include <omp.h>

#include <cmath>
#include <fstream>

namespace fishfit {

namespace fs = std::filesystem;

void PipelineConfig::validate(bool check_paths) const {
  fit.validate();
  FISHFIT_THROW_IF(jobs < 1, ErrorCode::InvalidArgument, "jobs must be at least 1");
  FISHFIT_THROW_IF(edges.size() < 2, ErrorCode::InvalidArgument, "need at least two bin edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    FISHFIT_THROW_IF(!(edges[i] < edges[i + 1]), ErrorCode::InvalidArgument,
                     "bin edges must be strictly increasing");
  }
  if (!check_paths) {
    return;
  }
  for (const fs::path* p : {&template_path, &annotation_path, &calibration_path, &frames_dir}) {
    FISHFIT_THROW_IF(!p->empty() && !fs::exists(*p), ErrorCode::Io,
                     "path does not exist: " + p->string());
  }
}

nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["paths"] = {{"template", cfg.template_path.string()},
                {"annotations", cfg.annotation_path.string()},
                {"calibration", cfg.calibration_path.string()},
                {"frames", cfg.frames_dir.string()},
                {"output", cfg.output_dir.string()}};
  j["fit"] = to_json(cfg.fit);
  j["histogram"] = {{"edges_mm", cfg.edges}};
  j["jobs"] = cfg.jobs;
  j["ignore_bending"] = cfg.ignore_bending;
  return j;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  FISHFIT_THROW_IF(!j.is_object(), ErrorCode::MalformedFile, "config must be a JSON object");
  FISHFIT_THROW_IF(!j.contains("schema_version") ||
                       j.at("schema_version") != kConfigSchemaVersion,
                   ErrorCode::MalformedFile, "unsupported or missing config schema_version");
  PipelineConfig cfg;
  try {
    auto path_of = [&](const nlohmann::json& paths, const char* key) -> fs::path {
      if (!paths.contains(key)) {
        return {};
      }
      fs::path p = paths.at(key).get<std::string>();
      if (!p.empty() && p.is_relative() && !base_dir.empty()) {
        p = base_dir / p;
      }
      return p;
    };
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      cfg.template_path = path_of(p, "template");
      cfg.annotation_path = path_of(p, "annotations");
      cfg.calibration_path = path_of(p, "calibration");
      cfg.frames_dir = path_of(p, "frames");
      cfg.output_dir = path_of(p, "output");
    }
    if (j.contains("fit")) {
      cfg.fit = fit_config_from_json(j.at("fit"));
    }
    if (j.contains("histogram")) {
      const auto& h = j.at("histogram");
      if (h.contains("edges_mm")) {
        cfg.edges = h.at("edges_mm").get<std::vector<double>>();
      } else {
        cfg.edges = uniform_edges(h.value("lo_mm", 500.0), h.value("hi_mm", 1000.0),
                                  h.value("bins", 25));
      }
    }
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.ignore_bending = j.value("ignore_bending", cfg.ignore_bending);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("bad config: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, path.parent_path());
}

SceneManifest load_manifest(const fs::path& scene_dir) {
  const fs::path path = scene_dir / "manifest.json";
  std::ifstream in(path);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open " + path.string());
  SceneManifest m;
  m.dir = scene_dir;
  try {
    nlohmann::json j;
    in >> j;
    FISHFIT_THROW_IF(j.value("schema_version", 0) != 1, ErrorCode::MalformedFile,
                     "unsupported manifest schema_version");
    if (j.contains("template")) {
      m.template_path = scene_dir / j.at("template").get<std::string>();
    }
    if (j.contains("calibration")) {
      m.calibration_path = scene_dir / j.at("calibration").get<std::string>();
    }
    for (const auto& f : j.at("frames")) {
      m.frames.push_back({f.at("frame_id").get<int>(), f.at("track_id").get<int>(),
                          scene_dir / f.at("mask").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
  return m;
}

FrameContext load_context(const PipelineConfig& cfg, const SceneManifest* manifest) {
  fs::path tmpl = cfg.template_path;
  fs::path calib = cfg.calibration_path;
  if (manifest != nullptr) {
    if (tmpl.empty()) {
      tmpl = manifest->template_path;
    }
    if (calib.empty()) {
      calib = manifest->calibration_path;
    }
  }
  FISHFIT_THROW_IF(tmpl.empty(), ErrorCode::InvalidArgument, "no template path given");
  FISHFIT_THROW_IF(calib.empty(), ErrorCode::InvalidArgument, "no calibration path given");
  FrameContext ctx;
  ctx.tmpl = load_mesh(tmpl, cfg.annotation_path);
  ctx.calib = load_calibration(calib);
  ctx.hom = ctx.calib.homography();
  return ctx;
}

LengthRecord without_bending(LengthRecord r) {
  r.arc_ratio = 1.0;
  r.length_mm = r.chord_mm;
  return r;
}

FrameOutcome process_frame(const FrameContext& ctx, const FitConfig& cfg,
                           const SoftSilhouette& mask, int frame_id, int track_id) {
  FrameOutcome out;
  try {
    const DeformParams init = initial_guess(ctx.tmpl, mask, ctx.calib.camera, ctx.hom, cfg);
    out.fit = fit_frame(ctx.tmpl, mask, ctx.calib.camera, cfg, init);
    out.record = localize_frame(ctx.tmpl, *out.fit, ctx.calib.camera, ctx.hom);
  } catch (const Error& e) {
    out.record = skipped_record(frame_id, track_id, std::string(to_string(e.code())));
  } catch (const std::exception&) {
    out.record = skipped_record(frame_id, track_id, "InternalError");
  }
  out.record.frame_id = frame_id;
  out.record.track_id = track_id;
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const SceneManifest& manifest,
                            const FrameContext& ctx) {
  cfg.validate(false);
  PipelineResult res;
  const int n = static_cast<int>(manifest.frames.size());
  res.frames.resize(n);
  // Each fit is deterministic on its own and writes only its own slot.
#pragma omp parallel for num_threads(cfg.jobs) schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    const ManifestFrame& f = manifest.frames[i];
    SoftSilhouette mask;
    try {
      mask = read_png_gray(f.mask);
    } catch (const Error& e) {
      res.frames[i].record = skipped_record(f.frame_id, f.track_id, std::string(to_string(e.code())));
      continue;
    }
    res.frames[i] = process_frame(ctx, cfg.fit, mask, f.frame_id, f.track_id);
    if (cfg.ignore_bending && res.frames[i].record.ok()) {
      res.frames[i].record = without_bending(res.frames[i].record);
    }
  }
  std::vector<LengthRecord> records;
  records.reserve(n);
  for (const auto& f : res.frames) {
    records.push_back(f.record);
    res.n_ok += f.record.ok() ? 1 : 0;
  }
  res.tracks = average_track_lengths(records);
  return res;
}

void write_pipeline_outputs(const PipelineResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<LengthRecord> records;
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (const auto& f : result.frames) {
    records.push_back(f.record);
    nlohmann::ordered_json jf;
    jf["frame_id"] = f.record.frame_id;
    jf["status"] = f.record.status;
    if (f.fit) {
      jf["hard_iou"] = f.fit->iou;
      jf["iterations"] = f.fit->iterations_run;
      jf["converged"] = f.fit->converged;
    }
    frames.push_back(jf);
  }
  write_lengths_csv(records, dir / "lengths.csv");
  write_tracks_csv(result.tracks.tracks, dir / "tracks.csv");
  nlohmann::ordered_json summary;
  summary["n_frames"] = result.frames.size();
  summary["n_ok"] = result.n_ok;
  summary["omitted_tracks"] = result.tracks.omitted;
  summary["frames"] = frames;
  std::ofstream out(dir / "summary.json");
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write summary in " + dir.string());
  out << summary.dump(2) << '\n';
}

} // namespace fishfit
