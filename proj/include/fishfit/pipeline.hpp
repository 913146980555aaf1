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

#include "fishfit/camera.hpp"
#include "fishfit/localization.hpp"
#include "fishfit/metrics.hpp"
#include "fishfit/optimizer.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fishfit {

inline constexpr int kConfigSchemaVersion = 1;

/**
 * Batch settings. Relative paths in a config file are resolved against the
 * file's directory; empty template/calibration paths fall back to the ones
 * named in the scene manifest.
 */
struct PipelineConfig {
  std::filesystem::path template_path;
  std::filesystem::path annotation_path;
  std::filesystem::path calibration_path;
  std::filesystem::path frames_dir;
  std::filesystem::path output_dir;
  FitConfig fit;
  std::vector<double> edges = default_edges();
  int jobs = 1;
  /// Also replace every length by its chord (arc ratio 1); for ablations.
  bool ignore_bending = false;

  /// Checks values and, when `check_paths`, that every non-empty input path exists.
  void validate(bool check_paths = true) const;
};

nlohmann::ordered_json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct ManifestFrame {
  int frame_id = 0;
  int track_id = 0;
  std::filesystem::path mask;  // absolute or relative to the scene directory
};

struct SceneManifest {
  std::filesystem::path dir;
  std::filesystem::path template_path;
  std::filesystem::path calibration_path;
  std::vector<ManifestFrame> frames;
};

SceneManifest load_manifest(const std::filesystem::path& scene_dir);

/// Everything needed to fit and measure frames of one camera.
struct FrameContext {
  TemplateMesh tmpl;
  Calibration calib;
  PlaneHomography hom;
};

FrameContext load_context(const PipelineConfig& cfg, const SceneManifest* manifest);

struct FrameOutcome {
  LengthRecord record;
  std::optional<FitResult> fit;  // empty when the frame failed before fitting finished
};

/// Fit, then localize. Never throws for per-frame problems; they end up in
/// `record.status`.
FrameOutcome process_frame(const FrameContext& ctx, const FitConfig& cfg,
                           const SoftSilhouette& mask, int frame_id, int track_id);

struct PipelineResult {
  std::vector<FrameOutcome> frames;  // manifest order
  TrackAverages tracks;
  int n_ok = 0;
};

/// Frames run concurrently over `cfg.jobs` threads; the result does not
/// depend on the job count.
PipelineResult run_pipeline(const PipelineConfig& cfg, const SceneManifest& manifest,
                            const FrameContext& ctx);

/// lengths.csv, tracks.csv and summary.json in `dir`.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& dir);

/// Replaces length by chord; used for the bending ablation.
LengthRecord without_bending(LengthRecord r);

} // namespace fishfit
