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
#include "fishfit/deformation.hpp"
#include "fishfit/image.hpp"
#include "fishfit/localization.hpp"
#include "fishfit/mesh.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fishfit {

/**
 * One ground-truth frame. Root scale and root translation of `true_params`
 * are overwritten by generate_scene so that the spine arc equals
 * `true_length_mm` and the center keypoint sits on the world plane at
 * `plane_xy_mm`. The camera extrinsics double as the plane pose.
 */
struct SceneSpec {
  DeformParams true_params = DeformParams::identity();
  double true_length_mm = 750.0;
  CameraModel camera;
  Eigen::Vector2d plane_xy_mm = Eigen::Vector2d::Zero();
  /// Pixels within this distance of the boundary may be flipped.
  double noise_px = 0.0;
  double noise_prob = 0.0;
  std::uint64_t seed = 0;
};

struct Scene {
  SceneSpec spec;
  DeformParams params;  // fully placed parameters
  DeformedMesh mesh;
  SoftSilhouette mask;
  LengthRecord truth;
};

/// Camera `distance_mm` above the world origin looking down at the Z = 0
/// plane, tilted about its x axis by `tilt_rad`.
CameraModel overhead_camera(int width, int height, double focal_px, double distance_mm,
                            double tilt_rad);

/// Joint bends about the template's dorsal axis (in-plane bending).
DeformParams bent_params(const CameraModel& cam, double yaw_rad, double bend0_rad,
                         double bend1_rad);

Scene generate_scene(const TemplateMesh& tmpl, const SceneSpec& spec);

/// Checkerboard-style corner correspondences (exact projections).
std::vector<PlaneCorrespondence> checkerboard_correspondences(const CameraModel& cam, int nx,
                                                              int ny, double square_mm);

struct TrackJitter {
  double yaw_rad = 0.0;
  double bend_rad = 0.0;
  double shift_mm = 0.0;
};

/// Frames of one fish: constant length, per-frame pose jitter drawn uniformly
/// in +-jitter from a generator seeded by `seed`.
std::vector<Scene> generate_track(const TemplateMesh& tmpl, const SceneSpec& base, double yaw_rad,
                                  double bend0_rad, double bend1_rad, const TrackJitter& jitter,
                                  int n_frames, std::uint64_t seed);

struct PopulationSpec {
  std::uint64_t seed = 1;
  int n_fish = 10;
  int frames_per_fish = 1;
  double length_mean_mm = 750.0;
  double length_std_mm = 80.0;
  double length_min_mm = 500.0;
  double length_max_mm = 1000.0;
  /// Joint bend magnitudes are uniform in [min, max] with random signs.
  double bend_min_deg = 0.0;
  double bend_max_deg = 45.0;
  /// Head direction is within this of the image x axis, either way round.
  double yaw_max_deg = 25.0;
  double shift_max_mm = 60.0;
  double noise_px = 0.0;
  double noise_prob = 0.0;
  TrackJitter jitter;
  int width = 320;
  int height = 240;
  double focal_px = 800.0;
  double distance_mm = 3000.0;
  double tilt_deg = 8.0;
  int n_segments = 16;
  int ring_vertices = 8;

  void validate() const;
};

nlohmann::ordered_json to_json(const PopulationSpec& spec);
PopulationSpec population_from_json(const nlohmann::json& j);

struct SceneFrame {
  int frame_id = 0;
  int track_id = 0;
  Scene scene;
};

struct Population {
  TemplateMesh tmpl;
  CameraModel camera;
  std::vector<SceneFrame> frames;
  std::vector<double> track_lengths_mm;  // indexed by track id
};

/// Deterministic in `spec.seed`; fish that leave the frame are redrawn.
Population generate_population(const PopulationSpec& spec);

/**
 * Writes frames/NNNN_mask.png, calib.json, manifest.json, oracle.csv,
 * truth_tracks.csv and the template (template.obj + template.json).
 */
void write_scene_dir(const Population& pop, const std::filesystem::path& dir,
                     const PopulationSpec* spec = nullptr);

} // namespace fishfit
