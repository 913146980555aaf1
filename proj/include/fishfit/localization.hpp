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
#include "fishfit/mesh.hpp"
#include "fishfit/optimizer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fishfit {

/// Keypoints in the tmp frame, millimeters, camera axes.
struct RelativeKeypoints {
  Vec3 h = Vec3::Zero();
  Vec3 c = Vec3::Zero();
  Vec3 t = Vec3::Zero();
};

/// Camera-frame keypoints in millimeters.
struct AbsoluteKeypoints {
  Vec3 h_abs = Vec3::Zero();
  Vec3 c_abs = Vec3::Zero();
  Vec3 t_abs = Vec3::Zero();
};

inline constexpr const char* kStatusOk = "ok";

struct LengthRecord {
  int frame_id = 0;
  int track_id = 0;
  AbsoluteKeypoints keypoints;
  double chord_mm = 0.0;
  double arc_ratio = 1.0;
  double length_mm = 0.0;
  /// "ok", or the error name for a skipped frame.
  std::string status = kStatusOk;

  [[nodiscard]] bool ok() const { return status == kStatusOk; }
};

struct CenterDepth {
  double z = 0.0;
  Vec3 point = Vec3::Zero();                      // C', camera frame
  Eigen::Vector2d world = Eigen::Vector2d::Zero();  // on the reference plane
};

/**
 * Intersects the viewing ray through `c2d` with the reference plane.
 * `hom` must be metric, i.e. exactly K [r1 r2 t] (see metric_homography).
 */
CenterDepth center_depth(const PlaneHomography& hom, const CameraModel& cam,
                         const Eigen::Vector2d& c2d);

/// Model-frame keypoints shifted so c lands on c_abs, offsets in millimeters.
RelativeKeypoints to_tmp_frame(const Vec3& h, const Vec3& c, const Vec3& t, const Vec3& c_abs);

/**
 * Least-squares meeting point of the ray m * ray_dir (m > 0 not enforced)
 * and the line a * line_a + (1 - a) * line_b: the midpoint of the closest
 * points on each.
 */
Vec3 intersect_ray_line(const Vec3& ray_dir, const Vec3& line_a, const Vec3& line_b);

/// Spine polyline over head-tail chord on `mesh`, applied to |H'T'|.
LengthRecord measure_length(const DeformedMesh& mesh, const AbsoluteKeypoints& abs_kp);

/// Full closed-form chain on an already deformed (fitted) mesh.
LengthRecord localize_mesh(const DeformedMesh& mesh, const CameraModel& cam,
                           const PlaneHomography& hom);

LengthRecord localize_frame(const TemplateMesh& tmpl, const FitResult& fit, const CameraModel& cam,
                            const PlaneHomography& hom);

/// Record for a frame that could not be measured.
LengthRecord skipped_record(int frame_id, int track_id, const std::string& status);

void write_lengths_csv(const std::vector<LengthRecord>& records, const std::filesystem::path& path);
std::vector<LengthRecord> read_lengths_csv(const std::filesystem::path& path);

} // namespace fishfit
