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

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace fishfit {

/**
 * Pinhole camera without distortion. Pixel coordinates are measured at pixel
 * centers with the origin at the top-left pixel, U to the right and V down.
 * `rot` and `trans` map world (reference-plane) coordinates in millimeters
 * to camera coordinates: X_cam = rot * X_world + trans.
 */
struct CameraModel {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d trans = Eigen::Vector3d::Zero();
  int width = 0;
  int height = 0;

  /// Throws InvalidArgument / SingularIntrinsics when the invariants fail.
  void validate() const;

  [[nodiscard]] double fx() const { return k(0, 0); }
  [[nodiscard]] double fy() const { return k(1, 1); }
};

CameraModel make_camera(double focal_px, double cx, double cy, int width, int height,
                        const Eigen::Matrix3d& rot = Eigen::Matrix3d::Identity(),
                        const Eigen::Vector3d& trans = Eigen::Vector3d::Zero());

struct PlaneHomography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
};

Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& point_cam);

/// K^-1 (u, v, 1): the viewing ray through a pixel, scaled to unit depth.
Eigen::Vector3d back_project(const CameraModel& cam, const Eigen::Vector2d& uv);

/// H = K [r1 r2 t], mapping world-plane points (X, Y, 1) to image points.
PlaneHomography compose_homography(const CameraModel& cam);

Eigen::Vector2d apply_homography(const PlaneHomography& hom, const Eigen::Vector2d& p);

/**
 * Rescales a homography known up to scale so that it equals K [r1 r2 t]
 * with unit-norm rotation columns and the plane origin in front of the camera.
 */
PlaneHomography metric_homography(const CameraModel& cam, const PlaneHomography& hom);

struct PlaneCorrespondence {
  Eigen::Vector2d world;  // mm on the Z = 0 plane
  Eigen::Vector2d image;  // px
};

struct HomographyEstimate {
  PlaneHomography hom;
  double rms_px = 0.0;
};

/// Normalized DLT with h(2,2) = 1.
HomographyEstimate estimate_plane_homography(std::span<const PlaneCorrespondence> pairs);

struct Calibration {
  CameraModel camera;
  std::vector<PlaneCorrespondence> plane_correspondences;

  /// Estimated from the correspondences when present, else composed from
  /// the extrinsics.
  [[nodiscard]] PlaneHomography homography() const;
};

Calibration load_calibration(const std::filesystem::path& path);
void save_calibration(const Calibration& calib, const std::filesystem::path& path);

} // namespace fishfit
