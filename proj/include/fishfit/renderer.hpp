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
#include "fishfit/image.hpp"
#include "fishfit/mesh.hpp"

#include <array>
#include <vector>

namespace fishfit {

/**
 * Soft silhouette rasterizer settings.
 *
 * `sigma` is measured in squared normalized image units, where the longer
 * image side spans [-1, 1]. A face contributes sigmoid(+-d^2 / sigma) at a
 * pixel whose center is at distance d from the projected triangle boundary
 * (+ inside, - outside).
 */
struct RenderConfig {
  double sigma = 1e-5;
  /// Per-face transparency floor; faces below it contribute no gradient.
  double gamma_clip = 1e-7;
  /// Minimum camera-frame depth in millimeters.
  double near_z = 1.0;
  /// Outside faces with d^2 / sigma above this are skipped (sigmoid < 1e-13).
  double cull_logit = 30.0;

  void validate() const;
};

/// Projects a model-frame point (template units) to pixels.
Eigen::Vector2d project_model_point(const CameraModel& cam, const Vec3& v);

SoftSilhouette render_silhouette(const DeformedMesh& mesh, const CameraModel& cam,
                                 const RenderConfig& cfg);

/// dL/dV for every vertex given dL/dI for every pixel.
std::vector<Vec3> render_backward(const DeformedMesh& mesh, const CameraModel& cam,
                                  const RenderConfig& cfg, const SoftSilhouette& dl_dpixels);

/**
 * dI/d(uv) factors recorded by a forward pass so the backward pass does not
 * rasterize a second time. Only unclamped (pixel, face) pairs are stored.
 */
struct RenderTape {
  struct Entry {
    int pixel = 0;  // y * width + x
    int face = 0;
    Eigen::Vector2d g[3];
  };
  int width = 0;
  int height = 0;
  std::vector<std::vector<Entry>> tiles;  // fixed tile order
  std::vector<Eigen::Matrix<double, 2, 3>> duv;
  std::vector<Face> faces;
};

SoftSilhouette render_silhouette(const DeformedMesh& mesh, const CameraModel& cam,
                                 const RenderConfig& cfg, RenderTape& tape);
std::vector<Vec3> render_backward(const RenderTape& tape, const SoftSilhouette& dl_dpixels);

/// Head, center and tail pixel positions.
std::array<Eigen::Vector2d, 3> project_keypoints(const DeformedMesh& mesh, const CameraModel& cam);

/// Blur used for crisp masks: well under a hundredth of a pixel on any
/// practical image.
inline constexpr double kCrispSigma = 1e-6;

/// Binary silhouette of `mesh`, rendered at kCrispSigma and thresholded at 0.5.
SoftSilhouette render_crisp(const DeformedMesh& mesh, const CameraModel& cam);

namespace reference {

/// Single-threaded brute force over every (pixel, face) pair. Forward output
/// is bit-identical to the tiled renderer; the backward pass agrees to
/// rounding.
SoftSilhouette render_silhouette(const DeformedMesh& mesh, const CameraModel& cam,
                                 const RenderConfig& cfg);
std::vector<Vec3> render_backward(const DeformedMesh& mesh, const CameraModel& cam,
                                  const RenderConfig& cfg, const SoftSilhouette& dl_dpixels);

} // namespace reference

} // namespace fishfit
