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

// Per-(pixel, face) math shared by the tiled and the reference renderers so
// both evaluate identical floating-point expressions.

#include "fishfit/camera.hpp"
#include "fishfit/common.hpp"
#include "fishfit/mesh.hpp"
#include "fishfit/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace fishfit::raster {

struct Screen {
  std::vector<Eigen::Vector2d> uv;
  /// d(u, v)/d(model vertex), two rows per vertex.
  std::vector<Eigen::Matrix<double, 2, 3>> duv;
  double sigma_px = 0.0;
  /// Per-face pixel bounding box grown by `cull_reach`.
  std::vector<std::array<double, 4>> reach_box;
  double cull_reach = 0.0;
  /// Logit above which the transparency is certainly below gamma_clip.
  double clamp_logit = 0.0;
};

/// A pixel outside a face's reach box is certainly culled by the exact
/// test, so skipping it changes no result.
inline bool in_reach(const Screen& s, int face, const Eigen::Vector2d& p) {
  const auto& b = s.reach_box[face];
  return p.x() >= b[0] && p.x() <= b[1] && p.y() >= b[2] && p.y() <= b[3];
}

inline Screen project_mesh(const DeformedMesh& mesh, const CameraModel& cam,
                           const RenderConfig& cfg, bool with_jacobian) {
  Screen s;
  const double norm_per_px = 2.0 / std::max(cam.width, cam.height);
  s.sigma_px = cfg.sigma / (norm_per_px * norm_per_px);
  s.uv.resize(mesh.vertices.size());
  if (with_jacobian) {
    s.duv.resize(mesh.vertices.size());
  }
  const auto& k = cam.k;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 p = kModelUnitMm * mesh.vertices[i];
    FISHFIT_THROW_IF(!p.allFinite(), ErrorCode::InvalidArgument,
                     "vertex " + std::to_string(i) + " is not finite");
    FISHFIT_THROW_IF(!(p.z() > cfg.near_z), ErrorCode::MeshBehindCamera,
                     "vertex " + std::to_string(i) + " lies behind the near plane");
    const double iz = 1.0 / p.z();
    const double nu = k(0, 0) * p.x() + k(0, 1) * p.y();
    const double nv = k(1, 1) * p.y();
    s.uv[i] = Eigen::Vector2d(nu * iz + k(0, 2), nv * iz + k(1, 2));
    if (with_jacobian) {
      Eigen::Matrix<double, 2, 3> j;
      j << k(0, 0) * iz, k(0, 1) * iz, -nu * iz * iz, 0.0, k(1, 1) * iz, -nv * iz * iz;
      s.duv[i] = kModelUnitMm * j;
    }
  }
  s.clamp_logit = std::log(1.0 / cfg.gamma_clip - 1.0) + 1e-9;
  // Margin covers rounding in the squared distance.
  s.cull_reach = std::sqrt(cfg.cull_logit * s.sigma_px) * (1.0 + 1e-9) + 1e-6;
  s.reach_box.resize(mesh.faces ? mesh.faces->size() : 0);
  for (std::size_t f = 0; f < s.reach_box.size(); ++f) {
    const auto& face = (*mesh.faces)[f];
    const auto& a = s.uv[face[0]];
    const auto& b = s.uv[face[1]];
    const auto& c = s.uv[face[2]];
    s.reach_box[f] = {std::min({a.x(), b.x(), c.x()}) - s.cull_reach,
                      std::max({a.x(), b.x(), c.x()}) + s.cull_reach,
                      std::min({a.y(), b.y(), c.y()}) - s.cull_reach,
                      std::max({a.y(), b.y(), c.y()}) + s.cull_reach};
  }
  return s;
}

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Signed squared distance from p to the triangle boundary: positive
/// inside, negative outside. Optionally returns d(value)/d(a, b, c).
inline double signed_sq_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                 const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                                 Eigen::Vector2d* grad /* [3] or null */) {
  const Eigen::Vector2d* v[3] = {&a, &b, &c};
  double best = 0.0;
  int best_edge = -1;
  double best_t = 0.0;
  Eigen::Vector2d best_q;
  for (int e = 0; e < 3; ++e) {
    const Eigen::Vector2d& s0 = *v[e];
    const Eigen::Vector2d& s1 = *v[(e + 1) % 3];
    const Eigen::Vector2d dir = s1 - s0;
    const double len2 = dir.squaredNorm();
    double t = len2 > 0.0 ? (p - s0).dot(dir) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Eigen::Vector2d q = s0 + t * dir;
    const double d2 = (p - q).squaredNorm();
    if (best_edge < 0 || d2 < best) {
      best = d2;
      best_edge = e;
      best_t = t;
      best_q = q;
    }
  }
  const double area2 = cross2(b - a, c - a);
  bool inside = false;
  if (area2 != 0.0) {
    const double e0 = cross2(b - a, p - a);
    const double e1 = cross2(c - b, p - b);
    const double e2 = cross2(a - c, p - c);
    inside = area2 > 0.0 ? (e0 > 0.0 && e1 > 0.0 && e2 > 0.0)
                         : (e0 < 0.0 && e1 < 0.0 && e2 < 0.0);
  }
  const double sign = inside ? 1.0 : -1.0;
  if (grad != nullptr) {
    // Envelope theorem: the closest point parameter is stationary.
    const Eigen::Vector2d dq = 2.0 * (best_q - p) * sign;
    grad[0].setZero();
    grad[1].setZero();
    grad[2].setZero();
    grad[best_edge] += (1.0 - best_t) * dq;
    grad[(best_edge + 1) % 3] += best_t * dq;
  }
  return sign * best;
}

/// Face transparency t = max(1 - sigmoid(logit), clip), with the logit
/// passed back for the backward pass. Returns false when the face is culled.
inline bool face_transparency(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                              const Screen& screen, const RenderConfig& cfg, double& transparency,
                              bool& clamped, Eigen::Vector2d* dlogit_dverts) {
  const double s = signed_sq_distance(p, a, b, c, dlogit_dverts);
  const double logit = s / screen.sigma_px;
  if (logit < -cfg.cull_logit) {
    return false;
  }
  if (logit > screen.clamp_logit) {
    clamped = true;
    transparency = cfg.gamma_clip;
    return true;
  }
  // 1 - sigmoid(x) = sigmoid(-x), evaluated without cancellation.
  const double t = 1.0 / (1.0 + std::exp(logit));
  clamped = t < cfg.gamma_clip;
  transparency = clamped ? cfg.gamma_clip : t;
  if (dlogit_dverts != nullptr) {
    for (int k = 0; k < 3; ++k) {
      dlogit_dverts[k] /= screen.sigma_px;
    }
  }
  return true;
}

} // namespace fishfit::raster
