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
#include "fishfit/renderer.hpp"
#include "raster_kernel.hpp"

#include <cmath>

namespace fishfit {

void RenderConfig::validate() const {
  FISHFIT_THROW_IF(!(sigma > 0.0), ErrorCode::InvalidArgument, "sigma must be positive");
  FISHFIT_THROW_IF(!(near_z > 0.0), ErrorCode::InvalidArgument, "near_z must be positive");
  FISHFIT_THROW_IF(!(gamma_clip > 0.0 && gamma_clip < 1.0), ErrorCode::InvalidArgument,
                   "gamma_clip must lie in (0, 1)");
  FISHFIT_THROW_IF(!(cull_logit > 0.0), ErrorCode::InvalidArgument, "cull_logit must be positive");
}

Eigen::Vector2d project_model_point(const CameraModel& cam, const Vec3& v) {
  return project(cam, kModelUnitMm * v);
}

std::array<Eigen::Vector2d, 3> project_keypoints(const DeformedMesh& mesh, const CameraModel& cam) {
  const auto& kp = mesh.keypoints;
  return {project_model_point(cam, mesh.vertices[kp.head]),
          project_model_point(cam, mesh.vertices[kp.center]),
          project_model_point(cam, mesh.vertices[kp.tail])};
}

namespace {

constexpr int kTile = 8;

/// Faces that may reach each tile, in ascending face order.
struct Bins {
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<int>> faces;
};

Bins bin_faces(const raster::Screen& s, const std::vector<Face>& faces, const CameraModel& cam) {
  Bins bins;
  bins.tiles_x = (cam.width + kTile - 1) / kTile;
  bins.tiles_y = (cam.height + kTile - 1) / kTile;
  bins.faces.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& box = s.reach_box[f];
    const double x0 = box[0];
    const double x1 = box[1];
    const double y0 = box[2];
    const double y1 = box[3];
    if (x1 < 0.0 || y1 < 0.0 || x0 > cam.width - 1 || y0 > cam.height - 1) {
      continue;
    }
    const int tx0 = std::max(0, static_cast<int>(std::floor(x0)) / kTile);
    const int tx1 = std::min(bins.tiles_x - 1, static_cast<int>(std::ceil(x1)) / kTile);
    const int ty0 = std::max(0, static_cast<int>(std::floor(y0)) / kTile);
    const int ty1 = std::min(bins.tiles_y - 1, static_cast<int>(std::ceil(y1)) / kTile);
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) {
        bins.faces[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(static_cast<int>(f));
      }
    }
  }
  return bins;
}

struct FaceHit {
  int face = 0;
  double t = 1.0;
  Eigen::Vector2d g[3];
};

/// Product of clamped transparencies over the face list.
double pixel_transparency(const Eigen::Vector2d& p, const std::vector<int>& list,
                          const std::vector<Face>& faces, const raster::Screen& s,
                          const RenderConfig& cfg) {
  double prod = 1.0;
  for (int f : list) {
    if (!raster::in_reach(s, f, p)) {
      continue;
    }
    double t = 1.0;
    bool clamped = false;
    if (raster::face_transparency(p, s.uv[faces[f][0]], s.uv[faces[f][1]], s.uv[faces[f][2]],
                                  s, cfg, t, clamped, nullptr)) {
      prod *= t;
    }
  }
  return prod;
}

/// Transparency product of one pixel; unclamped faces are left in `hits`.
double pixel_hits(const Eigen::Vector2d& p, const std::vector<int>& list,
                  const std::vector<Face>& faces, const raster::Screen& s,
                  const RenderConfig& cfg, std::vector<FaceHit>& hits) {
  hits.clear();
  double prod = 1.0;
  for (int f : list) {
    if (!raster::in_reach(s, f, p)) {
      continue;
    }
    FaceHit h;
    bool clamped = false;
    const auto& face = faces[f];
    if (!raster::face_transparency(p, s.uv[face[0]], s.uv[face[1]], s.uv[face[2]], s, cfg,
                                   h.t, clamped, h.g)) {
      continue;
    }
    prod *= h.t;
    if (!clamped) {
      h.face = f;
      hits.push_back(h);
    }
  }
  return prod;
}

std::vector<Vec3> lift_gradients(const raster::Screen& s, const std::vector<Eigen::Vector2d>& guv) {
  std::vector<Vec3> out(guv.size());
  for (std::size_t i = 0; i < guv.size(); ++i) {
    out[i] = s.duv[i].transpose() * guv[i];
  }
  return out;
}

const std::vector<Face>& faces_of(const DeformedMesh& mesh) {
  static const std::vector<Face> kEmpty;
  return mesh.faces ? *mesh.faces : kEmpty;
}

} // namespace

namespace {

/// Shared tiled forward pass; records gradient factors when `tape` is set.
SoftSilhouette render_tiled(const DeformedMesh& mesh, const CameraModel& cam,
                            const RenderConfig& cfg, RenderTape* tape) {
  cfg.validate();
  SoftSilhouette img(cam.width, cam.height, 0.0);
  const auto& faces = faces_of(mesh);
  if (tape) {
    tape->width = cam.width;
    tape->height = cam.height;
    tape->tiles.clear();
    tape->duv.clear();
    tape->faces = faces;
  }
  if (faces.empty()) {
    if (tape) {
      tape->duv.assign(mesh.vertices.size(), Eigen::Matrix<double, 2, 3>::Zero());
    }
    return img;
  }
  raster::Screen s = raster::project_mesh(mesh, cam, cfg, tape != nullptr);
  const Bins bins = bin_faces(s, faces, cam);
  const int ntiles = bins.tiles_x * bins.tiles_y;
  if (tape) {
    tape->tiles.resize(ntiles);
  }
#pragma omp parallel for schedule(dynamic, 4)
  for (int tile = 0; tile < ntiles; ++tile) {
    const auto& list = bins.faces[tile];
    if (list.empty()) {
      continue;
    }
    const int tx = tile % bins.tiles_x;
    const int ty = tile / bins.tiles_x;
    const int xend = std::min(cam.width, (tx + 1) * kTile);
    const int yend = std::min(cam.height, (ty + 1) * kTile);
    std::vector<FaceHit> hits;
    for (int y = ty * kTile; y < yend; ++y) {
      for (int x = tx * kTile; x < xend; ++x) {
        const Eigen::Vector2d p(x, y);
        if (!tape) {
          img(x, y) = 1.0 - pixel_transparency(p, list, faces, s, cfg);
          continue;
        }
        const double prod = pixel_hits(p, list, faces, s, cfg, hits);
        img(x, y) = 1.0 - prod;
        auto& out = tape->tiles[tile];
        for (const FaceHit& h : hits) {
          RenderTape::Entry e;
          e.pixel = y * cam.width + x;
          e.face = h.face;
          // I = 1 - prod t_f and dt_f/dlogit = -t_f (1 - t_f), so
          // dI/dlogit = prod (1 - t_f).
          const double w = prod * (1.0 - h.t);
          for (int k = 0; k < 3; ++k) {
            e.g[k] = w * h.g[k];
          }
          out.push_back(e);
        }
      }
    }
  }
  if (tape) {
    tape->duv = std::move(s.duv);
  }
  return img;
}

} // namespace

SoftSilhouette render_silhouette(const DeformedMesh& mesh, const CameraModel& cam,
                                 const RenderConfig& cfg) {
  return render_tiled(mesh, cam, cfg, nullptr);
}

SoftSilhouette render_silhouette(const DeformedMesh& mesh, const CameraModel& cam,
                                 const RenderConfig& cfg, RenderTape& tape) {
  return render_tiled(mesh, cam, cfg, &tape);
}

std::vector<Vec3> render_backward(const RenderTape& tape, const SoftSilhouette& dl_dpixels) {
  FISHFIT_THROW_IF(dl_dpixels.width != tape.width || dl_dpixels.height != tape.height,
                   ErrorCode::DimensionMismatch, "gradient image does not match the tape");
  // Serial replay in tile order keeps the sum independent of the thread count.
  std::vector<Eigen::Vector2d> guv(tape.duv.size(), Eigen::Vector2d::Zero());
  for (const auto& tile : tape.tiles) {
    for (const auto& e : tile) {
      const double dl = dl_dpixels.data[e.pixel];
      if (dl == 0.0) {
        continue;
      }
      const auto& face = tape.faces[e.face];
      for (int k = 0; k < 3; ++k) {
        guv[face[k]] += dl * e.g[k];
      }
    }
  }
  std::vector<Vec3> out(guv.size());
  for (std::size_t i = 0; i < guv.size(); ++i) {
    out[i] = tape.duv[i].transpose() * guv[i];
  }
  return out;
}

std::vector<Vec3> render_backward(const DeformedMesh& mesh, const CameraModel& cam,
                                  const RenderConfig& cfg, const SoftSilhouette& dl_dpixels) {
  FISHFIT_THROW_IF(dl_dpixels.width != cam.width || dl_dpixels.height != cam.height,
                   ErrorCode::DimensionMismatch, "gradient image does not match the camera");
  RenderTape tape;
  render_tiled(mesh, cam, cfg, &tape);
  return render_backward(tape, dl_dpixels);
}

SoftSilhouette render_crisp(const DeformedMesh& mesh, const CameraModel& cam) {
  RenderConfig cfg;
  cfg.sigma = kCrispSigma;
  return binarize(render_silhouette(mesh, cam, cfg));
}

namespace reference {

SoftSilhouette render_silhouette(const DeformedMesh& mesh, const CameraModel& cam,
                                 const RenderConfig& cfg) {
  cfg.validate();
  SoftSilhouette img(cam.width, cam.height, 0.0);
  const auto& faces = faces_of(mesh);
  if (faces.empty()) {
    return img;
  }
  const raster::Screen s = raster::project_mesh(mesh, cam, cfg, false);
  std::vector<int> all(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    all[f] = static_cast<int>(f);
  }
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      img(x, y) = 1.0 - pixel_transparency(Eigen::Vector2d(x, y), all, faces, s, cfg);
    }
  }
  return img;
}

std::vector<Vec3> render_backward(const DeformedMesh& mesh, const CameraModel& cam,
                                  const RenderConfig& cfg, const SoftSilhouette& dl_dpixels) {
  cfg.validate();
  FISHFIT_THROW_IF(dl_dpixels.width != cam.width || dl_dpixels.height != cam.height,
                   ErrorCode::DimensionMismatch, "gradient image does not match the camera");
  const auto& faces = faces_of(mesh);
  if (faces.empty()) {
    return std::vector<Vec3>(mesh.vertices.size(), Vec3::Zero());
  }
  const raster::Screen s = raster::project_mesh(mesh, cam, cfg, true);
  std::vector<int> all(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    all[f] = static_cast<int>(f);
  }
  std::vector<Eigen::Vector2d> guv(mesh.vertices.size(), Eigen::Vector2d::Zero());
  std::vector<FaceHit> hits;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double dl = dl_dpixels(x, y);
      if (dl == 0.0) {
        continue;
      }
      const double prod = pixel_hits(Eigen::Vector2d(x, y), all, faces, s, cfg, hits);
      for (const FaceHit& h : hits) {
        const double w = dl * prod * (1.0 - h.t);
        for (int k = 0; k < 3; ++k) {
          guv[faces[h.face][k]] += w * h.g[k];
        }
      }
    }
  }
  return lift_gradients(s, guv);
}

} // namespace reference

} // namespace fishfit
