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
#include "fishfit/camera.hpp"
#include "fishfit/common.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <json.hpp>

#include <cmath>
#include <fstream>

namespace fishfit {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

void CameraModel::validate() const {
  FISHFIT_THROW_IF(k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0,
                   ErrorCode::SingularIntrinsics, "intrinsics must be upper triangular");
  FISHFIT_THROW_IF(!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0), ErrorCode::SingularIntrinsics,
                   "focal lengths must be positive");
  FISHFIT_THROW_IF(k(2, 2) != 1.0, ErrorCode::SingularIntrinsics, "k[2][2] must be 1");
  const double orth = (rot.transpose() * rot - Matrix3d::Identity()).cwiseAbs().maxCoeff();
  FISHFIT_THROW_IF(orth > 1e-9 || std::abs(rot.determinant() - 1.0) > 1e-9,
                   ErrorCode::InvalidArgument, "rot must be a proper rotation");
  FISHFIT_THROW_IF(width <= 0 || height <= 0, ErrorCode::InvalidArgument,
                   "image size must be positive");
}

CameraModel make_camera(double focal_px, double cx, double cy, int width, int height,
                        const Matrix3d& rot, const Vector3d& trans) {
  CameraModel cam;
  cam.k << focal_px, 0.0, cx, 0.0, focal_px, cy, 0.0, 0.0, 1.0;
  cam.rot = rot;
  cam.trans = trans;
  cam.width = width;
  cam.height = height;
  return cam;
}

Vector2d project(const CameraModel& cam, const Vector3d& point_cam) {
  FISHFIT_THROW_IF(!(point_cam.z() > 0.0), ErrorCode::BehindCamera,
                   "point depth must be positive");
  const Vector3d h = cam.k * point_cam;
  return h.head<2>() / h.z();
}

Vector3d back_project(const CameraModel& cam, const Vector2d& uv) {
  const Matrix3d& k = cam.k;
  FISHFIT_THROW_IF(std::abs(k(0, 0) * k(1, 1) * k(2, 2)) < 1e-12, ErrorCode::SingularIntrinsics,
                   "intrinsics are singular");
  // Upper-triangular solve.
  const double y = (uv.y() - k(1, 2)) / k(1, 1);
  const double x = (uv.x() - k(0, 2) - k(0, 1) * y) / k(0, 0);
  return {x, y, 1.0};
}

PlaneHomography compose_homography(const CameraModel& cam) {
  Matrix3d m;
  m.col(0) = cam.rot.col(0);
  m.col(1) = cam.rot.col(1);
  m.col(2) = cam.trans;
  PlaneHomography hom{cam.k * m};
  // Singular exactly when the camera center lies on the plane.
  const double scale = cam.k.cwiseAbs().maxCoeff() * cam.k.cwiseAbs().maxCoeff() *
                       std::max(1.0, cam.trans.norm());
  FISHFIT_THROW_IF(std::abs(hom.h.determinant()) <= 1e-12 * scale, ErrorCode::DegeneratePlane,
                   "camera center lies on the reference plane");
  return hom;
}

Vector2d apply_homography(const PlaneHomography& hom, const Vector2d& p) {
  const Vector3d q = hom.h * Vector3d(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

namespace {

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
Matrix3d normalizing_transform(std::span<const Vector2d> pts) {
  Vector2d mean = Vector2d::Zero();
  for (const auto& p : pts) {
    mean += p;
  }
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) {
    dist += (p - mean).norm();
  }
  dist /= static_cast<double>(pts.size());
  FISHFIT_THROW_IF(dist < 1e-12, ErrorCode::DegenerateConfiguration, "all points coincide");
  const double s = std::sqrt(2.0) / dist;
  Matrix3d t;
  t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return t;
}

bool collinear(const Vector2d& a, const Vector2d& b, const Vector2d& c, double scale) {
  const Vector2d u = b - a;
  const Vector2d v = c - a;
  return std::abs(u.x() * v.y() - u.y() * v.x()) <= 1e-9 * scale * scale;
}

} // namespace

HomographyEstimate estimate_plane_homography(std::span<const PlaneCorrespondence> pairs) {
  const auto n = pairs.size();
  FISHFIT_THROW_IF(n < 4, ErrorCode::DegenerateConfiguration,
                   "at least 4 correspondences are required");
  std::vector<Vector2d> world(n);
  std::vector<Vector2d> image(n);
  for (std::size_t i = 0; i < n; ++i) {
    world[i] = pairs[i].world;
    image[i] = pairs[i].image;
  }
  const Matrix3d tw = normalizing_transform(world);
  const Matrix3d ti = normalizing_transform(image);

  std::vector<Vector2d> wn(n);
  std::vector<Vector2d> in(n);
  for (std::size_t i = 0; i < n; ++i) {
    wn[i] = (tw * world[i].homogeneous()).head<2>();
    in[i] = (ti * image[i].homogeneous()).head<2>();
  }
  if (n == 4) {
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = a + 1; b < 4; ++b) {
        for (std::size_t c = b + 1; c < 4; ++c) {
          FISHFIT_THROW_IF(collinear(wn[a], wn[b], wn[c], 1.0), ErrorCode::DegenerateConfiguration,
                           "three world points are collinear");
        }
      }
    }
  }

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = wn[i].x();
    const double y = wn[i].y();
    const double u = in[i].x();
    const double v = in[i].y();
    a.row(2 * i) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A rank below 8 leaves the solution underdetermined.
  FISHFIT_THROW_IF(sv[7] < 1e-10 * sv[0], ErrorCode::DegenerateConfiguration,
                   "correspondences do not determine a homography");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Matrix3d hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Matrix3d full = ti.inverse() * hn * tw;
  FISHFIT_THROW_IF(std::abs(full(2, 2)) < 1e-15, ErrorCode::DegenerateConfiguration,
                   "homography maps the world origin to infinity");
  full /= full(2, 2);

  HomographyEstimate est{PlaneHomography{full}, 0.0};
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sq += (apply_homography(est.hom, world[i]) - image[i]).squaredNorm();
  }
  est.rms_px = std::sqrt(sq / static_cast<double>(n));
  return est;
}

PlaneHomography metric_homography(const CameraModel& cam, const PlaneHomography& hom) {
  const Matrix3d m = cam.k.inverse() * hom.h;
  const double n = 0.5 * (m.col(0).norm() + m.col(1).norm());
  FISHFIT_THROW_IF(!(n > 0.0), ErrorCode::DegeneratePlane, "homography has a null column");
  // The plane origin must end up in front of the camera.
  const double s = (m(2, 2) < 0.0 ? -1.0 : 1.0) / n;
  return {s * hom.h};
}

PlaneHomography Calibration::homography() const {
  if (plane_correspondences.size() >= 4) {
    return metric_homography(camera, estimate_plane_homography(plane_correspondences).hom);
  }
  return compose_homography(camera);
}

namespace {

Matrix3d mat_from(const nlohmann::json& j, const char* name) {
  const auto v = j.at(name).get<std::vector<double>>();
  FISHFIT_THROW_IF(v.size() != 9, ErrorCode::MalformedFile,
                   std::string(name) + " must hold 9 numbers");
  Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return m;
}

std::vector<double> mat_to(const Matrix3d& m) {
  std::vector<double> v;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      v.push_back(m(r, c));
    }
  }
  return v;
}

} // namespace

Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open calibration " + path.string());
  Calibration calib;
  try {
    nlohmann::json j;
    in >> j;
    calib.camera.k = mat_from(j, "k");
    calib.camera.rot = mat_from(j, "rot");
    const auto t = j.at("trans").get<std::vector<double>>();
    FISHFIT_THROW_IF(t.size() != 3, ErrorCode::MalformedFile, "trans must hold 3 numbers");
    calib.camera.trans = Vector3d(t[0], t[1], t[2]);
    calib.camera.width = j.at("width").get<int>();
    calib.camera.height = j.at("height").get<int>();
    if (j.contains("plane_correspondences")) {
      for (const auto& c : j.at("plane_correspondences")) {
        const auto w = c.at("world").get<std::vector<double>>();
        const auto im = c.at("image").get<std::vector<double>>();
        FISHFIT_THROW_IF(w.size() != 2 || im.size() != 2, ErrorCode::MalformedFile,
                         "correspondence entries must be 2-vectors");
        calib.plane_correspondences.push_back({Vector2d(w[0], w[1]), Vector2d(im[0], im[1])});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
  calib.camera.validate();
  return calib;
}

void save_calibration(const Calibration& calib, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["k"] = mat_to(calib.camera.k);
  j["rot"] = mat_to(calib.camera.rot);
  j["trans"] = {calib.camera.trans.x(), calib.camera.trans.y(), calib.camera.trans.z()};
  j["width"] = calib.camera.width;
  j["height"] = calib.camera.height;
  if (!calib.plane_correspondences.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : calib.plane_correspondences) {
      arr.push_back({{"world", {c.world.x(), c.world.y()}}, {"image", {c.image.x(), c.image.y()}}});
    }
    j["plane_correspondences"] = arr;
  }
  std::ofstream out(path);
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  out << j.dump(2) << '\n';
}

} // namespace fishfit
