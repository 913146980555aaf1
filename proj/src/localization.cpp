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
#include "fishfit/localization.hpp"
#include "fishfit/csv.hpp"
#include "fishfit/renderer.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace fishfit {

CenterDepth center_depth(const PlaneHomography& hom, const CameraModel& cam,
                         const Eigen::Vector2d& c2d) {
  const Eigen::Vector3d w = hom.h.inverse() * c2d.homogeneous();
  FISHFIT_THROW_IF(!(std::abs(w.z()) > 1e-12 * w.norm()),
                   ErrorCode::PointAtInfinity, "center ray is parallel to the reference plane");
  CenterDepth out;
  out.z = 1.0 / w.z();
  FISHFIT_THROW_IF(!(out.z > 0.0), ErrorCode::PointAtInfinity,
                   "reference plane is behind the camera along the center ray");
  out.point = out.z * back_project(cam, c2d);
  out.world = w.head<2>() / w.z();
  return out;
}

RelativeKeypoints to_tmp_frame(const Vec3& h, const Vec3& c, const Vec3& t, const Vec3& c_abs) {
  return {kModelUnitMm * (h - c) + c_abs, c_abs, kModelUnitMm * (t - c) + c_abs};
}

Vec3 intersect_ray_line(const Vec3& ray_dir, const Vec3& line_a, const Vec3& line_b) {
  Eigen::Matrix<double, 3, 2> m;
  m.col(0) = ray_dir;
  m.col(1) = line_b - line_a;
  // m d + a (line_b - line_a) = line_b, in the least-squares sense
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  FISHFIT_THROW_IF(!(sv(1) > 0.0) || sv(0) / sv(1) > 1e8, ErrorCode::NearParallel,
                   "ray and model line are (nearly) parallel");
  const Eigen::Vector2d sol = svd.solve(line_b);
  const Vec3 on_ray = sol(0) * ray_dir;
  const Vec3 on_line = sol(1) * line_a + (1.0 - sol(1)) * line_b;
  return 0.5 * (on_ray + on_line);
}

LengthRecord measure_length(const DeformedMesh& mesh, const AbsoluteKeypoints& abs_kp) {
  const Vec3& h = mesh.vertices[mesh.keypoints.head];
  const Vec3& t = mesh.vertices[mesh.keypoints.tail];
  const double model_chord = (h - t).norm();
  const double chord = (abs_kp.h_abs - abs_kp.t_abs).norm();
  FISHFIT_THROW_IF(!(model_chord > 1e-12) || !(chord > 1e-9), ErrorCode::ZeroChord,
                   "head and tail coincide");
  LengthRecord r;
  r.keypoints = abs_kp;
  r.chord_mm = chord;
  r.arc_ratio = spine_length(mesh.vertices, mesh.spine) / model_chord;
  r.length_mm = r.chord_mm * r.arc_ratio;
  return r;
}

LengthRecord localize_mesh(const DeformedMesh& mesh, const CameraModel& cam,
                           const PlaneHomography& hom) {
  const auto kp2d = project_keypoints(mesh, cam);
  const CenterDepth cd = center_depth(hom, cam, kp2d[1]);
  const auto& v = mesh.vertices;
  const RelativeKeypoints rel = to_tmp_frame(v[mesh.keypoints.head], v[mesh.keypoints.center],
                                             v[mesh.keypoints.tail], cd.point);
  AbsoluteKeypoints abs_kp;
  abs_kp.c_abs = cd.point;
  abs_kp.h_abs = intersect_ray_line(back_project(cam, kp2d[0]), rel.h, rel.c);
  abs_kp.t_abs = intersect_ray_line(back_project(cam, kp2d[2]), rel.t, rel.c);
  return measure_length(mesh, abs_kp);
}

LengthRecord localize_frame(const TemplateMesh& tmpl, const FitResult& fit, const CameraModel& cam,
                            const PlaneHomography& hom) {
  return localize_mesh(deform(tmpl, fit.params), cam, hom);
}

LengthRecord skipped_record(int frame_id, int track_id, const std::string& status) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  LengthRecord r;
  r.frame_id = frame_id;
  r.track_id = track_id;
  r.keypoints.h_abs = r.keypoints.c_abs = r.keypoints.t_abs = Vec3::Constant(nan);
  r.chord_mm = r.arc_ratio = r.length_mm = nan;
  r.status = status;
  return r;
}

namespace {

const std::vector<std::string> kLengthColumns = {
    "frame_id", "track_id", "Hx",        "Hy",        "Hz",       "Cx",     "Cy", "Cz",
    "Tx",       "Ty",       "Tz",        "chord_mm", "arc_ratio", "length_mm", "status"};

} // namespace

void write_lengths_csv(const std::vector<LengthRecord>& records, const std::filesystem::path& path) {
  CsvWriter out(path, kLengthColumns);
  for (const auto& r : records) {
    const auto& k = r.keypoints;
    out.row({std::to_string(r.frame_id), std::to_string(r.track_id), format_double(k.h_abs.x()),
             format_double(k.h_abs.y()), format_double(k.h_abs.z()), format_double(k.c_abs.x()),
             format_double(k.c_abs.y()), format_double(k.c_abs.z()), format_double(k.t_abs.x()),
             format_double(k.t_abs.y()), format_double(k.t_abs.z()), format_double(r.chord_mm),
             format_double(r.arc_ratio), format_double(r.length_mm), r.status});
  }
}

std::vector<LengthRecord> read_lengths_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  FISHFIT_THROW_IF(table.header != kLengthColumns, ErrorCode::MalformedFile,
                   path.string() + " does not have the lengths schema");
  std::vector<LengthRecord> out;
  for (const auto& row : table.rows) {
    LengthRecord r;
    r.frame_id = parse_int(row[0]);
    r.track_id = parse_int(row[1]);
    std::array<double, 12> v{};
    for (int i = 0; i < 12; ++i) {
      v[i] = parse_double(row[2 + i]);
    }
    r.keypoints.h_abs = Vec3(v[0], v[1], v[2]);
    r.keypoints.c_abs = Vec3(v[3], v[4], v[5]);
    r.keypoints.t_abs = Vec3(v[6], v[7], v[8]);
    r.chord_mm = v[9];
    r.arc_ratio = v[10];
    r.length_mm = v[11];
    r.status = row[14];
    out.push_back(std::move(r));
  }
  return out;
}

} // namespace fishfit
