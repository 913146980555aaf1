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
#include "fishfit/synth.hpp"
#include "fishfit/metrics.hpp"
#include "fishfit/csv.hpp"
#include "fishfit/losses.hpp"
#include "fishfit/optimizer.hpp"
#include "fishfit/renderer.hpp"
#include "fishfit/so3.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace fishfit {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::mt19937_64 seeded(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // Explicit formula: distribution objects are not portable across stdlibs.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double normal(std::mt19937_64& rng) {
  // Box-Muller, same portability reason as above.
  const double u1 = 1.0 - uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace

CameraModel overhead_camera(int width, int height, double focal_px, double distance_mm,
                            double tilt_rad) {
  Eigen::Matrix3d down;
  down << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
  Eigen::Matrix3d tilt;
  tilt << 1.0, 0.0, 0.0, 0.0, std::cos(tilt_rad), -std::sin(tilt_rad), 0.0, std::sin(tilt_rad),
      std::cos(tilt_rad);
  return make_camera(focal_px, 0.5 * (width - 1), 0.5 * (height - 1), width, height, tilt * down,
                     Eigen::Vector3d(0.0, 0.0, distance_mm));
}

DeformParams bent_params(const CameraModel& cam, double yaw_rad, double bend0_rad,
                         double bend1_rad) {
  DeformParams p = DeformParams::identity();
  p.root_rot = so3::log(plane_aligned_rotation(cam, yaw_rad));
  p.joint_rot[0] = Eigen::Vector3d(0.0, 0.0, bend0_rad);
  p.joint_rot[1] = Eigen::Vector3d(0.0, 0.0, bend1_rad);
  return p;
}

Scene generate_scene(const TemplateMesh& tmpl, const SceneSpec& spec) {
  spec.camera.validate();
  FISHFIT_THROW_IF(!(spec.true_length_mm > 0.0), ErrorCode::InvalidArgument,
                   "true length must be positive");
  const CameraModel& cam = spec.camera;
  Scene s;
  s.spec = spec;
  DeformParams p = spec.true_params;
  p.root_log_scale = 0.0;
  p.root_trans.setZero();
  const double unit_arc = spine_length(deform(tmpl, p).vertices, tmpl.spine);
  p.root_log_scale = std::log(spec.true_length_mm / (kModelUnitMm * unit_arc));
  const Vec3 center = deform(tmpl, p).vertices[tmpl.keypoints.center];
  const Vec3 on_plane =
      (cam.rot * Vec3(spec.plane_xy_mm.x(), spec.plane_xy_mm.y(), 0.0) + cam.trans) /
      kModelUnitMm;
  p.root_trans = on_plane - center;
  s.params = p;
  s.mesh = deform(tmpl, p);

  for (const Vec3& v : s.mesh.vertices) {
    const Vec3 pc = kModelUnitMm * v;
    FISHFIT_THROW_IF(!(pc.z() > 0.0), ErrorCode::FishOutOfFrame, "fish is behind the camera");
    const Eigen::Vector2d uv = project(cam, pc);
    FISHFIT_THROW_IF(uv.x() < 1.0 || uv.y() < 1.0 || uv.x() > cam.width - 2.0 ||
                         uv.y() > cam.height - 2.0,
                     ErrorCode::FishOutOfFrame, "fish leaves the image");
  }

  s.mask = render_crisp(s.mesh, cam);
  if (spec.noise_px > 0.0 && spec.noise_prob > 0.0) {
    const Grid<double> sdf = distance_transform(s.mask);
    auto rng = seeded(spec.seed, 0x6e6f697365ULL);
    for (std::size_t i = 0; i < s.mask.size(); ++i) {
      // One draw per band pixel in raster order keeps the result seed-stable.
      const double d = sdf.data[i] <= 0.0 ? 1.0 - sdf.data[i] : sdf.data[i];
      if (d <= spec.noise_px && uniform(rng, 0.0, 1.0) < spec.noise_prob) {
        s.mask.data[i] = 1.0 - s.mask.data[i];
      }
    }
  }

  const auto& v = s.mesh.vertices;
  LengthRecord& t = s.truth;
  t.keypoints.h_abs = kModelUnitMm * v[tmpl.keypoints.head];
  t.keypoints.c_abs = kModelUnitMm * v[tmpl.keypoints.center];
  t.keypoints.t_abs = kModelUnitMm * v[tmpl.keypoints.tail];
  t.chord_mm = (t.keypoints.h_abs - t.keypoints.t_abs).norm();
  t.arc_ratio = spine_length(v, tmpl.spine) / (v[tmpl.keypoints.head] - v[tmpl.keypoints.tail]).norm();
  t.length_mm = t.chord_mm * t.arc_ratio;
  return s;
}

std::vector<PlaneCorrespondence> checkerboard_correspondences(const CameraModel& cam, int nx,
                                                              int ny, double square_mm) {
  const PlaneHomography hom = compose_homography(cam);
  std::vector<PlaneCorrespondence> out;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Eigen::Vector2d w((i - 0.5 * (nx - 1)) * square_mm, (j - 0.5 * (ny - 1)) * square_mm);
      out.push_back({w, apply_homography(hom, w)});
    }
  }
  return out;
}

std::vector<Scene> generate_track(const TemplateMesh& tmpl, const SceneSpec& base, double yaw_rad,
                                  double bend0_rad, double bend1_rad, const TrackJitter& jitter,
                                  int n_frames, std::uint64_t seed) {
  FISHFIT_THROW_IF(n_frames < 1, ErrorCode::InvalidArgument, "n_frames must be >= 1");
  auto rng = seeded(seed, 0x747261636bULL);
  std::vector<Scene> out;
  for (int f = 0; f < n_frames; ++f) {
    SceneSpec spec = base;
    const double yaw = yaw_rad + uniform(rng, -jitter.yaw_rad, jitter.yaw_rad);
    const double b0 = bend0_rad + uniform(rng, -jitter.bend_rad, jitter.bend_rad);
    const double b1 = bend1_rad + uniform(rng, -jitter.bend_rad, jitter.bend_rad);
    const double dx = uniform(rng, -jitter.shift_mm, jitter.shift_mm);
    const double dy = uniform(rng, -jitter.shift_mm, jitter.shift_mm);
    spec.true_params = bent_params(base.camera, yaw, b0, b1);
    spec.plane_xy_mm = base.plane_xy_mm + Eigen::Vector2d(dx, dy);
    spec.seed = seed * 1000003ULL + static_cast<std::uint64_t>(f);
    out.push_back(generate_scene(tmpl, spec));
  }
  return out;
}

void PopulationSpec::validate() const {
  FISHFIT_THROW_IF(n_fish < 1 || frames_per_fish < 1, ErrorCode::InvalidArgument,
                   "n_fish and frames_per_fish must be >= 1");
  FISHFIT_THROW_IF(!(length_min_mm > 0.0 && length_min_mm < length_max_mm),
                   ErrorCode::InvalidArgument, "length range is invalid");
  FISHFIT_THROW_IF(!(length_std_mm >= 0.0), ErrorCode::InvalidArgument,
                   "length_std_mm must be >= 0");
  FISHFIT_THROW_IF(!(bend_min_deg >= 0.0 && bend_min_deg <= bend_max_deg && bend_max_deg < 90.0),
                   ErrorCode::InvalidArgument, "bend range must satisfy 0 <= min <= max < 90");
  FISHFIT_THROW_IF(width < 16 || height < 16 || !(focal_px > 0.0) || !(distance_mm > 0.0),
                   ErrorCode::InvalidArgument, "camera settings are invalid");
  FISHFIT_THROW_IF(noise_px < 0.0 || noise_prob < 0.0 || noise_prob > 1.0,
                   ErrorCode::InvalidArgument, "noise settings are invalid");
  FISHFIT_THROW_IF(n_segments < 4 || ring_vertices < 4 || ring_vertices % 4 != 0,
                   ErrorCode::InvalidArgument, "template settings are invalid");
}

nlohmann::ordered_json to_json(const PopulationSpec& s) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = s.seed;
  j["n_fish"] = s.n_fish;
  j["frames_per_fish"] = s.frames_per_fish;
  j["length_mean_mm"] = s.length_mean_mm;
  j["length_std_mm"] = s.length_std_mm;
  j["length_min_mm"] = s.length_min_mm;
  j["length_max_mm"] = s.length_max_mm;
  j["bend_min_deg"] = s.bend_min_deg;
  j["bend_max_deg"] = s.bend_max_deg;
  j["yaw_max_deg"] = s.yaw_max_deg;
  j["shift_max_mm"] = s.shift_max_mm;
  j["noise_px"] = s.noise_px;
  j["noise_prob"] = s.noise_prob;
  j["jitter"] = {{"yaw_deg", s.jitter.yaw_rad / kDeg},
                 {"bend_deg", s.jitter.bend_rad / kDeg},
                 {"shift_mm", s.jitter.shift_mm}};
  j["camera"] = {{"width", s.width},
                 {"height", s.height},
                 {"focal_px", s.focal_px},
                 {"distance_mm", s.distance_mm},
                 {"tilt_deg", s.tilt_deg}};
  j["template"] = {{"n_segments", s.n_segments}, {"ring_vertices", s.ring_vertices}};
  return j;
}

PopulationSpec population_from_json(const nlohmann::json& j) {
  PopulationSpec s;
  try {
    FISHFIT_THROW_IF(!j.is_object(), ErrorCode::MalformedFile, "population spec must be an object");
    FISHFIT_THROW_IF(j.value("schema_version", 1) != 1, ErrorCode::MalformedFile,
                     "unsupported population schema_version");
    auto get = [](const nlohmann::json& o, const char* key, auto& out) {
      if (o.contains(key)) {
        out = o.at(key).get<std::decay_t<decltype(out)>>();
      }
    };
    get(j, "seed", s.seed);
    get(j, "n_fish", s.n_fish);
    get(j, "frames_per_fish", s.frames_per_fish);
    get(j, "length_mean_mm", s.length_mean_mm);
    get(j, "length_std_mm", s.length_std_mm);
    get(j, "length_min_mm", s.length_min_mm);
    get(j, "length_max_mm", s.length_max_mm);
    get(j, "bend_min_deg", s.bend_min_deg);
    get(j, "bend_max_deg", s.bend_max_deg);
    get(j, "yaw_max_deg", s.yaw_max_deg);
    get(j, "shift_max_mm", s.shift_max_mm);
    get(j, "noise_px", s.noise_px);
    get(j, "noise_prob", s.noise_prob);
    if (j.contains("jitter")) {
      const auto& jj = j.at("jitter");
      double yaw = 0.0, bend = 0.0;
      get(jj, "yaw_deg", yaw);
      get(jj, "bend_deg", bend);
      get(jj, "shift_mm", s.jitter.shift_mm);
      s.jitter.yaw_rad = yaw * kDeg;
      s.jitter.bend_rad = bend * kDeg;
    }
    if (j.contains("camera")) {
      const auto& c = j.at("camera");
      get(c, "width", s.width);
      get(c, "height", s.height);
      get(c, "focal_px", s.focal_px);
      get(c, "distance_mm", s.distance_mm);
      get(c, "tilt_deg", s.tilt_deg);
    }
    if (j.contains("template")) {
      get(j.at("template"), "n_segments", s.n_segments);
      get(j.at("template"), "ring_vertices", s.ring_vertices);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("population spec: ") + e.what());
  }
  s.validate();
  return s;
}

Population generate_population(const PopulationSpec& spec) {
  spec.validate();
  Population pop;
  pop.tmpl = make_fish_template(spec.n_segments, default_fish_profile, spec.ring_vertices);
  pop.camera =
      overhead_camera(spec.width, spec.height, spec.focal_px, spec.distance_mm, spec.tilt_deg * kDeg);
  auto rng = seeded(spec.seed, 0x706f70ULL);
  int frame_id = 0;
  for (int fish = 0; fish < spec.n_fish; ++fish) {
    std::vector<Scene> track;
    double length = 0.0;
    for (int attempt = 0;; ++attempt) {
      FISHFIT_THROW_IF(attempt >= 1000, ErrorCode::FishOutOfFrame,
                       "cannot place fish " + std::to_string(fish) + " inside the image");
      // Rejection sampling of the clipped normal.
      do {
        length = spec.length_mean_mm + spec.length_std_mm * normal(rng);
      } while (length < spec.length_min_mm || length > spec.length_max_mm);
      const bool reversed = uniform(rng, 0.0, 1.0) < 0.5;
      const double yaw = uniform(rng, -spec.yaw_max_deg, spec.yaw_max_deg) * kDeg +
                         (reversed ? std::numbers::pi : 0.0);
      double bends[2];
      for (double& b : bends) {
        const double mag = uniform(rng, spec.bend_min_deg, spec.bend_max_deg) * kDeg;
        b = uniform(rng, 0.0, 1.0) < 0.5 ? -mag : mag;
      }
      SceneSpec base;
      base.true_length_mm = length;
      base.camera = pop.camera;
      base.plane_xy_mm = Eigen::Vector2d(uniform(rng, -spec.shift_max_mm, spec.shift_max_mm),
                                         uniform(rng, -spec.shift_max_mm, spec.shift_max_mm));
      base.noise_px = spec.noise_px;
      base.noise_prob = spec.noise_prob;
      const std::uint64_t track_seed = rng();
      try {
        track = generate_track(pop.tmpl, base, yaw, bends[0], bends[1], spec.jitter,
                               spec.frames_per_fish, track_seed);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::FishOutOfFrame) {
          throw;
        }
      }
    }
    pop.track_lengths_mm.push_back(length);
    for (auto& sc : track) {
      sc.truth.frame_id = frame_id;
      sc.truth.track_id = fish;
      pop.frames.push_back({frame_id, fish, std::move(sc)});
      ++frame_id;
    }
  }
  return pop;
}

namespace {

std::string mask_name(int frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d_mask.png", frame_id);
  return buf;
}

} // namespace

void write_scene_dir(const Population& pop, const std::filesystem::path& dir,
                     const PopulationSpec* spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  Calibration calib;
  calib.camera = pop.camera;
  save_calibration(calib, dir / "calib.json");
  save_mesh(pop.tmpl, dir / "template.obj");

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["template"] = "template.obj";
  manifest["calibration"] = "calib.json";
  auto frames = nlohmann::ordered_json::array();
  std::vector<LengthRecord> oracle;
  std::vector<int> frame_counts(pop.track_lengths_mm.size(), 0);
  for (const auto& f : pop.frames) {
    const std::string name = mask_name(f.frame_id);
    write_png_gray(f.scene.mask, dir / "frames" / name);
    frames.push_back({{"frame_id", f.frame_id},
                      {"track_id", f.track_id},
                      {"mask", "frames/" + name},
                      {"true_length_mm", f.scene.truth.length_mm}});
    oracle.push_back(f.scene.truth);
    ++frame_counts[f.track_id];
  }
  manifest["frames"] = frames;
  auto tracks = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < pop.track_lengths_mm.size(); ++t) {
    tracks.push_back({{"track_id", t},
                      {"n_frames", frame_counts[t]},
                      {"true_length_mm", pop.track_lengths_mm[t]}});
  }
  manifest["tracks"] = tracks;
  if (spec != nullptr) {
    manifest["population"] = to_json(*spec);
  }
  std::ofstream out(dir / "manifest.json");
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';

  write_lengths_csv(oracle, dir / "oracle.csv");
  std::vector<TrackLength> truth_tracks;
  for (std::size_t t = 0; t < pop.track_lengths_mm.size(); ++t) {
    truth_tracks.push_back({static_cast<int>(t), frame_counts[t], pop.track_lengths_mm[t]});
  }
  write_tracks_csv(truth_tracks, dir / "truth_tracks.csv");
}

} // namespace fishfit
