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
#include "fishfit/mesh.hpp"
#include "fishfit/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace fishfit {

namespace {

constexpr double kDegenerateArea = 1e-12;

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

} // namespace

Vec3 TemplateMesh::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& v : vertices) {
    sum += v;
  }
  return vertices.empty() ? sum : Vec3(sum / static_cast<double>(vertices.size()));
}

DeformedMesh as_deformed(const TemplateMesh& mesh) {
  return DeformedMesh{mesh.vertices, mesh.faces, mesh.joints, mesh.keypoints, mesh.spine};
}

void validate(const TemplateMesh& mesh) {
  FISHFIT_THROW_IF(!mesh.faces, ErrorCode::InvalidTopology, "mesh has no face array");
  const int n = static_cast<int>(mesh.vertices.size());
  std::map<std::pair<int, int>, int> edge_use;
  for (std::size_t f = 0; f < mesh.faces->size(); ++f) {
    const Face& face = (*mesh.faces)[f];
    for (int idx : face) {
      FISHFIT_THROW_IF(idx < 0 || idx >= n, ErrorCode::InvalidTopology,
                       "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                           " of " + std::to_string(n));
    }
    FISHFIT_THROW_IF(face[0] == face[1] || face[1] == face[2] || face[0] == face[2],
                     ErrorCode::InvalidTopology,
                     "face " + std::to_string(f) + " repeats a vertex index");
    FISHFIT_THROW_IF(triangle_area(mesh.vertices[face[0]], mesh.vertices[face[1]],
                                   mesh.vertices[face[2]]) < kDegenerateArea,
                     ErrorCode::DegenerateFace, "face " + std::to_string(f) + " has zero area");
    for (int e = 0; e < 3; ++e) {
      const int a = face[e];
      const int b = face[(e + 1) % 3];
      const int uses = ++edge_use[{std::min(a, b), std::max(a, b)}];
      FISHFIT_THROW_IF(uses > 2, ErrorCode::InvalidTopology,
                       "edge (" + std::to_string(a) + "," + std::to_string(b) +
                           ") shared by more than two faces");
    }
  }

  const auto& kp = mesh.keypoints;
  for (int idx : {kp.head, kp.center, kp.tail}) {
    FISHFIT_THROW_IF(idx < 0 || idx >= n, ErrorCode::MissingAnnotation,
                     "keypoint index out of range");
  }
  FISHFIT_THROW_IF(kp.head == kp.center || kp.center == kp.tail || kp.head == kp.tail,
                   ErrorCode::MissingAnnotation, "head, center and tail must be distinct");
  FISHFIT_THROW_IF(mesh.spine.size() != 5, ErrorCode::MissingAnnotation,
                   "spine must list head, joint1, center, joint2, tail");
  for (int idx : mesh.spine) {
    FISHFIT_THROW_IF(idx < 0 || idx >= n, ErrorCode::InvalidTopology, "spine index out of range");
  }
  FISHFIT_THROW_IF(mesh.spine.front() != kp.head || mesh.spine[2] != kp.center ||
                       mesh.spine.back() != kp.tail,
                   ErrorCode::MissingAnnotation,
                   "spine must start at head, pass center third and end at tail");
}

double default_fish_profile(double x) {
  // Diamond-ish flatfish body narrowing into a caudal peduncle, then a
  // flared tail fin.
  constexpr double body_end = 0.82;
  const double xb = std::clamp(x / body_end, 0.0, 1.0);
  const double body = 0.22 * std::pow(std::sin(std::numbers::pi * xb), 0.75);
  const double fin = 0.03 + 0.10 * std::pow(std::clamp((x - 0.8) / 0.2, 0.0, 1.0), 1.2);
  const double head = 0.02 * std::clamp(x / 0.02, 0.0, 1.0);
  return std::max({body, x > 0.7 ? fin : 0.0, head});
}

TemplateMesh make_fish_template(int n_segments, const RadiusProfile& profile, int ring_vertices,
                                double thickness_ratio) {
  FISHFIT_THROW_IF(n_segments < 4, ErrorCode::InvalidArgument, "n_segments must be >= 4");
  FISHFIT_THROW_IF(ring_vertices < 4 || ring_vertices % 4 != 0, ErrorCode::InvalidArgument,
                   "ring_vertices must be a positive multiple of 4");
  FISHFIT_THROW_IF(!(thickness_ratio > 0.0), ErrorCode::InvalidArgument,
                   "thickness_ratio must be positive");

  std::vector<double> stations;
  for (int k = 1; k < n_segments; ++k) {
    stations.push_back(static_cast<double>(k) / n_segments);
  }
  constexpr double kJoint1 = 1.0 / 3.0;
  constexpr double kCenter = 0.5;
  constexpr double kJoint2 = 2.0 / 3.0;
  for (double s : {kJoint1, kCenter, kJoint2}) {
    const bool present = std::any_of(stations.begin(), stations.end(),
                                     [s](double t) { return std::abs(t - s) < 1e-9; });
    if (!present) {
      stations.push_back(s);
    }
  }
  std::sort(stations.begin(), stations.end());
  // Snap so the spine stations are exactly the canonical values.
  for (double& t : stations) {
    for (double s : {kJoint1, kCenter, kJoint2}) {
      if (std::abs(t - s) < 1e-9) {
        t = s;
      }
    }
  }

  const int m = ring_vertices;
  const int rings = static_cast<int>(stations.size());
  const int bottom_mid = 3 * m / 4;

  TemplateMesh mesh;
  mesh.vertices.reserve(2 + static_cast<std::size_t>(rings * m));
  mesh.vertices.emplace_back(0.0, 0.0, 0.0);
  for (int r = 0; r < rings; ++r) {
    const double x = stations[r];
    const double w = profile(x);
    FISHFIT_THROW_IF(!(w > 0.0), ErrorCode::InvalidArgument, "profile must be positive inside (0,1)");
    const double h = thickness_ratio * w;
    for (int k = 0; k < m; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / m;
      double y = w * std::cos(theta);
      double z = h * std::max(std::sin(theta), 0.0);
      if (k == 0 || k == m / 2) {
        z = 0.0;
      }
      if (k == m / 4) {
        y = 0.0;
      }
      if (k == bottom_mid) {
        y = 0.0;
      }
      mesh.vertices.emplace_back(x, y, z);
    }
  }
  const int tail = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(1.0, 0.0, 0.0);

  auto ring_vertex = [m](int r, int k) { return 1 + r * m + ((k % m) + m) % m; };

  auto faces = std::make_shared<std::vector<Face>>();
  for (int k = 0; k < m; ++k) {
    faces->push_back({0, ring_vertex(0, k + 1), ring_vertex(0, k)});
  }
  for (int r = 0; r + 1 < rings; ++r) {
    for (int k = 0; k < m; ++k) {
      const int a = ring_vertex(r, k);
      const int b = ring_vertex(r, k + 1);
      const int c = ring_vertex(r + 1, k + 1);
      const int d = ring_vertex(r + 1, k);
      faces->push_back({a, b, c});
      faces->push_back({a, c, d});
    }
  }
  for (int k = 0; k < m; ++k) {
    faces->push_back({tail, ring_vertex(rings - 1, k), ring_vertex(rings - 1, k + 1)});
  }
  mesh.faces = std::move(faces);

  auto ring_at = [&](double s) {
    const auto it = std::find(stations.begin(), stations.end(), s);
    return static_cast<int>(it - stations.begin());
  };
  const int r1 = ring_at(kJoint1);
  const int rc = ring_at(kCenter);
  const int r2 = ring_at(kJoint2);

  mesh.keypoints.head = 0;
  mesh.keypoints.center = ring_vertex(rc, bottom_mid);
  mesh.keypoints.tail = tail;
  mesh.spine = {0, ring_vertex(r1, bottom_mid), mesh.keypoints.center, ring_vertex(r2, bottom_mid),
                tail};
  mesh.joints[0] = Vec3(kJoint1, 0.0, 0.5 * thickness_ratio * profile(kJoint1));
  mesh.joints[1] = Vec3(kJoint2, 0.0, 0.5 * thickness_ratio * profile(kJoint2));

  validate(mesh);
  return mesh;
}

std::filesystem::path default_annotation_path(const std::filesystem::path& mesh_path) {
  auto p = mesh_path;
  p.replace_extension(".json");
  return p;
}

namespace {

int parse_index(const std::string& token, int num_vertices, int line_no) {
  const std::string head = token.substr(0, token.find('/'));
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(head, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedFile,
                "line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  FISHFIT_THROW_IF(used != head.size() || value == 0, ErrorCode::MalformedFile,
                   "line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  // Negative indices are relative to the vertices read so far.
  const long long idx = value > 0 ? value - 1 : num_vertices + value;
  return static_cast<int>(idx);
}

void read_annotation(TemplateMesh& mesh, const std::filesystem::path& path) {
  std::ifstream in(path);
  FISHFIT_THROW_IF(!in, ErrorCode::MissingAnnotation, "cannot open annotation " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
  try {
    FISHFIT_THROW_IF(!j.contains("joints") || !j.contains("keypoints") || !j.contains("spine"),
                     ErrorCode::MissingAnnotation,
                     path.string() + " must contain joints, keypoints and spine");
    const auto& joints = j.at("joints");
    FISHFIT_THROW_IF(!joints.is_array() || joints.size() != 2, ErrorCode::MissingAnnotation,
                     "exactly two joints are required");
    for (int jj = 0; jj < 2; ++jj) {
      const auto p = joints[jj].get<std::vector<double>>();
      FISHFIT_THROW_IF(p.size() != 3, ErrorCode::MalformedFile, "joint must have 3 coordinates");
      mesh.joints[jj] = Vec3(p[0], p[1], p[2]);
    }
    const auto& kp = j.at("keypoints");
    mesh.keypoints.head = kp.at("head").get<int>();
    mesh.keypoints.center = kp.at("center").get<int>();
    mesh.keypoints.tail = kp.at("tail").get<int>();
    mesh.spine = j.at("spine").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MissingAnnotation, path.string() + ": " + e.what());
  }
}

} // namespace

TemplateMesh load_mesh(const std::filesystem::path& path, const std::filesystem::path& annotation) {
  std::ifstream in(path);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open mesh " + path.string());

  TemplateMesh mesh;
  auto faces = std::make_shared<std::vector<Face>>();
  std::vector<std::vector<int>> raw_faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) {
      continue;
    }
    if (tag == "v") {
      Vec3 v;
      FISHFIT_THROW_IF(!(ls >> v.x() >> v.y() >> v.z()), ErrorCode::MalformedFile,
                       path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        poly.push_back(parse_index(tok, static_cast<int>(mesh.vertices.size()), line_no));
      }
      FISHFIT_THROW_IF(poly.size() < 3, ErrorCode::MalformedFile,
                       path.string() + ":" + std::to_string(line_no) + ": face needs 3 indices");
      raw_faces.push_back(std::move(poly));
    }
    // vt, vn, o, g, s, usemtl, mtllib: not used.
  }
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& poly : raw_faces) {
    for (int idx : poly) {
      FISHFIT_THROW_IF(idx < 0 || idx >= n, ErrorCode::InvalidTopology,
                       "face index " + std::to_string(idx + 1) + " exceeds vertex count " +
                           std::to_string(n));
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      faces->push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  mesh.faces = std::move(faces);

  read_annotation(mesh, annotation.empty() ? default_annotation_path(path) : annotation);
  validate(mesh);
  return mesh;
}

void save_mesh(const TemplateMesh& mesh, const std::filesystem::path& path,
               const std::filesystem::path& annotation) {
  {
    std::ofstream out(path);
    FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write " + path.string());
    out.precision(17);
    for (const auto& v : mesh.vertices) {
      out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const auto& f : mesh.face_list()) {
      out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
  }
  nlohmann::json j;
  j["joints"] = {{mesh.joints[0].x(), mesh.joints[0].y(), mesh.joints[0].z()},
                 {mesh.joints[1].x(), mesh.joints[1].y(), mesh.joints[1].z()}};
  j["keypoints"] = {{"head", mesh.keypoints.head},
                    {"center", mesh.keypoints.center},
                    {"tail", mesh.keypoints.tail}};
  j["spine"] = mesh.spine;
  const auto ann = annotation.empty() ? default_annotation_path(path) : annotation;
  std::ofstream out(ann);
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write " + ann.string());
  out << j.dump(2) << '\n';
}

std::vector<Vec3> face_normals(std::span<const Vec3> vertices, const std::vector<Face>& faces) {
  std::vector<Vec3> normals;
  normals.reserve(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& [a, b, c] = faces[f];
    const Vec3 n = (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]);
    const double len = n.norm();
    FISHFIT_THROW_IF(0.5 * len < kDegenerateArea, ErrorCode::DegenerateFace,
                     "face " + std::to_string(f) + " has zero area");
    normals.push_back(n / len);
  }
  return normals;
}

std::vector<Vec3> face_normals(const DeformedMesh& mesh) {
  return face_normals(mesh.vertices, mesh.face_list());
}

Adjacency vertex_neighbors(const std::vector<Face>& faces, std::size_t num_vertices) {
  Adjacency adj(num_vertices);
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = f[e];
      const int b = f[(e + 1) % 3];
      adj[a].insert(b);
      adj[b].insert(a);
    }
  }
  return adj;
}

Adjacency vertex_neighbors(const TemplateMesh& mesh) {
  return vertex_neighbors(mesh.face_list(), mesh.vertices.size());
}

std::vector<std::pair<int, int>> unique_edges(const std::vector<Face>& faces) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(faces.size() * 3);
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = f[e];
      const int b = f[(e + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::pair<int, int>> adjacent_face_pairs(const std::vector<Face>& faces) {
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int e = 0; e < 3; ++e) {
      const int a = faces[f][e];
      const int b = faces[f][(e + 1) % 3];
      edge_faces[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(f));
    }
  }
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [edge, fs] : edge_faces) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
      for (std::size_t j = i + 1; j < fs.size(); ++j) {
        pairs.emplace_back(std::min(fs[i], fs[j]), std::max(fs[i], fs[j]));
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

double spine_length(std::span<const Vec3> vertices, const std::vector<int>& spine) {
  double len = 0.0;
  for (std::size_t k = 1; k < spine.size(); ++k) {
    len += (vertices[spine[k]] - vertices[spine[k - 1]]).norm();
  }
  return len;
}

} // namespace fishfit
