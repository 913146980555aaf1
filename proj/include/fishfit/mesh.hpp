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
#include <Eigen/Geometry>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace fishfit {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Face = std::array<int, 3>;

struct Keypoints {
  int head = -1;
  int center = -1;
  int tail = -1;
};

/// Rest-pose template. Faces are held behind a shared pointer so that every
/// deformed copy refers to the same topology.
struct TemplateMesh {
  std::vector<Vec3> vertices;
  std::shared_ptr<const std::vector<Face>> faces;
  std::array<Vec3, 2> joints;
  Keypoints keypoints;
  /// head -> joint1 -> center -> joint2 -> tail, as vertex indices.
  std::vector<int> spine;

  [[nodiscard]] const std::vector<Face>& face_list() const {
    return *faces;
  }
  [[nodiscard]] Vec3 centroid() const;
};

struct DeformedMesh {
  std::vector<Vec3> vertices;
  std::shared_ptr<const std::vector<Face>> faces;
  std::array<Vec3, 2> joints;
  Keypoints keypoints;
  std::vector<int> spine;

  [[nodiscard]] const std::vector<Face>& face_list() const {
    return *faces;
  }
};

/// Copy of the rest pose as a deformed mesh (shares faces).
DeformedMesh as_deformed(const TemplateMesh& mesh);

/// Throws InvalidTopology / MissingAnnotation / DegenerateFace.
void validate(const TemplateMesh& mesh);

using RadiusProfile = std::function<double(double)>;

/// Default halibut-like outline: half-width as a function of the
/// normalized position x in [0, 1] along the body.
double default_fish_profile(double x);

/**
 * Closed fish body elongated along +x with head tip at the origin and tail
 * tip at (1, 0, 0). Cross sections are half-ellipses with a flat underside
 * on z = 0; the underside midline carries the spine so that a straight fish
 * has a collinear spine. Rings are placed at multiples of 1/n_segments plus
 * the joint stations 1/3, 2/3 and mid-body.
 *
 * @param thickness_ratio dorsal height as a fraction of half-width.
 */
TemplateMesh make_fish_template(int n_segments,
                                const RadiusProfile& profile = default_fish_profile,
                                int ring_vertices = 12,
                                double thickness_ratio = 0.3);

/// Reads a Wavefront `.obj` subset and its JSON annotation sidecar. When
/// `annotation` is empty, `<stem>.json` next to the mesh is used.
TemplateMesh load_mesh(const std::filesystem::path& path,
                       const std::filesystem::path& annotation = {});

/// Writes `path` and its sidecar (same default naming as load_mesh).
void save_mesh(const TemplateMesh& mesh,
               const std::filesystem::path& path,
               const std::filesystem::path& annotation = {});

std::filesystem::path default_annotation_path(const std::filesystem::path& mesh_path);

std::vector<Vec3> face_normals(std::span<const Vec3> vertices, const std::vector<Face>& faces);
std::vector<Vec3> face_normals(const DeformedMesh& mesh);

using Adjacency = std::vector<std::set<int>>;

Adjacency vertex_neighbors(const std::vector<Face>& faces, std::size_t num_vertices);
Adjacency vertex_neighbors(const TemplateMesh& mesh);

/// Undirected edges (i < j), sorted.
std::vector<std::pair<int, int>> unique_edges(const std::vector<Face>& faces);

/// Pairs of faces sharing an edge, sorted by (first, second).
std::vector<std::pair<int, int>> adjacent_face_pairs(const std::vector<Face>& faces);

/// Polyline length through `spine` on the given vertex positions.
double spine_length(std::span<const Vec3> vertices, const std::vector<int>& spine);

} // namespace fishfit
