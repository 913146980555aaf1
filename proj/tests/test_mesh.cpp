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
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>

namespace fishfit {
namespace {

using testing::scratch_dir;

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

const char* kTriangleAnnotation =
    R"({"joints": [[0.3, 0, 0], [0.6, 0, 0]],
        "keypoints": {"head": 0, "center": 1, "tail": 2},
        "spine": [0, 1, 1, 1, 2]})";

TEST(LoadMesh, SingleTriangle) {
  const auto dir = scratch_dir("mesh_tri");
  write_text(dir / "tri.obj", "# one face\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  write_text(dir / "tri.json", kTriangleAnnotation);
  const TemplateMesh m = load_mesh(dir / "tri.obj");
  EXPECT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.face_list().size(), 1u);
  EXPECT_EQ(m.face_list()[0], (Face{0, 1, 2}));
}

TEST(LoadMesh, IndexOutOfRange) {
  const auto dir = scratch_dir("mesh_oor");
  write_text(dir / "tri.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
  write_text(dir / "tri.json", kTriangleAnnotation);
  try {
    load_mesh(dir / "tri.obj");
    FAIL() << "expected InvalidTopology";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidTopology);
  }
}

TEST(LoadMesh, MalformedRecord) {
  const auto dir = scratch_dir("mesh_bad");
  write_text(dir / "tri.obj", "v 0 0 zero\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  write_text(dir / "tri.json", kTriangleAnnotation);
  try {
    load_mesh(dir / "tri.obj");
    FAIL() << "expected MalformedFile";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedFile);
  }
}

TEST(LoadMesh, MissingAnnotation) {
  const auto dir = scratch_dir("mesh_noann");
  write_text(dir / "tri.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  try {
    load_mesh(dir / "tri.obj");
    FAIL() << "expected MissingAnnotation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAnnotation);
  }
  write_text(dir / "tri.json", R"({"joints": [[0, 0, 0], [1, 0, 0]]})");
  try {
    load_mesh(dir / "tri.obj");
    FAIL() << "expected MissingAnnotation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAnnotation);
  }
}

TEST(LoadMesh, DegenerateFaceRejected) {
  const auto dir = scratch_dir("mesh_degen");
  write_text(dir / "tri.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
  write_text(dir / "tri.json", kTriangleAnnotation);
  try {
    load_mesh(dir / "tri.obj");
    FAIL() << "expected DegenerateFace";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateFace);
  }
}

TEST(LoadMesh, TemplateRoundTrip) {
  const auto dir = scratch_dir("mesh_rt");
  const TemplateMesh a = make_fish_template(16);
  save_mesh(a, dir / "fish.obj");
  const TemplateMesh b = load_mesh(dir / "fish.obj");
  ASSERT_EQ(a.vertices.size(), b.vertices.size());
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    EXPECT_LE((a.vertices[i] - b.vertices[i]).cwiseAbs().maxCoeff(), 1e-6) << i;
  }
  EXPECT_EQ(a.face_list(), b.face_list());
  EXPECT_EQ(a.spine, b.spine);
  EXPECT_EQ(a.keypoints.head, b.keypoints.head);
  EXPECT_EQ(a.keypoints.center, b.keypoints.center);
  EXPECT_EQ(a.keypoints.tail, b.keypoints.tail);
  EXPECT_LE((a.joints[1] - b.joints[1]).norm(), 1e-6);
}

TEST(Template, MinimalSegments) {
  const TemplateMesh m = make_fish_template(4);
  EXPECT_NO_THROW(validate(m));
  EXPECT_GE(m.face_list().size(), 18u);
  EXPECT_EQ(m.spine.size(), 5u);
  EXPECT_THROW(make_fish_template(3), Error);
}

TEST(Template, UnitLengthAndJointPlacement) {
  const TemplateMesh m = make_fish_template(32);
  const Vec3& h = m.vertices[m.keypoints.head];
  const Vec3& t = m.vertices[m.keypoints.tail];
  EXPECT_NEAR((h - t).norm(), 1.0, 1e-9);
  double xmin = 1e9;
  double xmax = -1e9;
  for (const auto& v : m.vertices) {
    xmin = std::min(xmin, v.x());
    xmax = std::max(xmax, v.x());
  }
  EXPECT_NEAR(xmax - xmin, 1.0, 1e-12);
  EXPECT_NEAR(m.joints[0].x(), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.joints[1].x(), 2.0 / 3.0, 1e-12);
  // Center sits between the joints along the spine.
  EXPECT_GT(m.vertices[m.keypoints.center].x(), m.joints[0].x());
  EXPECT_LT(m.vertices[m.keypoints.center].x(), m.joints[1].x());
}

TEST(Template, SpineTriangleInequality) {
  for (int n : {4, 5, 7, 16, 31}) {
    const TemplateMesh m = make_fish_template(n);
    const double chord = (m.vertices[m.keypoints.head] - m.vertices[m.keypoints.tail]).norm();
    EXPECT_GE(spine_length(m.vertices, m.spine), chord - 1e-15) << n;
    // Straight template: collinear spine.
    EXPECT_NEAR(spine_length(m.vertices, m.spine), chord, 1e-12) << n;
  }
}

TEST(Normals, AxisAlignedAndFlipped) {
  const std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const auto n = face_normals(v, {Face{0, 1, 2}});
  EXPECT_LE((n[0] - Vec3(0, 0, 1)).norm(), 1e-15);
  const auto r = face_normals(v, {Face{0, 2, 1}});
  EXPECT_LE((r[0] - Vec3(0, 0, -1)).norm(), 1e-15);
}

TEST(Normals, DegenerateFace) {
  const std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  try {
    face_normals(v, {Face{0, 1, 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateFace);
  }
}

TEST(Normals, OutwardOnConvexProfile) {
  // Lens-shaped convex outline: every cross section is convex.
  const auto lens = [](double x) { return 0.2 * std::sqrt(std::max(x * (1.0 - x), 1e-6)); };
  const TemplateMesh m = make_fish_template(16, lens, 12);
  const DeformedMesh d = as_deformed(m);
  const auto normals = face_normals(d);
  const Vec3 c = m.centroid();
  for (std::size_t f = 0; f < normals.size(); ++f) {
    const Face& face = m.face_list()[f];
    const Vec3 fc = (m.vertices[face[0]] + m.vertices[face[1]] + m.vertices[face[2]]) / 3.0;
    EXPECT_GT(normals[f].dot(fc - c), 0.0) << "face " << f;
    EXPECT_NEAR(normals[f].norm(), 1.0, 1e-12);
  }
}

TEST(Neighbors, SingleTriangle) {
  const auto adj = vertex_neighbors({Face{0, 1, 2}}, 3);
  EXPECT_EQ(adj[0], (std::set<int>{1, 2}));
  EXPECT_EQ(adj[1], (std::set<int>{0, 2}));
  EXPECT_EQ(adj[2], (std::set<int>{0, 1}));
}

TEST(Neighbors, SymmetricAndHandshake) {
  const TemplateMesh m = make_fish_template(16);
  const auto adj = vertex_neighbors(m);
  std::size_t degree_sum = 0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    EXPECT_GE(adj[i].size(), 2u);
    degree_sum += adj[i].size();
    for (int j : adj[i]) {
      EXPECT_TRUE(adj[j].count(static_cast<int>(i)));
    }
  }
  // Independent edge enumeration straight from the face list.
  std::set<std::pair<int, int>> edges;
  for (const Face& f : m.face_list()) {
    for (int e = 0; e < 3; ++e) {
      edges.insert({std::min(f[e], f[(e + 1) % 3]), std::max(f[e], f[(e + 1) % 3])});
    }
  }
  EXPECT_EQ(degree_sum, 2 * edges.size());
  EXPECT_EQ(unique_edges(m.face_list()).size(), edges.size());
}

TEST(Topology, ClosedTemplateEdgesSharedTwice) {
  const TemplateMesh m = make_fish_template(16);
  std::map<std::pair<int, int>, int> uses;
  for (const Face& f : m.face_list()) {
    for (int e = 0; e < 3; ++e) {
      ++uses[{std::min(f[e], f[(e + 1) % 3]), std::max(f[e], f[(e + 1) % 3])}];
    }
  }
  for (const auto& [edge, n] : uses) {
    EXPECT_EQ(n, 2);
  }
  // Euler characteristic of a sphere.
  EXPECT_EQ(static_cast<long>(m.vertices.size()) - static_cast<long>(uses.size()) +
                static_cast<long>(m.face_list().size()),
            2);
  EXPECT_EQ(adjacent_face_pairs(m.face_list()).size(), uses.size());
}

TEST(Topology, DeformSharesFaces) {
  const TemplateMesh m = make_fish_template(8);
  DeformParams p = DeformParams::identity();
  p.joint_rot[0] = Vec3(0, 0, 0.4);
  const DeformedMesh d = deform(m, p);
  EXPECT_EQ(d.faces.get(), m.faces.get());
  EXPECT_EQ(d.vertices.size(), m.vertices.size());
}

} // namespace
} // namespace fishfit
