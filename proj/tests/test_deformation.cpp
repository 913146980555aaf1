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
#include "fishfit/deformation.hpp"
#include "fishfit/so3.hpp"
#include "test_support.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

namespace fishfit {
namespace {

using testing::central_difference;
using testing::kDeg;
using testing::kPi;
using testing::max_relative_error;
using testing::uniform;

Eigen::Matrix3d angle_axis(const Vec3& w) {
  const double a = w.norm();
  if (a == 0.0) {
    return Eigen::Matrix3d::Identity();
  }
  return Eigen::AngleAxisd(a, w / a).toRotationMatrix();
}

/// Per-vertex literal evaluation: Gaussian weights from the precision
/// A^T A + eps I, then blended scaling, rotation and translation about the
/// joints, then root similarity about the rest centroid.
Vec3 literal_deform(const TemplateMesh& m, const DeformParams& p, const Vec3& v) {
  double e[2];
  for (int j = 0; j < 2; ++j) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    const auto& f = p.skin_chol[j];
    a(0, 0) = f[0];
    a(1, 0) = f[1];
    a(1, 1) = f[2];
    a(2, 0) = f[3];
    a(2, 1) = f[4];
    a(2, 2) = f[5];
    const Eigen::Matrix3d q = a.transpose() * a + 1e-6 * Eigen::Matrix3d::Identity();
    const Vec3 d = v - m.joints[j];
    e[j] = std::exp(-0.5 * d.dot(q * d));
  }
  const double w[2] = {e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])};
  Vec3 v1 = Vec3::Zero();
  for (int j = 0; j < 2; ++j) {
    v1 += w[j] * (m.joints[j] + std::exp(p.joint_log_scale[j]) * (v - m.joints[j]));
  }
  Vec3 v2 = Vec3::Zero();
  for (int j = 0; j < 2; ++j) {
    v2 += w[j] * (m.joints[j] + angle_axis(p.joint_rot[j]) * (v1 - m.joints[j]));
  }
  const Vec3 v3 = v2 + w[0] * p.joint_trans[0] + w[1] * p.joint_trans[1];
  Vec3 c = Vec3::Zero();
  for (const auto& x : m.vertices) {
    c += x;
  }
  c /= static_cast<double>(m.vertices.size());
  return c + std::exp(p.root_log_scale) * (angle_axis(p.root_rot) * (v3 - c)) + p.root_trans;
}

DeformParams random_params(std::mt19937_64& rng) {
  DeformParams p = DeformParams::identity();
  for (auto* r : {&p.root_rot, &p.joint_rot[0], &p.joint_rot[1]}) {
    *r = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  }
  p.root_trans = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 1, 4));
  p.root_log_scale = uniform(rng, -0.5, 0.5);
  for (int j = 0; j < 2; ++j) {
    p.joint_trans[j] = Vec3(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1));
    p.joint_log_scale[j] = uniform(rng, -0.3, 0.3);
    for (double& a : p.skin_chol[j]) {
      a += uniform(rng, -3, 3);
    }
  }
  return p;
}

TEST(SkinWeights, EquidistantIsHalf) {
  const TemplateMesh m = make_fish_template(8);
  const DeformParams p = DeformParams::identity();
  // Joints differ in x and z only, so these offsets keep the point equidistant.
  const Vec3 axis = m.joints[1] - m.joints[0];
  const Vec3 mid = 0.5 * (m.joints[0] + m.joints[1]) + Vec3(0, 0.05, 0) +
                   0.1 * Vec3(-axis.z(), 0, axis.x());
  const Eigen::Vector2d w = point_skin_weights(m, p, mid);
  EXPECT_NEAR(w[0], 0.5, 1e-12);
  EXPECT_NEAR(w[1], 0.5, 1e-12);
}

TEST(SkinWeights, UnitPrecisionOnJoint) {
  TemplateMesh m = make_fish_template(8);
  m.joints = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  DeformParams p = DeformParams::identity();
  p.skin_chol[0] = p.skin_chol[1] = {1, 0, 1, 0, 0, 1};
  const Eigen::Vector2d w = point_skin_weights(m, p, m.joints[0]);
  EXPECT_NEAR(w[0], 0.6225, 5e-5);
  EXPECT_NEAR(w[1], 0.3775, 5e-5);
  const double far = std::exp(-0.5 * (1.0 + kSkinEpsilon));
  EXPECT_NEAR(w[0], 1.0 / (1.0 + far), 1e-15);
}

TEST(SkinWeights, RowsSumToOne) {
  const TemplateMesh m = make_fish_template(16);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const SkinWeights sw = skin_weights(m, random_params(rng));
    for (Eigen::Index i = 0; i < sw.w.rows(); ++i) {
      EXPECT_NEAR(sw.w(i, 0) + sw.w(i, 1), 1.0, 1e-9);
      EXPECT_GE(sw.w(i, 0), 0.0);
      EXPECT_LE(sw.w(i, 1), 1.0);
    }
  }
}

TEST(Deform, IdentityIsExact) {
  const TemplateMesh m = make_fish_template(16);
  const DeformedMesh d = deform(m, DeformParams::identity());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    EXPECT_EQ(d.vertices[i], m.vertices[i]) << i;
  }
  EXPECT_EQ(d.joints[0], m.joints[0]);
}

TEST(Deform, RootHalfTurnAboutZ) {
  const TemplateMesh m = make_fish_template(16);
  DeformParams p = DeformParams::identity();
  p.root_rot = Vec3(0, 0, kPi);
  const DeformedMesh d = deform(m, p);
  const Vec3 c = m.centroid();
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const Vec3 r = m.vertices[i] - c;
    const Vec3 expect = c + Vec3(-r.x(), -r.y(), r.z());
    EXPECT_LE((d.vertices[i] - expect).norm(), 1e-9) << i;
  }
}

TEST(Deform, SingleJointBend) {
  const TemplateMesh m = make_fish_template(16);
  DeformParams p = DeformParams::identity();
  p.joint_rot[1] = Vec3(0, 0, 30 * kDeg);
  const DeformedMesh d = deform(m, p);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    if (m.vertices[i].x() < m.joints[0].x()) {
      EXPECT_LT((d.vertices[i] - m.vertices[i]).norm(), 1e-2) << i;
    }
  }
  // Scalar script: rotate the tail tip by 30 degrees about joint 2 in the xy plane.
  const Vec3 t = m.vertices[m.keypoints.tail];
  const Vec3 j = m.joints[1];
  const double c = std::cos(30 * kDeg);
  const double s = std::sin(30 * kDeg);
  const double dx = t.x() - j.x();
  const double dy = t.y() - j.y();
  const Vec3 expect(j.x() + c * dx - s * dy, j.y() + s * dx + c * dy, t.z());
  EXPECT_LE((d.vertices[m.keypoints.tail] - expect).norm(), 1e-6);
}

TEST(Deform, MatchesLiteralOracle) {
  const TemplateMesh m = testing::small_template();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const DeformParams p = random_params(rng);
    const DeformedMesh d = deform(m, p);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      EXPECT_LE((d.vertices[i] - literal_deform(m, p, m.vertices[i])).norm(), 1e-12);
    }
    EXPECT_LE((d.joints[1] - literal_deform(m, p, m.joints[1])).norm(), 1e-12);
  }
}

TEST(Deform, RigidRootPreservesDistances) {
  const TemplateMesh m = make_fish_template(16);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    DeformParams p = DeformParams::identity();
    p.root_rot = Vec3(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3));
    p.root_trans = Vec3(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    const DeformedMesh d = deform(m, p);
    for (std::size_t i = 0; i + 7 < m.vertices.size(); i += 3) {
      const double a = (m.vertices[i] - m.vertices[i + 7]).norm();
      const double b = (d.vertices[i] - d.vertices[i + 7]).norm();
      EXPECT_NEAR(a, b, 1e-9);
    }
  }
}

TEST(Jacobian, SimpleBlocks) {
  const TemplateMesh m = make_fish_template(8);
  const DeformJacobian jac = deform_jacobian(m, DeformParams::identity());
  const Vec3 c = m.centroid();
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const auto rows = jac.middleRows<3>(3 * static_cast<Eigen::Index>(i));
    EXPECT_EQ(Eigen::Matrix3d(rows.block<3, 3>(0, DeformParams::kRootTrans)),
              Eigen::Matrix3d::Identity());
    EXPECT_LE((Vec3(rows.col(DeformParams::kRootLogScale)) - (m.vertices[i] - c)).norm(), 1e-15);
  }
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const TemplateMesh m = testing::small_template();
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const DeformParams p = random_params(rng);
    const DeformJacobian jac = deform_jacobian(m, p);
    const Eigen::VectorXd x = p.flatten();
    // One coordinate at a time: FD of each Jacobian row.
    for (Eigen::Index r = 0; r < jac.rows(); r += 5) {
      const auto f = [&](const Eigen::VectorXd& y) {
        return deform(m, DeformParams::unflatten(y)).vertices[r / 3][r % 3];
      };
      const Eigen::VectorXd num = central_difference(f, x, 1e-5);
      worst = std::max(worst, max_relative_error(jac.row(r).transpose(), num));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Params, FlattenRoundTripAndJson) {
  std::mt19937_64 rng(9);
  const DeformParams p = random_params(rng);
  const DeformParams q = DeformParams::unflatten(p.flatten());
  EXPECT_EQ(p.flatten(), q.flatten());
  const DeformParams r = params_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(p.flatten(), r.flatten());
  for (int i = 0; i < DeformParams::kDim; ++i) {
    (void)param_group(i);
  }
  EXPECT_EQ(param_group(DeformParams::kSkin), ParamGroup::Skin);
  EXPECT_EQ(param_group(DeformParams::kRootRot), ParamGroup::RootRot);
}

TEST(So3, ExpLogRoundTrip) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5));
    EXPECT_LE((so3::exp(w) - angle_axis(w)).norm(), 1e-12);
    EXPECT_LE((so3::log(so3::exp(w)) - w).norm(), 1e-9);
  }
}

} // namespace
} // namespace fishfit
