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

#include "fishfit/mesh.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <filesystem>

namespace fishfit {

/// Added to A^T A so the skinning precision stays positive definite.
inline constexpr double kSkinEpsilon = 1e-6;

/// Default isotropic skinning precision for a unit-length template.
inline constexpr double kDefaultSkinPrecision = 100.0;

/// Lower-triangular factor stored row-major: a00, a10, a11, a20, a21, a22.
using SkinFactor = std::array<double, 6>;

Eigen::Matrix3d skin_factor_matrix(const SkinFactor& a);

/// Precision Q = A^T A + eps I.
Eigen::Matrix3d skin_precision(const SkinFactor& a);

/**
 * Learnable per-frame deformation: root similarity transform plus per-joint
 * rotation, translation, scale and skinning precision. Rotations are
 * axis-angle vectors and scales are stored as logarithms.
 */
struct DeformParams {
  Eigen::Vector3d root_rot = Eigen::Vector3d::Zero();
  Eigen::Vector3d root_trans = Eigen::Vector3d::Zero();
  double root_log_scale = 0.0;
  std::array<Eigen::Vector3d, 2> joint_rot{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  std::array<Eigen::Vector3d, 2> joint_trans{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  std::array<double, 2> joint_log_scale{0.0, 0.0};
  std::array<SkinFactor, 2> skin_chol{};

  static constexpr int kDim = 33;

  // Offsets into the flattened vector.
  static constexpr int kRootRot = 0;
  static constexpr int kRootTrans = 3;
  static constexpr int kRootLogScale = 6;
  static constexpr int kJointRot = 7;        // + 3 j
  static constexpr int kJointTrans = 13;     // + 3 j
  static constexpr int kJointLogScale = 19;  // + j
  static constexpr int kSkin = 21;           // + 6 j

  /// Zero motion, unit scales, isotropic skin precision.
  static DeformParams identity(double skin_precision = kDefaultSkinPrecision);

  [[nodiscard]] double root_scale() const;
  [[nodiscard]] double joint_scale(int j) const;

  [[nodiscard]] Eigen::VectorXd flatten() const;
  static DeformParams unflatten(const Eigen::VectorXd& x);
};

enum class ParamGroup { RootRot, RootTrans, RootScale, JointRot, JointTrans, JointScale, Skin };

/// Group of each flattened parameter index.
ParamGroup param_group(int index);

nlohmann::ordered_json to_json(const DeformParams& p);
DeformParams params_from_json(const nlohmann::json& j);
void save_params(const DeformParams& p, const std::filesystem::path& path);
DeformParams load_params(const std::filesystem::path& path);

/// Row i holds (W_{1,i}, W_{2,i}).
struct SkinWeights {
  Eigen::Matrix<double, Eigen::Dynamic, 2> w;
};

/// Normalized two-component Gaussian weights of a single point.
Eigen::Vector2d point_skin_weights(const TemplateMesh& mesh, const DeformParams& params,
                                   const Vec3& point);

SkinWeights skin_weights(const TemplateMesh& mesh, const DeformParams& params);

/**
 * Applies, per vertex: blended joint scaling about the joint pivots, blended
 * joint rotation about the pivots, blended joint translation, then root
 * scaling and rotation about the template centroid followed by root
 * translation. Joints are carried through the same transform.
 */
DeformedMesh deform(const TemplateMesh& mesh, const DeformParams& params);

/// d(vertex coords)/d(flattened params): row 3 i + k is coordinate k of
/// vertex i.
using DeformJacobian = Eigen::Matrix<double, Eigen::Dynamic, DeformParams::kDim, Eigen::RowMajor>;

DeformJacobian deform_jacobian(const TemplateMesh& mesh, const DeformParams& params);

/// J^T g for per-vertex gradients g.
Eigen::VectorXd deform_vjp(const DeformJacobian& jac, std::span<const Vec3> vertex_grads);

} // namespace fishfit
