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
#include "fishfit/common.hpp"
#include "fishfit/so3.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace fishfit {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

Matrix3d skin_factor_matrix(const SkinFactor& a) {
  Matrix3d m;
  m << a[0], 0.0, 0.0, a[1], a[2], 0.0, a[3], a[4], a[5];
  return m;
}

Matrix3d skin_precision(const SkinFactor& a) {
  const Matrix3d m = skin_factor_matrix(a);
  return m.transpose() * m + kSkinEpsilon * Matrix3d::Identity();
}

DeformParams DeformParams::identity(double skin_precision) {
  DeformParams p;
  const double s = std::sqrt(skin_precision);
  for (auto& a : p.skin_chol) {
    a = {s, 0.0, s, 0.0, 0.0, s};
  }
  return p;
}

double DeformParams::root_scale() const {
  return std::exp(root_log_scale);
}

double DeformParams::joint_scale(int j) const {
  return std::exp(joint_log_scale[j]);
}

Eigen::VectorXd DeformParams::flatten() const {
  Eigen::VectorXd x(kDim);
  x.segment<3>(kRootRot) = root_rot;
  x.segment<3>(kRootTrans) = root_trans;
  x[kRootLogScale] = root_log_scale;
  for (int j = 0; j < 2; ++j) {
    x.segment<3>(kJointRot + 3 * j) = joint_rot[j];
    x.segment<3>(kJointTrans + 3 * j) = joint_trans[j];
    x[kJointLogScale + j] = joint_log_scale[j];
    for (int k = 0; k < 6; ++k) {
      x[kSkin + 6 * j + k] = skin_chol[j][k];
    }
  }
  return x;
}

DeformParams DeformParams::unflatten(const Eigen::VectorXd& x) {
  FISHFIT_THROW_IF(x.size() != kDim, ErrorCode::DimensionMismatch,
                   "parameter vector must have 33 entries");
  DeformParams p;
  p.root_rot = x.segment<3>(kRootRot);
  p.root_trans = x.segment<3>(kRootTrans);
  p.root_log_scale = x[kRootLogScale];
  for (int j = 0; j < 2; ++j) {
    p.joint_rot[j] = x.segment<3>(kJointRot + 3 * j);
    p.joint_trans[j] = x.segment<3>(kJointTrans + 3 * j);
    p.joint_log_scale[j] = x[kJointLogScale + j];
    for (int k = 0; k < 6; ++k) {
      p.skin_chol[j][k] = x[kSkin + 6 * j + k];
    }
  }
  return p;
}

ParamGroup param_group(int index) {
  using P = DeformParams;
  if (index < P::kRootTrans) return ParamGroup::RootRot;
  if (index < P::kRootLogScale) return ParamGroup::RootTrans;
  if (index < P::kJointRot) return ParamGroup::RootScale;
  if (index < P::kJointTrans) return ParamGroup::JointRot;
  if (index < P::kJointLogScale) return ParamGroup::JointTrans;
  if (index < P::kSkin) return ParamGroup::JointScale;
  return ParamGroup::Skin;
}

namespace {

nlohmann::ordered_json vec_json(const Vector3d& v) {
  return nlohmann::ordered_json::array({v.x(), v.y(), v.z()});
}

template <typename Json>
Vector3d vec_from(const Json& j) {
  const auto v = j.template get<std::vector<double>>();
  FISHFIT_THROW_IF(v.size() != 3, ErrorCode::MalformedFile, "expected a 3-vector");
  return Vector3d(v[0], v[1], v[2]);
}

} // namespace

nlohmann::ordered_json to_json(const DeformParams& p) {
  nlohmann::ordered_json j;
  j["root_rot"] = vec_json(p.root_rot);
  j["root_trans"] = vec_json(p.root_trans);
  j["root_log_scale"] = p.root_log_scale;
  j["joint_rot"] = {vec_json(p.joint_rot[0]), vec_json(p.joint_rot[1])};
  j["joint_trans"] = {vec_json(p.joint_trans[0]), vec_json(p.joint_trans[1])};
  j["joint_log_scale"] = {p.joint_log_scale[0], p.joint_log_scale[1]};
  j["skin_chol"] = {p.skin_chol[0], p.skin_chol[1]};
  return j;
}

DeformParams params_from_json(const nlohmann::json& j) {
  try {
    DeformParams p;
    p.root_rot = vec_from(j.at("root_rot"));
    p.root_trans = vec_from(j.at("root_trans"));
    p.root_log_scale = j.at("root_log_scale").get<double>();
    for (int k = 0; k < 2; ++k) {
      p.joint_rot[k] = vec_from(j.at("joint_rot").at(k));
      p.joint_trans[k] = vec_from(j.at("joint_trans").at(k));
      p.joint_log_scale[k] = j.at("joint_log_scale").at(k).get<double>();
      const auto a = j.at("skin_chol").at(k).get<std::vector<double>>();
      FISHFIT_THROW_IF(a.size() != 6, ErrorCode::MalformedFile, "skin_chol needs 6 entries");
      std::copy(a.begin(), a.end(), p.skin_chol[k].begin());
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("deform params: ") + e.what());
  }
}

void save_params(const DeformParams& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write " + path.string());
  out << to_json(p).dump(2) << '\n';
}

DeformParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
  return params_from_json(j);
}

namespace {

/// Everything about the current parameters that is shared by all vertices.
struct Prepared {
  std::array<Vector3d, 2> pivots;
  std::array<Matrix3d, 2> skin_a;
  std::array<Matrix3d, 2> joint_r;
  std::array<std::array<Matrix3d, 3>, 2> joint_dr;
  std::array<double, 2> joint_s;
  Matrix3d root_r;
  std::array<Matrix3d, 3> root_dr;
  double root_s;
  Vector3d centroid;
};

Prepared prepare(const TemplateMesh& mesh, const DeformParams& p, bool with_derivatives) {
  Prepared q;
  for (int j = 0; j < 2; ++j) {
    q.pivots[j] = mesh.joints[j];
    q.skin_a[j] = skin_factor_matrix(p.skin_chol[j]);
    q.joint_r[j] = so3::exp(p.joint_rot[j]);
    if (with_derivatives) {
      q.joint_dr[j] = so3::exp_derivatives(p.joint_rot[j]);
    }
    q.joint_s[j] = p.joint_scale(j);
  }
  q.root_r = so3::exp(p.root_rot);
  if (with_derivatives) {
    q.root_dr = so3::exp_derivatives(p.root_rot);
  }
  q.root_s = p.root_scale();
  q.centroid = mesh.centroid();
  return q;
}

Vector2d weights_of(const Prepared& q, const Vector3d& v) {
  Vector2d logits;
  for (int j = 0; j < 2; ++j) {
    const Vector3d d = v - q.pivots[j];
    logits[j] = -0.5 * ((q.skin_a[j] * d).squaredNorm() + kSkinEpsilon * d.squaredNorm());
  }
  const double mx = logits.maxCoeff();
  const Vector2d e = (logits.array() - mx).exp();
  return e / e.sum();
}

using RowBlock = Eigen::Matrix<double, 3, DeformParams::kDim>;

/// Deformed position of v; fills the 3 x kDim Jacobian when `jac` is set.
Vector3d transform_point(const Prepared& q, const DeformParams& p, const Vector3d& v,
                         RowBlock* jac) {
  const Vector2d w = weights_of(q, v);
  std::array<Vector3d, 2> d;
  std::array<Vector3d, 2> a;
  // Accumulated as displacements from v so identity parameters reproduce v
  // bit for bit.
  Vector3d v1 = v;
  for (int j = 0; j < 2; ++j) {
    d[j] = v - q.pivots[j];
    a[j] = q.pivots[j] + q.joint_s[j] * d[j];
    v1 += w[j] * ((q.joint_s[j] - 1.0) * d[j]);
  }
  std::array<Vector3d, 2> y;
  std::array<Vector3d, 2> b;
  Vector3d v2 = v1;
  Matrix3d m = Matrix3d::Zero();
  for (int j = 0; j < 2; ++j) {
    y[j] = v1 - q.pivots[j];
    const Vector3d ry = q.joint_r[j] * y[j];
    b[j] = q.pivots[j] + ry;
    v2 += w[j] * (ry - y[j]);
    m += w[j] * q.joint_r[j];
  }
  const Vector3d v3 = v2 + w[0] * p.joint_trans[0] + w[1] * p.joint_trans[1];
  const Vector3d u = v3 - q.centroid;
  const Vector3d ru = q.root_r * u;
  const Vector3d out = v3 + (q.root_s * ru - u) + p.root_trans;

  if (jac != nullptr) {
    using P = DeformParams;
    RowBlock& J = *jac;
    J.setZero();
    const Matrix3d g = q.root_s * q.root_r;
    J.block<3, 3>(0, P::kRootTrans).setIdentity();
    J.col(P::kRootLogScale) = q.root_s * ru;
    for (int i = 0; i < 3; ++i) {
      J.col(P::kRootRot + i) = q.root_s * (q.root_dr[i] * u);
    }
    std::array<Vector3d, 2> gw;  // d v3 / d w_j with the other weight held fixed
    for (int j = 0; j < 2; ++j) {
      J.block<3, 3>(0, P::kJointTrans + 3 * j) = g * w[j];
      for (int i = 0; i < 3; ++i) {
        J.col(P::kJointRot + 3 * j + i) = g * (w[j] * (q.joint_dr[j][i] * y[j]));
      }
      J.col(P::kJointLogScale + j) = g * (m * (w[j] * q.joint_s[j] * d[j]));
      gw[j] = b[j] + m * a[j] + p.joint_trans[j];
    }
    const Vector3d gbar = w[0] * gw[0] + w[1] * gw[1];
    for (int j = 0; j < 2; ++j) {
      // Softmax: d v3 / d logit_j = w_j (g_j - gbar).
      const Vector3d dlogit = g * (w[j] * (gw[j] - gbar));
      const Vector3d ad = q.skin_a[j] * d[j];
      // d logit_j / d A[r][c] = -(A d)_r d_c for the lower triangle.
      int k = 0;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c <= r; ++c, ++k) {
          J.col(P::kSkin + 6 * j + k) = dlogit * (-ad[r] * d[j][c]);
        }
      }
    }
  }
  return out;
}

} // namespace

Eigen::Vector2d point_skin_weights(const TemplateMesh& mesh, const DeformParams& params,
                                   const Vec3& point) {
  return weights_of(prepare(mesh, params, false), point);
}

SkinWeights skin_weights(const TemplateMesh& mesh, const DeformParams& params) {
  const Prepared q = prepare(mesh, params, false);
  SkinWeights sw;
  sw.w.resize(static_cast<Eigen::Index>(mesh.vertices.size()), 2);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    sw.w.row(static_cast<Eigen::Index>(i)) = weights_of(q, mesh.vertices[i]).transpose();
  }
  return sw;
}

DeformedMesh deform(const TemplateMesh& mesh, const DeformParams& params) {
  const Prepared q = prepare(mesh, params, false);
  DeformedMesh out{{}, mesh.faces, {}, mesh.keypoints, mesh.spine};
  out.vertices.resize(mesh.vertices.size());
  const auto n = static_cast<std::ptrdiff_t>(mesh.vertices.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.vertices[i] = transform_point(q, params, mesh.vertices[i], nullptr);
  }
  for (int j = 0; j < 2; ++j) {
    out.joints[j] = transform_point(q, params, mesh.joints[j], nullptr);
  }
  return out;
}

DeformJacobian deform_jacobian(const TemplateMesh& mesh, const DeformParams& params) {
  const Prepared q = prepare(mesh, params, true);
  const auto n = static_cast<std::ptrdiff_t>(mesh.vertices.size());
  DeformJacobian jac(3 * n, DeformParams::kDim);
#pragma omp parallel for schedule(static) if (n > 2048)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    RowBlock block;
    transform_point(q, params, mesh.vertices[i], &block);
    jac.middleRows<3>(3 * i) = block;
  }
  return jac;
}

Eigen::VectorXd deform_vjp(const DeformJacobian& jac, std::span<const Vec3> vertex_grads) {
  FISHFIT_THROW_IF(static_cast<Eigen::Index>(3 * vertex_grads.size()) != jac.rows(),
                   ErrorCode::DimensionMismatch, "gradient / jacobian size mismatch");
  if (vertex_grads.empty()) {
    return Eigen::VectorXd::Zero(DeformParams::kDim);
  }
  Eigen::Map<const Eigen::VectorXd> g(vertex_grads.data()->data(),
                                      static_cast<Eigen::Index>(3 * vertex_grads.size()));
  return jac.transpose() * g;
}

} // namespace fishfit
