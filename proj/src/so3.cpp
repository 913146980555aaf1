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
#include "fishfit/so3.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace fishfit::so3 {

namespace {
constexpr double kSmallAngle = 1e-10;
}

Eigen::Matrix3d exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d k = hat(w);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

std::array<Eigen::Matrix3d, 3> exp_derivatives(const Eigen::Vector3d& w) {
  std::array<Eigen::Matrix3d, 3> out;
  const double theta2 = w.squaredNorm();
  if (theta2 < kSmallAngle * kSmallAngle) {
    for (int i = 0; i < 3; ++i) {
      out[i] = hat(Eigen::Vector3d::Unit(i));
    }
    return out;
  }
  // Gallego & Yezzi closed form:
  // dR/dw_i = (w_i [w]x + [w x (I - R) e_i]x) R / |w|^2
  const Eigen::Matrix3d r = exp(w);
  const Eigen::Matrix3d k = hat(w);
  const Eigen::Matrix3d i_minus_r = Eigen::Matrix3d::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d v = w.cross(i_minus_r.col(i));
    out[i] = (w[i] * k + hat(v)) * r / theta2;
  }
  return out;
}

Eigen::Vector3d log(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

} // namespace fishfit::so3
