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

#include <array>

namespace fishfit::so3 {

inline Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

/// Rodrigues' formula for an axis-angle vector.
Eigen::Matrix3d exp(const Eigen::Vector3d& w);

/// Partial derivatives dR/dw_i, i = 0..2, of exp(w).
std::array<Eigen::Matrix3d, 3> exp_derivatives(const Eigen::Vector3d& w);

/// Inverse of exp; angle in [0, pi].
Eigen::Vector3d log(const Eigen::Matrix3d& r);

} // namespace fishfit::so3
