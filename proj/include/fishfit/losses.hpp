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

#include "fishfit/deformation.hpp"
#include "fishfit/image.hpp"
#include "fishfit/mesh.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace fishfit {

struct LossWeights {
  double lambda_s = 1.0;
  double lambda_t = 10.0;
  double lambda_n = 0.003;
  double lambda_l = 0.003;
};

struct LossReport {
  double total = 0.0;
  double iou = 0.0;
  double boundary = 0.0;
  double scale_reg = 0.0;
  double trans_reg = 0.0;
  double normal = 0.0;
  double laplacian = 0.0;
};

struct PixelLoss {
  double value = 0.0;
  SoftSilhouette grad;
};

struct VertexLoss {
  double value = 0.0;
  std::vector<Vec3> grad;
};

/// 1 - sum(p t) / sum(p + t - p t).
PixelLoss soft_iou_loss(const SoftSilhouette& pred, const SoftSilhouette& target);

/// mean over pixels of pred * sdf.
PixelLoss boundary_loss(const SoftSilhouette& pred, const Grid<double>& target_sdf);

/**
 * Exact Euclidean signed distance in pixels, computed with two separable
 * lower-envelope passes. Background pixels hold the distance to the nearest
 * foreground pixel; foreground pixels hold -(distance to the nearest
 * background pixel - 1), so the outermost foreground ring is 0.
 * Input is binarized at 0.5.
 */
Grid<double> distance_transform(const SoftSilhouette& mask);

struct RegLoss {
  double scale = 0.0;
  double trans = 0.0;
  Eigen::VectorXd grad_scale;  // d scale / d flattened params
  Eigen::VectorXd grad_trans;
};

/// sum_j (S_j - 1)^2 and sum_j |T_j|^2 over the two joints.
RegLoss scale_trans_reg(const DeformParams& params);

VertexLoss normal_consistency_loss(const DeformedMesh& mesh);
VertexLoss normal_consistency_loss(const DeformedMesh& mesh,
                                   const std::vector<std::pair<int, int>>& face_pairs);

VertexLoss laplacian_loss(const DeformedMesh& mesh, const Adjacency& neighbors);

/// Topology-derived data reused across iterations.
struct LossTopology {
  Adjacency neighbors;
  std::vector<std::pair<int, int>> face_pairs;

  static LossTopology from(const TemplateMesh& mesh);
};

struct TotalLoss {
  LossReport report;
  SoftSilhouette pixel_grad;      // to render_backward
  std::vector<Vec3> vertex_grad;  // to the deformation Jacobian
  Eigen::VectorXd param_grad;     // direct regularizer terms
};

TotalLoss total_loss(const SoftSilhouette& pred, const SoftSilhouette& target,
                     const Grid<double>& target_sdf, const DeformedMesh& mesh,
                     const DeformParams& params, const LossWeights& weights,
                     const LossTopology& topology);

} // namespace fishfit
