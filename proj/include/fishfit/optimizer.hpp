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

#include "fishfit/camera.hpp"
#include "fishfit/common.hpp"
#include "fishfit/deformation.hpp"
#include "fishfit/image.hpp"
#include "fishfit/losses.hpp"
#include "fishfit/mesh.hpp"
#include "fishfit/renderer.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fishfit {

inline constexpr int kNumParamGroups = 7;

/// Enabled flag per ParamGroup, indexed by the enum value.
using GroupMask = std::array<bool, kNumParamGroups>;

GroupMask mask_of(std::initializer_list<ParamGroup> groups);
GroupMask all_groups();

struct Stage {
  GroupMask mask{};
  int iterations = 0;
};

struct FitConfig {
  double lr_rot = 0.02;
  double lr_trans = 0.02;
  double lr_scale = 0.01;
  double lr_skin = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_iters = 500;
  std::vector<Stage> stages = default_stages();
  double convergence_tol = 1e-5;
  int convergence_window = 20;
  std::uint64_t seed = 0;
  /// In-plane joint bend hypotheses tried by initial_guess, per joint.
  std::vector<double> init_bends_rad = default_init_bends();

  RenderConfig render;
  LossWeights weights;

  /// Writes the best parameters every N iterations when > 0 and a path is set.
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_path;

  static std::vector<Stage> default_stages();
  static std::vector<double> default_init_bends();

  void validate() const;

  [[nodiscard]] double learning_rate(ParamGroup g) const;
};

nlohmann::ordered_json to_json(const FitConfig& cfg);
/// Missing keys keep their defaults.
FitConfig fit_config_from_json(const nlohmann::json& j);

struct TraceRow {
  int iter = 0;
  int stage = 0;
  LossReport loss;
  double hard_iou = 0.0;
};

struct FitResult {
  DeformParams params;
  LossReport final_loss;
  double iou = 0.0;
  int iterations_run = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

/// Raised by fit_frame when the loss becomes non-finite; carries the trace so far.
class FitAborted : public Error {
 public:
  FitAborted(const std::string& what, std::vector<TraceRow> trace)
      : Error(ErrorCode::NonFiniteLoss, what), trace_(std::move(trace)) {}

  [[nodiscard]] const std::vector<TraceRow>& trace() const noexcept { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

struct AdamState {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(DeformParams::kDim);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(DeformParams::kDim);
  /// Per-parameter step counts, so groups enabled in later stages get their
  /// own bias correction.
  Eigen::VectorXi t = Eigen::VectorXi::Zero(DeformParams::kDim);
};

/**
 * One bias-corrected Adam update of the flattened parameters `x`, touching
 * only entries whose group is enabled in `mask`. Disabled entries and their
 * moments are left bit-unchanged.
 */
void adam_step(Eigen::VectorXd& x, AdamState& state, const Eigen::VectorXd& grad,
               const FitConfig& cfg, const GroupMask& mask);

/// Everything one loss evaluation produces.
struct Evaluation {
  LossReport loss;
  Eigen::VectorXd grad;
  SoftSilhouette rendered;
};

/// Per-target data shared by every evaluation of one fit.
struct FitTarget {
  SoftSilhouette mask;
  Grid<double> sdf;
  LossTopology topology;

  static FitTarget make(const TemplateMesh& tmpl, const SoftSilhouette& mask);
};

Evaluation evaluate(const TemplateMesh& tmpl, const FitTarget& target, const CameraModel& cam,
                    const FitConfig& cfg, const DeformParams& params, bool with_grad = true);

/// Root rotation that lays the template flat on the reference plane, dorsal
/// side toward the camera, with the head-to-tail axis at `yaw_rad` in world XY.
Eigen::Matrix3d plane_aligned_rotation(const CameraModel& cam, double yaw_rad);

/**
 * Starting pose for a fit. The mask is mapped onto the reference plane and
 * its area moments are matched by the top view of the template, lying flat
 * on the plane, for every pair of bend hypotheses and both head/tail
 * polarities: area fixes the root scale, the centroid fixes the position
 * and the principal axis fixes the heading. The candidate with the lowest
 * loss is returned.
 */
DeformParams initial_guess(const TemplateMesh& tmpl, const SoftSilhouette& target,
                           const CameraModel& cam, const PlaneHomography& hom,
                           const FitConfig& cfg);

FitResult fit_frame(const TemplateMesh& tmpl, const SoftSilhouette& target, const CameraModel& cam,
                    const FitConfig& cfg, const DeformParams& init);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

} // namespace fishfit
