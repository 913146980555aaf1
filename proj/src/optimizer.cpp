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
#include "fishfit/optimizer.hpp"
#include "fishfit/so3.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

namespace fishfit {

GroupMask mask_of(std::initializer_list<ParamGroup> groups) {
  GroupMask m{};
  for (ParamGroup g : groups) {
    m[static_cast<int>(g)] = true;
  }
  return m;
}

GroupMask all_groups() {
  GroupMask m{};
  m.fill(true);
  return m;
}

std::vector<Stage> FitConfig::default_stages() {
  using G = ParamGroup;
  return {
      {mask_of({G::RootRot, G::RootTrans, G::RootScale}), 150},
      {mask_of({G::RootRot, G::RootTrans, G::RootScale, G::JointRot}), 150},
      {all_groups(), 200},
  };
}

std::vector<double> FitConfig::default_init_bends() {
  constexpr double kDeg = std::numbers::pi / 180.0;
  return {-40.0 * kDeg, -20.0 * kDeg, 0.0, 20.0 * kDeg, 40.0 * kDeg};
}

void FitConfig::validate() const {
  FISHFIT_THROW_IF(!(lr_rot > 0.0 && lr_trans > 0.0 && lr_scale > 0.0 && lr_skin > 0.0),
                   ErrorCode::InvalidArgument, "learning rates must be positive");
  FISHFIT_THROW_IF(!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0),
                   ErrorCode::InvalidArgument, "Adam betas must lie in [0, 1)");
  FISHFIT_THROW_IF(!(eps > 0.0), ErrorCode::InvalidArgument, "eps must be positive");
  FISHFIT_THROW_IF(max_iters < 1, ErrorCode::InvalidArgument, "max_iters must be positive");
  FISHFIT_THROW_IF(convergence_window < 1, ErrorCode::InvalidArgument,
                   "convergence_window must be positive");
  long total = 0;
  for (const auto& s : stages) {
    FISHFIT_THROW_IF(s.iterations < 0, ErrorCode::InvalidArgument,
                     "stage iteration counts must be non-negative");
    total += s.iterations;
  }
  FISHFIT_THROW_IF(total > max_iters, ErrorCode::InvalidArgument,
                   "stage iterations exceed max_iters");
  FISHFIT_THROW_IF(weights.lambda_s < 0.0 || weights.lambda_t < 0.0 || weights.lambda_n < 0.0 ||
                       weights.lambda_l < 0.0,
                   ErrorCode::InvalidArgument, "loss weights must be non-negative");
  render.validate();
}

double FitConfig::learning_rate(ParamGroup g) const {
  switch (g) {
    case ParamGroup::RootRot:
    case ParamGroup::JointRot:
      return lr_rot;
    case ParamGroup::RootTrans:
    case ParamGroup::JointTrans:
      return lr_trans;
    case ParamGroup::RootScale:
    case ParamGroup::JointScale:
      return lr_scale;
    case ParamGroup::Skin:
      return lr_skin;
  }
  return lr_skin;
}

namespace {

constexpr const char* kGroupNames[kNumParamGroups] = {
    "root_rot", "root_trans", "root_scale", "joint_rot", "joint_trans", "joint_scale", "skin"};

} // namespace

nlohmann::ordered_json to_json(const FitConfig& cfg) {
  nlohmann::ordered_json j;
  j["lr_rot"] = cfg.lr_rot;
  j["lr_trans"] = cfg.lr_trans;
  j["lr_scale"] = cfg.lr_scale;
  j["lr_skin"] = cfg.lr_skin;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["eps"] = cfg.eps;
  j["max_iters"] = cfg.max_iters;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : cfg.stages) {
    nlohmann::ordered_json js;
    auto groups = nlohmann::ordered_json::array();
    for (int g = 0; g < kNumParamGroups; ++g) {
      if (s.mask[g]) {
        groups.push_back(kGroupNames[g]);
      }
    }
    js["groups"] = groups;
    js["iterations"] = s.iterations;
    stages.push_back(js);
  }
  j["stages"] = stages;
  j["convergence_tol"] = cfg.convergence_tol;
  j["convergence_window"] = cfg.convergence_window;
  j["seed"] = cfg.seed;
  j["render"] = {{"sigma", cfg.render.sigma},
                 {"gamma_clip", cfg.render.gamma_clip},
                 {"near_z", cfg.render.near_z},
                 {"cull_logit", cfg.render.cull_logit}};
  j["weights"] = {{"lambda_s", cfg.weights.lambda_s},
                  {"lambda_t", cfg.weights.lambda_t},
                  {"lambda_n", cfg.weights.lambda_n},
                  {"lambda_l", cfg.weights.lambda_l}};
  j["checkpoint_every"] = cfg.checkpoint_every;
  auto bends = nlohmann::ordered_json::array();
  for (double b : cfg.init_bends_rad) {
    bends.push_back(b * 180.0 / std::numbers::pi);
  }
  j["init_bends_deg"] = bends;
  return j;
}

FitConfig fit_config_from_json(const nlohmann::json& j) {
  FitConfig c;
  try {
    auto get = [&j](const char* key, auto& out) {
      if (j.contains(key)) {
        out = j.at(key).get<std::decay_t<decltype(out)>>();
      }
    };
    get("lr_rot", c.lr_rot);
    get("lr_trans", c.lr_trans);
    get("lr_scale", c.lr_scale);
    get("lr_skin", c.lr_skin);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("max_iters", c.max_iters);
    get("convergence_tol", c.convergence_tol);
    get("convergence_window", c.convergence_window);
    get("seed", c.seed);
    get("checkpoint_every", c.checkpoint_every);
    if (j.contains("init_bends_deg")) {
      c.init_bends_rad.clear();
      for (const auto& b : j.at("init_bends_deg")) {
        c.init_bends_rad.push_back(b.get<double>() * std::numbers::pi / 180.0);
      }
    }
    if (j.contains("stages")) {
      c.stages.clear();
      for (const auto& js : j.at("stages")) {
        Stage s;
        for (const auto& name : js.at("groups")) {
          const auto n = name.get<std::string>();
          int found = -1;
          for (int g = 0; g < kNumParamGroups; ++g) {
            if (n == kGroupNames[g]) {
              found = g;
            }
          }
          FISHFIT_THROW_IF(found < 0, ErrorCode::MalformedFile, "unknown parameter group " + n);
          s.mask[found] = true;
        }
        s.iterations = js.at("iterations").get<int>();
        c.stages.push_back(s);
      }
    }
    if (j.contains("render")) {
      const auto& r = j.at("render");
      if (r.contains("sigma")) c.render.sigma = r.at("sigma").get<double>();
      if (r.contains("gamma_clip")) c.render.gamma_clip = r.at("gamma_clip").get<double>();
      if (r.contains("near_z")) c.render.near_z = r.at("near_z").get<double>();
      if (r.contains("cull_logit")) c.render.cull_logit = r.at("cull_logit").get<double>();
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      if (w.contains("lambda_s")) c.weights.lambda_s = w.at("lambda_s").get<double>();
      if (w.contains("lambda_t")) c.weights.lambda_t = w.at("lambda_t").get<double>();
      if (w.contains("lambda_n")) c.weights.lambda_n = w.at("lambda_n").get<double>();
      if (w.contains("lambda_l")) c.weights.lambda_l = w.at("lambda_l").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("fit config: ") + e.what());
  }
  return c;
}

void adam_step(Eigen::VectorXd& x, AdamState& state, const Eigen::VectorXd& grad,
               const FitConfig& cfg, const GroupMask& mask) {
  FISHFIT_THROW_IF(x.size() != DeformParams::kDim || grad.size() != DeformParams::kDim,
                   ErrorCode::DimensionMismatch, "parameter / gradient size mismatch");
  for (int i = 0; i < DeformParams::kDim; ++i) {
    const ParamGroup g = param_group(i);
    if (!mask[static_cast<int>(g)]) {
      continue;
    }
    const int t = ++state.t[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / (1.0 - std::pow(cfg.beta1, t));
    const double v_hat = state.v[i] / (1.0 - std::pow(cfg.beta2, t));
    x[i] -= cfg.learning_rate(g) * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

FitTarget FitTarget::make(const TemplateMesh& tmpl, const SoftSilhouette& mask) {
  return {mask, distance_transform(mask), LossTopology::from(tmpl)};
}

Evaluation evaluate(const TemplateMesh& tmpl, const FitTarget& target, const CameraModel& cam,
                    const FitConfig& cfg, const DeformParams& params, bool with_grad) {
  const DeformedMesh mesh = deform(tmpl, params);
  Evaluation ev;
  RenderTape tape;
  ev.rendered = with_grad ? render_silhouette(mesh, cam, cfg.render, tape)
                          : render_silhouette(mesh, cam, cfg.render);
  const TotalLoss tl = total_loss(ev.rendered, target.mask, target.sdf, mesh, params, cfg.weights,
                                  target.topology);
  ev.loss = tl.report;
  if (!with_grad) {
    return ev;
  }
  std::vector<Vec3> vg = render_backward(tape, tl.pixel_grad);
  for (std::size_t i = 0; i < vg.size(); ++i) {
    vg[i] += tl.vertex_grad[i];
  }
  ev.grad = deform_vjp(deform_jacobian(tmpl, params), vg) + tl.param_grad;
  return ev;
}

namespace {

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), -std::sin(a), 0.0, std::sin(a), std::cos(a), 0.0, 0.0, 0.0, 1.0;
  return r;
}

/// Area, centroid and principal-axis angle of a planar region.
struct Moments {
  double area = 0.0;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double axis_angle = 0.0;
};

/// Accumulates raw area moments (1, x, y, xx, xy, yy).
struct MomentSums {
  double m[6] = {0, 0, 0, 0, 0, 0};

  void add_point(const Eigen::Vector2d& p, double w) {
    m[0] += w;
    m[1] += w * p.x();
    m[2] += w * p.y();
    m[3] += w * p.x() * p.x();
    m[4] += w * p.x() * p.y();
    m[5] += w * p.y() * p.y();
  }

  /// Exact moments of a triangle.
  void add_triangle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    const double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
    const Eigen::Vector2d g = (a + b + c) / 3.0;
    m[0] += area;
    m[1] += area * g.x();
    m[2] += area * g.y();
    // Second moments: area/12 * (sum of products + 9 g g^T) form.
    auto second = [&](int i, int j) {
      return area / 12.0 * (a[i] * a[j] + b[i] * b[j] + c[i] * c[j] + 9.0 * g[i] * g[j]);
    };
    m[3] += second(0, 0);
    m[4] += second(0, 1);
    m[5] += second(1, 1);
  }

  [[nodiscard]] Moments finish() const {
    Moments out;
    out.area = m[0];
    out.centroid = Eigen::Vector2d(m[1], m[2]) / m[0];
    const double cxx = m[3] / m[0] - out.centroid.x() * out.centroid.x();
    const double cxy = m[4] / m[0] - out.centroid.x() * out.centroid.y();
    const double cyy = m[5] / m[0] - out.centroid.y() * out.centroid.y();
    out.axis_angle = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    return out;
  }
};

/// Mask pixels mapped onto the reference plane, weighted by the area each
/// pixel covers there.
Moments plane_moments(const SoftSilhouette& target, const PlaneHomography& hom) {
  const Eigen::Matrix3d hinv = hom.h.inverse();
  const double det = std::abs(hinv.determinant());
  MomentSums sums;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      if (target(x, y) < 0.5) {
        continue;
      }
      const Eigen::Vector3d w = hinv * Eigen::Vector3d(x, y, 1.0);
      FISHFIT_THROW_IF(std::abs(w.z()) < 1e-12, ErrorCode::PointAtInfinity,
                       "mask pixel maps to infinity on the reference plane");
      sums.add_point(w.head<2>() / w.z(), det / std::abs(w.z() * w.z() * w.z()));
    }
  }
  FISHFIT_THROW_IF(sums.m[0] == 0.0, ErrorCode::TargetEmpty, "target mask has no foreground pixels");
  return sums.finish();
}

/// Top view of a mesh lying on its flat side: the union of the upward
/// facing triangles projected onto z = 0.
Moments top_view_moments(const DeformedMesh& mesh) {
  MomentSums sums;
  for (const auto& f : mesh.face_list()) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    if ((b - a).cross(c - a).z() > 0.0) {
      sums.add_triangle(a.head<2>(), b.head<2>(), c.head<2>());
    }
  }
  return sums.finish();
}

} // namespace

Eigen::Matrix3d plane_aligned_rotation(const CameraModel& cam, double yaw_rad) {
  const Eigen::Vector3d cam_center_world = -cam.rot.transpose() * cam.trans;
  if (cam_center_world.z() >= 0.0) {
    return cam.rot * rot_z(yaw_rad);
  }
  // Camera below the plane: flip the template so +z still faces it.
  const Eigen::Matrix3d flip = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  return cam.rot * flip * rot_z(-yaw_rad);
}

DeformParams initial_guess(const TemplateMesh& tmpl, const SoftSilhouette& target,
                           const CameraModel& cam, const PlaneHomography& hom,
                           const FitConfig& cfg) {
  const Moments mask = plane_moments(target, hom);
  const Eigen::Vector3d target_centroid =
      (cam.rot * Eigen::Vector3d(mask.centroid.x(), mask.centroid.y(), 0.0) + cam.trans) /
      kModelUnitMm;
  const Vec3 c = tmpl.centroid();
  const FitTarget ft = FitTarget::make(tmpl, target);

  std::vector<double> bends = cfg.init_bends_rad;
  if (bends.empty()) {
    bends.push_back(0.0);
  }
  DeformParams best = DeformParams::identity();
  double best_loss = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (double b0 : bends) {
    for (double b1 : bends) {
      DeformParams p = DeformParams::identity();
      p.joint_rot[0] = Eigen::Vector3d(0.0, 0.0, b0);
      p.joint_rot[1] = Eigen::Vector3d(0.0, 0.0, b1);
      const Moments body = top_view_moments(deform(tmpl, p));
      p.root_log_scale =
          0.5 * std::log(mask.area / (body.area * kModelUnitMm * kModelUnitMm));
      const Vec3 q(body.centroid.x(), body.centroid.y(), 0.0);
      for (int flip = 0; flip < 2; ++flip) {
        const double yaw = mask.axis_angle - body.axis_angle + flip * std::numbers::pi;
        p.root_rot = so3::log(plane_aligned_rotation(cam, yaw));
        p.root_trans = target_centroid - (c + p.root_scale() * so3::exp(p.root_rot) * (q - c));
        double loss = std::numeric_limits<double>::infinity();
        try {
          loss = evaluate(tmpl, ft, cam, cfg, p, false).loss.total;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MeshBehindCamera) {
            throw;
          }
        }
        if (!have_best || loss < best_loss) {
          best = p;
          best_loss = loss;
          have_best = true;
        }
      }
    }
  }
  return best;
}

FitResult fit_frame(const TemplateMesh& tmpl, const SoftSilhouette& target, const CameraModel& cam,
                    const FitConfig& cfg, const DeformParams& init) {
  cfg.validate();
  FISHFIT_THROW_IF(!target.same_shape(SoftSilhouette(cam.width, cam.height)),
                   ErrorCode::DimensionMismatch, "target size does not match the camera");
  bool any = false;
  for (double v : target.data) {
    any = any || v >= 0.5;
  }
  FISHFIT_THROW_IF(!any, ErrorCode::TargetEmpty, "target mask has no foreground pixels");

  const FitTarget ft = FitTarget::make(tmpl, target);
  const SoftSilhouette target_bin = binarize(target);
  Eigen::VectorXd x = init.flatten();
  AdamState state;

  FitResult res;
  double best_total = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;
  double best_iou = 0.0;
  int iter = 0;
  bool last_stage_converged = false;

  for (std::size_t si = 0; si < cfg.stages.size(); ++si) {
    const Stage& stage = cfg.stages[si];
    std::deque<double> window;
    last_stage_converged = false;
    for (int k = 0; k < stage.iterations && iter < cfg.max_iters; ++k) {
      const DeformParams current = DeformParams::unflatten(x);
      const Evaluation ev = evaluate(tmpl, ft, cam, cfg, current);
      // Hard IoU compares like with like: a crisp render against the mask.
      TraceRow row{iter, static_cast<int>(si), ev.loss,
                   hard_iou(render_crisp(deform(tmpl, current), cam), target_bin)};
      res.trace.push_back(row);
      if (!std::isfinite(ev.loss.total) || !ev.grad.allFinite()) {
        throw FitAborted("non-finite loss or gradient at iteration " + std::to_string(iter),
                         res.trace);
      }
      if (ev.loss.total < best_total) {
        best_total = ev.loss.total;
        best_x = x;
        best_iou = row.hard_iou;
        res.final_loss = ev.loss;
      }
      ++iter;
      if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
          iter % cfg.checkpoint_every == 0) {
        save_params(DeformParams::unflatten(best_x), cfg.checkpoint_path);
      }
      window.push_back(ev.loss.total);
      if (static_cast<int>(window.size()) > cfg.convergence_window) {
        const double old = window.front();
        window.pop_front();
        const double rel = (old - ev.loss.total) / std::max(std::abs(old), 1e-12);
        if (rel < cfg.convergence_tol) {
          last_stage_converged = true;
          break;
        }
      }
      adam_step(x, state, ev.grad, cfg, stage.mask);
    }
  }
  if (res.trace.empty()) {
    const Evaluation ev = evaluate(tmpl, ft, cam, cfg, init, false);
    best_iou = hard_iou(render_crisp(deform(tmpl, init), cam), target_bin);
    res.final_loss = ev.loss;
  }
  res.params = DeformParams::unflatten(best_x);
  res.iou = best_iou;
  res.iterations_run = iter;
  res.converged = last_stage_converged;
  return res;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  FISHFIT_THROW_IF(!out, ErrorCode::Io, "cannot write " + path.string());
  out << "iter,stage,iou,boundary,scale_reg,trans_reg,normal,laplacian,total,hard_iou\n";
  out << std::setprecision(17);
  for (const auto& r : trace) {
    out << r.iter << ',' << r.stage << ',' << r.loss.iou << ',' << r.loss.boundary << ','
        << r.loss.scale_reg << ',' << r.loss.trans_reg << ',' << r.loss.normal << ','
        << r.loss.laplacian << ',' << r.loss.total << ',' << r.hard_iou << '\n';
  }
}

} // namespace fishfit
