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
#include "fishfit/losses.hpp"
#include "fishfit/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fishfit {

namespace {

void check_shape(const Grid<double>& a, const Grid<double>& b) {
  FISHFIT_THROW_IF(!a.same_shape(b), ErrorCode::DimensionMismatch,
                   "image sizes differ: " + std::to_string(a.width) + "x" +
                       std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                       std::to_string(b.height));
}

} // namespace

PixelLoss soft_iou_loss(const SoftSilhouette& pred, const SoftSilhouette& target) {
  check_shape(pred, target);
  const int h = pred.height;
  const int w = pred.width;
  // Row sums combined in row order keep the result thread-count independent.
  std::vector<double> row_inter(h, 0.0);
  std::vector<double> row_union(h, 0.0);
#pragma omp parallel for schedule(static) if (pred.size() > 65536)
  for (int y = 0; y < h; ++y) {
    double si = 0.0;
    double su = 0.0;
    for (int x = 0; x < w; ++x) {
      const double p = pred(x, y);
      const double t = target(x, y);
      si += p * t;
      su += p + t - p * t;
    }
    row_inter[y] = si;
    row_union[y] = su;
  }
  double inter = 0.0;
  double uni = 0.0;
  for (int y = 0; y < h; ++y) {
    inter += row_inter[y];
    uni += row_union[y];
  }
  FISHFIT_THROW_IF(!(uni > 0.0), ErrorCode::EmptyUnion, "both silhouettes are empty");

  PixelLoss out{1.0 - inter / uni, SoftSilhouette(w, h)};
  const double inv_u2 = 1.0 / (uni * uni);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = target.data[i];
    // d(I/U)/dp = (t U - I (1 - t)) / U^2
    out.grad.data[i] = -(t * uni - inter * (1.0 - t)) * inv_u2;
  }
  return out;
}

PixelLoss boundary_loss(const SoftSilhouette& pred, const Grid<double>& target_sdf) {
  check_shape(pred, target_sdf);
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  std::vector<double> rows(pred.height, 0.0);
  for (int y = 0; y < pred.height; ++y) {
    double s = 0.0;
    for (int x = 0; x < pred.width; ++x) {
      s += pred(x, y) * target_sdf(x, y);
    }
    rows[y] = s;
  }
  PixelLoss out{0.0, SoftSilhouette(pred.width, pred.height)};
  for (double r : rows) {
    out.value += r;
  }
  out.value *= inv_n;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.grad.data[i] = target_sdf.data[i] * inv_n;
  }
  return out;
}

namespace {

constexpr double kFar = 1e20;

/// Felzenszwalb-Huttenlocher lower envelope of parabolas: d[q] = min_p (q-p)^2 + f[p].
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      if (s <= z[k]) {
        // k == 0 with z[0] = -inf cannot happen; kept for clarity.
        --k;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) {
      ++k;
    }
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

/// Squared distance from every pixel to the nearest pixel where `feature`.
Grid<double> squared_edt(const Grid<char>& feature) {
  const int w = feature.width;
  const int h = feature.height;
  Grid<double> tmp(w, h);
  Grid<double> out(w, h);
#pragma omp parallel
  {
    const int n = std::max(w, h);
    std::vector<double> f(n);
    std::vector<double> d(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
#pragma omp for schedule(static)
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) {
        f[y] = feature(x, y) ? 0.0 : kFar;
      }
      edt_1d(f.data(), d.data(), h, v.data(), z.data());
      for (int y = 0; y < h; ++y) {
        tmp(x, y) = d[y];
      }
    }
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        f[x] = tmp(x, y);
      }
      edt_1d(f.data(), d.data(), w, v.data(), z.data());
      for (int x = 0; x < w; ++x) {
        out(x, y) = d[x];
      }
    }
  }
  return out;
}

} // namespace

Grid<double> distance_transform(const SoftSilhouette& mask) {
  Grid<char> fg(mask.width, mask.height);
  Grid<char> bg(mask.width, mask.height);
  std::size_t nfg = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool inside = mask.data[i] >= 0.5;
    fg.data[i] = inside ? 1 : 0;
    bg.data[i] = inside ? 0 : 1;
    nfg += inside ? 1 : 0;
  }
  FISHFIT_THROW_IF(nfg == 0 || nfg == mask.size(), ErrorCode::DegenerateMask,
                   "mask needs both foreground and background pixels");
  const Grid<double> to_fg = squared_edt(fg);
  const Grid<double> to_bg = squared_edt(bg);
  Grid<double> sdf(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    sdf.data[i] = fg.data[i] ? -(std::sqrt(to_bg.data[i]) - 1.0) : std::sqrt(to_fg.data[i]);
  }
  return sdf;
}

RegLoss scale_trans_reg(const DeformParams& params) {
  RegLoss r;
  r.grad_scale = Eigen::VectorXd::Zero(DeformParams::kDim);
  r.grad_trans = Eigen::VectorXd::Zero(DeformParams::kDim);
  for (int j = 0; j < 2; ++j) {
    const double s = params.joint_scale(j);
    r.scale += (s - 1.0) * (s - 1.0);
    r.grad_scale[DeformParams::kJointLogScale + j] = 2.0 * (s - 1.0) * s;
    r.trans += params.joint_trans[j].squaredNorm();
    r.grad_trans.segment<3>(DeformParams::kJointTrans + 3 * j) = 2.0 * params.joint_trans[j];
  }
  return r;
}

VertexLoss normal_consistency_loss(const DeformedMesh& mesh) {
  return normal_consistency_loss(mesh, adjacent_face_pairs(mesh.face_list()));
}

VertexLoss normal_consistency_loss(const DeformedMesh& mesh,
                                   const std::vector<std::pair<int, int>>& face_pairs) {
  const auto& faces = mesh.face_list();
  const auto& v = mesh.vertices;
  std::vector<Vec3> cross(faces.size());
  std::vector<Vec3> normal(faces.size());
  std::vector<double> len(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& [a, b, c] = faces[f];
    cross[f] = (v[b] - v[a]).cross(v[c] - v[a]);
    len[f] = cross[f].norm();
    FISHFIT_THROW_IF(0.5 * len[f] < 1e-12, ErrorCode::DegenerateFace,
                     "face " + std::to_string(f) + " has zero area");
    normal[f] = cross[f] / len[f];
  }
  VertexLoss out{0.0, std::vector<Vec3>(v.size(), Vec3::Zero())};
  // dL/d(cross product) per face, accumulated over pairs.
  std::vector<Vec3> dcross(faces.size(), Vec3::Zero());
  for (const auto& [fi, fj] : face_pairs) {
    const Vec3& ni = normal[fi];
    const Vec3& nj = normal[fj];
    out.value += 1.0 - ni.dot(nj);
    // d(n)/d(c) = (I - n n^T) / |c|
    dcross[fi] -= (nj - ni * ni.dot(nj)) / len[fi];
    dcross[fj] -= (ni - nj * nj.dot(ni)) / len[fj];
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& [a, b, c] = faces[f];
    const Vec3 e1 = v[b] - v[a];
    const Vec3 e2 = v[c] - v[a];
    const Vec3& g = dcross[f];
    const Vec3 de1 = e2.cross(g);
    const Vec3 de2 = g.cross(e1);
    out.grad[b] += de1;
    out.grad[c] += de2;
    out.grad[a] -= de1 + de2;
  }
  return out;
}

VertexLoss laplacian_loss(const DeformedMesh& mesh, const Adjacency& neighbors) {
  const auto& v = mesh.vertices;
  FISHFIT_THROW_IF(neighbors.size() != v.size(), ErrorCode::DimensionMismatch,
                   "adjacency does not match the vertex count");
  std::vector<Vec3> delta(v.size());
  VertexLoss out{0.0, std::vector<Vec3>(v.size(), Vec3::Zero())};
  for (std::size_t i = 0; i < v.size(); ++i) {
    FISHFIT_THROW_IF(neighbors[i].empty(), ErrorCode::IsolatedVertex,
                     "vertex " + std::to_string(i) + " has no neighbors");
    Vec3 mean = Vec3::Zero();
    for (int j : neighbors[i]) {
      mean += v[j];
    }
    mean /= static_cast<double>(neighbors[i].size());
    delta[i] = v[i] - mean;
    out.value += delta[i].squaredNorm();
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.grad[i] += 2.0 * delta[i];
    const Vec3 share = 2.0 * delta[i] / static_cast<double>(neighbors[i].size());
    for (int j : neighbors[i]) {
      out.grad[j] -= share;
    }
  }
  return out;
}

LossTopology LossTopology::from(const TemplateMesh& mesh) {
  return {vertex_neighbors(mesh), adjacent_face_pairs(mesh.face_list())};
}

TotalLoss total_loss(const SoftSilhouette& pred, const SoftSilhouette& target,
                     const Grid<double>& target_sdf, const DeformedMesh& mesh,
                     const DeformParams& params, const LossWeights& weights,
                     const LossTopology& topology) {
  const PixelLoss iou = soft_iou_loss(pred, target);
  const PixelLoss bnd = boundary_loss(pred, target_sdf);
  const RegLoss reg = scale_trans_reg(params);
  const VertexLoss nrm = normal_consistency_loss(mesh, topology.face_pairs);
  const VertexLoss lap = laplacian_loss(mesh, topology.neighbors);

  TotalLoss out;
  auto& r = out.report;
  r.iou = iou.value;
  r.boundary = bnd.value;
  r.scale_reg = reg.scale;
  r.trans_reg = reg.trans;
  r.normal = nrm.value;
  r.laplacian = lap.value;
  r.total = r.iou + r.boundary + weights.lambda_s * r.scale_reg + weights.lambda_t * r.trans_reg +
            weights.lambda_n * r.normal + weights.lambda_l * r.laplacian;

  out.pixel_grad = SoftSilhouette(pred.width, pred.height);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.pixel_grad.data[i] = iou.grad.data[i] + bnd.grad.data[i];
  }
  out.vertex_grad.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    out.vertex_grad[i] = weights.lambda_n * nrm.grad[i] + weights.lambda_l * lap.grad[i];
  }
  out.param_grad = weights.lambda_s * reg.grad_scale + weights.lambda_t * reg.grad_trans;
  return out;
}

} // namespace fishfit
