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

// Tiled OpenMP renderer against the serial brute-force reference, plus the
// other per-iteration kernels of a fit. Argument: image width (height is 3/4).

#include "fishfit/losses.hpp"
#include "fishfit/optimizer.hpp"
#include "fishfit/renderer.hpp"
#include "fishfit/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace fishfit;

struct Fixture {
  TemplateMesh tmpl;
  CameraModel cam;
  DeformParams params;
  DeformedMesh mesh;
  SoftSilhouette target;
  RenderConfig render;

  explicit Fixture(int width) {
    tmpl = make_fish_template(16);
    const int height = width * 3 / 4;
    cam = overhead_camera(width, height, 2.5 * width, 3000.0, 0.14);
    SceneSpec spec;
    spec.camera = cam;
    spec.true_params = bent_params(cam, 0.3, 0.4, -0.5);
    const Scene s = generate_scene(tmpl, spec);
    params = s.params;
    mesh = s.mesh;
    target = s.mask;
    render.sigma = 1e-5;
  }
};

SoftSilhouette unit_grad(const SoftSilhouette& like) {
  return SoftSilhouette(like.width, like.height, 1.0);
}

void BM_ForwardTiled(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_silhouette(f.mesh, f.cam, f.render));
  }
}

void BM_ForwardReference(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::render_silhouette(f.mesh, f.cam, f.render));
  }
}

void BM_BackwardTiled(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const SoftSilhouette g = unit_grad(f.target);
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_backward(f.mesh, f.cam, f.render, g));
  }
}

void BM_BackwardReference(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const SoftSilhouette g = unit_grad(f.target);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::render_backward(f.mesh, f.cam, f.render, g));
  }
}

void BM_DistanceTransform(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(distance_transform(f.target));
  }
}

void BM_Evaluate(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const FitTarget target = FitTarget::make(f.tmpl, f.target);
  FitConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(f.tmpl, target, f.cam, cfg, f.params));
  }
}

BENCHMARK(BM_ForwardTiled)->Arg(160)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardReference)->Arg(160)->Arg(320)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardTiled)->Arg(160)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardReference)->Arg(160)->Arg(320)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceTransform)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Arg(320)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
