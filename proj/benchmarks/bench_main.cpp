#include "pfrs/dynamic.hpp"
#include "pfrs/flowmap.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace pfrs;

namespace {

DiscreteField swirl_field(const StaggeredGrid& g) {
  return sample_field(g, [&](const Vec3& x) -> Vec3 { return forcing_value(ForcingPreset::kSwirl, x, g.dim()); });
}

}  // namespace

static void BM_Projection(benchmark::State& state) {
  const auto g = StaggeredGrid::over(DomainBox::unit(3), static_cast<int>(state.range(0)));
  const auto f = swirl_field(g);
  Projector proj(g);
  for (auto _ : state) {
    FaceArrays u = f.u;
    proj.project(u);
    benchmark::DoNotOptimize(u[0].data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}
BENCHMARK(BM_Projection)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_PenalizedStokes(benchmark::State& state) {
  const auto g = StaggeredGrid::over(DomainBox::unit(3), static_cast<int>(state.range(0)));
  RigidMotion b;
  b.center = Vec3(0.5, 0.5, 0.5);
  b.translation = Vec3::UnitX();
  const auto mask = rasterize_obstacles(g, {b}, 0.15, 2.0);
  FaceArrays sigma, sigma_w;
  penalization_terms(mask, g.h() * g.h(), sigma, sigma_w);
  const FaceArrays f = zero_faces(g);
  PenalizedStokesSolver solver(g);
  DiscreteField out = DiscreteField::zeros(g);
  for (auto _ : state) {
    const auto stats = solver.solve(0.0, sigma, sigma_w, f, out);
    state.counters["iterations"] = stats.iterations;
  }
}
BENCHMARK(BM_PenalizedStokes)->Arg(32)->Arg(48)->Unit(benchmark::kMillisecond);

static void BM_FlowStep2D(benchmark::State& state) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), static_cast<int>(state.range(0)));
  ParticleConfiguration none;
  none.regime.dim = 2;
  none.domain = DomainBox::unit(2);
  auto s = DynamicState::at_rest(g, none);
  s.field = project_div_free(swirl_field(g));
  const FaceArrays f = zero_faces(g);
  FlowStepper stepper(g);
  for (auto _ : state) stepper.step_penalized(s, 1e-3, MotionMode::kPrescribed, f);
}
BENCHMARK(BM_FlowStep2D)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_FlowMapRK4(benchmark::State& state) {
  ParticleConfiguration cfg;
  cfg.regime.eps = 0.2;
  cfg.centers = {Vec3(0.5, 0.5, 0.5)};
  cfg.radius = 1e-3;
  const auto lam = lambda_field(cfg, constant_velocities({Vec3(0.05, 0.02, 0.0)}));
  std::vector<Vec3> markers;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 8; ++k) markers.push_back(Vec3(0.35, 0.35, 0.35) + 0.3 / 7 * Vec3(i, j, k));
  FlowOptions opts;
  opts.second_derivatives = state.range(0) != 0;
  for (auto _ : state) {
    auto st = integrate_flow(lam, markers, 0.0, 1.0, 0.02, opts);
    benchmark::DoNotOptimize(st.x.back().data());
  }
}
BENCHMARK(BM_FlowMapRK4)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_LambdaSample(benchmark::State& state) {
  ParticleConfiguration cfg;
  cfg.regime.eps = 0.2;
  cfg.centers = {Vec3(0.5, 0.5, 0.5)};
  const auto lam = lambda_field(cfg, constant_velocities({Vec3::UnitX()}));
  const Vec3 x(0.56, 0.47, 0.52);
  for (auto _ : state) benchmark::DoNotOptimize(lam.sample(0.0, x));
}
BENCHMARK(BM_LambdaSample);
BENCHMARK_MAIN();
