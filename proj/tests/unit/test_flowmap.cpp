#include "pfrs/flowmap.hpp"
#include "pfrs/stokes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pfrs;

namespace {

const Vec3 kCentre(0.5, 0.5, 0.5);

ParticleConfiguration single(double eps) {
  ParticleConfiguration cfg;
  cfg.regime.eps = eps;
  cfg.centers = {kCentre};
  cfg.radius = 1e-3;
  return cfg;
}

AnalyticField single_lambda(double eps, const Vec3& v) { return lambda_field(single(eps), constant_velocities({v})); }

std::vector<Vec3> ball_markers(double radius, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Vec3> out;
  while (static_cast<int>(out.size()) < n) {
    const Vec3 d(u(rng), u(rng), u(rng));
    if (d.norm() < radius) out.push_back(kCentre + d);
  }
  return out;
}

}  // namespace

TEST(Flowmap, ZeroFieldIsIdentity) {
  const std::vector<Vec3> ys{Vec3(0.1, 0.2, 0.3), Vec3(0.9, 0.5, 0.4)};
  const auto st = integrate_flow(AnalyticField(), ys, 0.0, 1.0, 0.1, {true, 1});
  for (std::size_t m = 0; m < ys.size(); ++m) {
    EXPECT_EQ(st.x.back()[m], ys[m]);
    EXPECT_TRUE(st.dx.back()[m].isIdentity());
    for (const auto& h : st.d2x.back()[m]) EXPECT_TRUE(h.isZero());
  }
  const auto inv = invert_flow(st, 1.0, Vec3(0.3, 0.3, 0.3));
  EXPECT_EQ(inv.y, Vec3(0.3, 0.3, 0.3));
  const auto rep = flow_bound_report(st, 0.1);
  EXPECT_EQ(rep.v6b, 0.0);
  EXPECT_EQ(rep.v6d, 0.0);
  EXPECT_EQ(rep.v8, 0.0);
  EXPECT_EQ(rep.v13, 0.0);
  EXPECT_EQ(rep.v14, 0.0);
  EXPECT_EQ(rep.v15, 0.0);
  EXPECT_EQ(rep.det, 0.0);
}

TEST(Flowmap, MarkersOutsideSupportStayPut) {
  const double eps = 0.2;
  const auto lam = single_lambda(eps, Vec3(0.05, 0.02, 0.0));
  const Vec3 y = kCentre + Vec3(0.8 * eps, 0.0, 0.0);
  const auto st = integrate_flow(lam, {y}, 0.0, 1.0, 0.05);
  for (const auto& row : st.x) EXPECT_EQ(row[0], y);
}

TEST(Flowmap, PlateauMarkerTranslatesExactly) {
  const double eps = 0.2;
  const Vec3 v(0.05, -0.02, 0.01);
  const auto lam = single_lambda(eps, v);
  const auto st = integrate_flow(lam, {kCentre}, 0.0, 0.5, 0.05);
  for (std::size_t ti = 0; ti < st.times.size(); ++ti) {
    EXPECT_TRUE((st.x[ti][0] - (kCentre + st.times[ti] * v)).norm() < 1e-13);
  }
}

TEST(Flowmap, StepTooLargeIsRejected) {
  const auto lam = single_lambda(0.1, Vec3(50.0, 0.0, 0.0));
  try {
    integrate_flow(lam, {kCentre}, 0.0, 1.0, 0.5);
    FAIL() << "expected StepTooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStepTooLarge);
  }
}

TEST(Flowmap, InverseRoundTrip) {
  const double eps = 0.2;
  const auto lam = single_lambda(eps, Vec3(0.05, 0.02, -0.02));
  const auto ys = ball_markers(0.75 * eps, 40, 3);
  const auto st = integrate_flow(lam, ys, 0.0, 1.0, 0.02);
  for (std::size_t m = 0; m < ys.size(); ++m) {
    const auto inv = invert_flow(st, 1.0, st.x.back()[m]);
    EXPECT_LT((inv.y - ys[m]).norm(), 1e-10);
    EXPECT_LT((inv.dy * st.dx.back()[m] - Mat3::Identity()).norm(), 1e-8);
  }
}

TEST(Flowmap, BoundsAlongScaledFamily) {
  std::vector<BoundReport> reps;
  for (double eps : {0.2, 0.1}) {
    const auto lam = single_lambda(eps, Vec3::UnitX() * std::pow(eps, 3));
    const auto st = integrate_flow(lam, ball_markers(0.75 * eps, 60, 5), 0.0, 1.0, 0.02, {true, 1});
    reps.push_back(flow_bound_report(st, eps));
    EXPECT_LT(reps.back().det, 1e-8);
  }
  EXPECT_LT(reps[1].v6b / 0.1, reps[0].v6b / 0.2);
  EXPECT_GT(reps[1].v6b, 0.0);
}

TEST(Flowmap, InverseSecondDerivativeMatchesDifferences) {
  const double eps = 0.2;
  const auto lam = single_lambda(eps, Vec3(0.05, 0.03, 0.0));
  const Vec3 y = kCentre + Vec3(0.07, 0.03, -0.04);
  const auto st = integrate_flow(lam, {y}, 0.0, 1.0, 0.02, {true, 1});
  const Vec3 x = st.x.back()[0];
  const Hessian d2y = inverse_second_derivative(st.dx.back()[0], st.d2x.back()[0]);
  const double h = 1e-5;
  for (int c = 0; c < 3; ++c) {
    const Vec3 e = Vec3::Unit(c) * h;
    const Mat3 diff = (invert_flow(st, 1.0, x + e).dy - invert_flow(st, 1.0, x - e).dy) / (2 * h);
    for (int i = 0; i < 3; ++i) {
      for (int d = 0; d < 3; ++d) EXPECT_NEAR(d2y[i](c, d), diff(i, d), 1e-5 * (1.0 + std::abs(diff(i, d))));
    }
  }
}

TEST(Flowmap, TransformPreservesIntegrals) {
  const double eps = 0.2;
  const auto lam = single_lambda(eps, Vec3(0.05, 0.03, 0.02));
  // Markers on a midpoint grid over the support box; X is volume preserving.
  const int n = 36;
  const double side = 1.6 * eps;
  const double cell = side / n;
  std::vector<Vec3> ys;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) ys.push_back(kCentre - Vec3::Constant(side / 2) + cell * Vec3(i + 0.5, j + 0.5, k + 0.5));
  const auto st = integrate_flow(lam, ys, 0.0, 1.0, 0.02);
  auto f = [](const Vec3& x) { return std::exp(-20.0 * (x - Vec3(0.55, 0.5, 0.45)).squaredNorm()); };
  double moved = 0.0;
  double fixed = 0.0;
  for (std::size_t m = 0; m < ys.size(); ++m) {
    moved += f(st.x.back()[m]) * st.dx.back()[m].determinant();
    fixed += f(ys[m]);
  }
  // The box maps onto itself (support inside), so both sums approximate the same integral.
  EXPECT_NEAR(moved / fixed, 1.0, 1e-4);
}

TEST(Flowmap, AnalyticTransformRoundTrip) {
  const double eps = 0.2;
  const auto lam = single_lambda(eps, Vec3(0.05, 0.0, 0.03));
  const auto ys = ball_markers(0.7 * eps, 20, 8);
  const auto st = integrate_flow(lam, ys, 0.0, 1.0, 0.02);
  AnalyticField f(
      [](double, const Vec3& x) {
        FieldSample s;
        s.value = Vec3(std::sin(3 * x[0]), x[1] * x[2], std::cos(x[0] + x[2]));
        s.jacobian << 3 * std::cos(3 * x[0]), 0, 0, 0, x[2], x[1], -std::sin(x[0] + x[2]), 0, -std::sin(x[0] + x[2]);
        return s;
      },
      {}, 1.0);
  const auto fwd = transform_field(f, st, MapDirection::kForward);
  const auto back = transform_field(fwd, st, MapDirection::kInverse);
  for (const auto& y : ys) {
    EXPECT_LT((back.value(1.0, y) - f.value(1.0, y)).norm(), 1e-9);
    EXPECT_LT((fwd.value(1.0, y) - f.value(1.0, st.map_point(1.0, y).x)).norm(), 1e-12);
  }

  const auto id = integrate_flow(AnalyticField(), ys, 0.0, 1.0, 0.1);
  const auto same = transform_field(f, id, MapDirection::kForward);
  for (const auto& y : ys) EXPECT_EQ(same.value(1.0, y), f.value(1.0, y));
}

TEST(Flowmap, DiscreteTransformUnderIdentity) {
  const auto g = StaggeredGrid::over(DomainBox::unit(3), 12);
  const auto f = sample_field(g, [](const Vec3& x) -> Vec3 { return Vec3(x[1] * (1 - x[1]), 0.0, x[0]); });
  const auto id = integrate_flow(AnalyticField(), {}, 0.0, 1.0, 0.5);
  const auto out = transform_field(f, id, id.times.size() - 1, MapDirection::kForward);
  for (int d = 0; d < 3; ++d) {
    for (std::size_t i = 0; i < f.u[d].size(); ++i) EXPECT_NEAR(out.u[d][i], f.u[d][i], 1e-14);
  }
}

TEST(Flowmap, MollifierMassAndMoments) {
  EXPECT_NEAR(mollifier_mass(0.1, 0.001), 1.0, 1e-8);
  EXPECT_EQ(mollifier(0.2, 0.1), 0.0);
  EXPECT_GT(mollifier(0.0, 0.1), 0.0);

  std::vector<double> times;
  std::vector<std::vector<double>> constant, linear;
  for (int k = 0; k <= 200; ++k) {
    const double t = k * 0.005;
    times.push_back(t);
    constant.push_back({2.5, -1.0});
    linear.push_back({t});
  }
  const double delta = 0.05;
  const auto c = mollify_time(times, constant, delta);
  ASSERT_FALSE(c.times.empty());
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    EXPECT_GT(c.times[i], delta - 1e-12);
    EXPECT_LT(c.times[i], 1.0 - delta + 1e-12);
    EXPECT_NEAR(c.values[i][0], 2.5, 1e-12);
    EXPECT_NEAR(c.values[i][1], -1.0, 1e-12);
  }
  const auto l = mollify_time(times, linear, delta);
  for (std::size_t i = 0; i < l.times.size(); ++i) EXPECT_NEAR(l.values[i][0], l.times[i], delta * delta);
}

TEST(Flowmap, MollifierRejectsWideKernel) {
  std::vector<double> times{0.0, 0.1, 0.2, 0.3};
  std::vector<std::vector<double>> s(4, std::vector<double>{1.0});
  try {
    mollify_time(times, s, 0.2);
    FAIL() << "expected DeltaTooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDeltaTooLarge);
  }
}

TEST(Flowmap, RemainderUnderIdentityIsZeroAndLinearInPsi) {
  const auto g = StaggeredGrid::over(DomainBox::unit(3), 32);
  const auto u = sample_field(g, [](const Vec3& x) -> Vec3 { return test_field(0, x); });
  const auto psi = sample_field(g, [](const Vec3& x) -> Vec3 { return test_field(1, x); });
  auto psi2 = psi;
  for (auto& c : psi2.u) {
    for (double& v : c) v *= 2.0;
  }

  const auto still = single_lambda(0.2, Vec3::Zero());
  std::vector<std::size_t> cells;
  auto markers = support_cell_markers(g, still, &cells);
  auto st = integrate_flow(still, markers, 0.0, 0.5, 0.05, {true, 1});
  const auto zero = remainder_eval(u, u, psi, st, st.times.size() - 1, cells);
  for (double t : zero.terms) EXPECT_EQ(t, 0.0);

  const auto moving = single_lambda(0.2, Vec3(0.05, 0.02, 0.0));
  markers = support_cell_markers(g, moving, &cells);
  st = integrate_flow(moving, markers, 0.0, 0.5, 0.05, {true, 1});
  const auto a = remainder_eval(u, u, psi, st, st.times.size() - 1, cells);
  const auto b = remainder_eval(u, u, psi2, st, st.times.size() - 1, cells);
  EXPECT_NE(a.total(), 0.0);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(b.terms[k], 2.0 * a.terms[k], 1e-12 * (1.0 + std::abs(a.terms[k])));
}
