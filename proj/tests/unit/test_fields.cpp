#include "pfrs/fields.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pfrs;

namespace {

ParticleConfiguration single(double eps, const Vec3& c, double r) {
  ParticleConfiguration cfg;
  cfg.regime.eps = eps;
  cfg.centers = {c};
  cfg.radius = r;
  return cfg;
}

// 4th-order central difference divergence.
double fd_divergence(const AnalyticField& f, const Vec3& x, double h) {
  double div = 0.0;
  for (int a = 0; a < 3; ++a) {
    const Vec3 e = Vec3::Unit(a) * h;
    div += (-f.value(0, x + 2 * e)[a] + 8 * f.value(0, x + e)[a] - 8 * f.value(0, x - e)[a] +
            f.value(0, x - 2 * e)[a]) /
           (12 * h);
  }
  return div;
}

}  // namespace

TEST(Fields, CutoffPlateaus) {
  const auto a = cutoff_eval(0.25);
  EXPECT_EQ(a.value, 1.0);
  EXPECT_EQ(a.d1, 0.0);
  EXPECT_EQ(a.d2, 0.0);
  const auto b = cutoff_eval(0.9);
  EXPECT_EQ(b.value, 0.0);
  EXPECT_EQ(b.d1, 0.0);
  EXPECT_EQ(b.d2, 0.0);
  const auto c = cutoff_eval(0.625);
  EXPECT_GT(c.value, 0.0);
  EXPECT_LT(c.value, 1.0);
  EXPECT_LT(c.d1, 0.0);
}

TEST(Fields, CutoffDerivativesMatchDifferences) {
  const double h = 1e-5;
  for (double z : {0.52, 0.58, 0.625, 0.7, 0.74}) {
    const double fd1 = (cutoff_eval(z + h).value - cutoff_eval(z - h).value) / (2 * h);
    const double fd2 = (cutoff_eval(z + h).d1 - cutoff_eval(z - h).d1) / (2 * h);
    EXPECT_NEAR(cutoff_eval(z).d1, fd1, 1e-5 * (1 + std::abs(fd1)));
    EXPECT_NEAR(cutoff_eval(z).d2, fd2, 1e-4 * (1 + std::abs(fd2)));
  }
}

TEST(Fields, TMatrix) {
  Mat3 expected;
  expected << 0, 3, -2, -3, 0, 1, 2, -1, 0;
  EXPECT_TRUE(tmatrix(Vec3(1, 2, 3)).isApprox(expected));
  EXPECT_TRUE(tmatrix(Vec3::Zero()).isZero());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x(u(rng), u(rng), u(rng));
    const Vec3 z(u(rng), u(rng), u(rng));
    EXPECT_TRUE((tmatrix(x) * z - z.cross(x)).isZero(1e-15));
  }
}

TEST(Fields, LambdaPlateauAndSupport) {
  const double eps = 0.2;
  const Vec3 c(0.5, 0.5, 0.5);
  const auto lam = lambda_field(single(eps, c, 1e-3), constant_velocities({Vec3::UnitX()}));
  EXPECT_TRUE(lam.value(0.0, c).isApprox(Vec3::UnitX(), 1e-14));
  EXPECT_TRUE(lam.value(0.0, c + Vec3(0.04, -0.03, 0.01)).isApprox(Vec3::UnitX(), 1e-14));
  EXPECT_TRUE(lam.value(0.0, c + Vec3(0.76 * eps, 0, 0)).isZero());
  EXPECT_TRUE(lam.value(0.0, c + Vec3(0.5 * eps, 0.5 * eps, 0.1)).isZero());
}

TEST(Fields, LambdaIsDivergenceFree) {
  const double eps = 0.2;
  const Vec3 c(0.5, 0.5, 0.5);
  const auto lam = lambda_field(single(eps, c, 1e-3), constant_velocities({Vec3(1.0, -0.5, 0.25)}));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.8 * eps, 0.8 * eps);
  double worst = 0.0;
  double grad = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 x = c + Vec3(u(rng), u(rng), u(rng));
    worst = std::max(worst, std::abs(fd_divergence(lam, x, 1e-4)));
    grad = std::max(grad, lam.sample(0.0, x).jacobian.norm());
  }
  EXPECT_LT(worst, 1e-6 * grad);
}

TEST(Fields, JacobianMatchesCentralDifferences) {
  // The transition layer is steep, so check the O(h^2) decay of the difference error.
  const Vec3 c(0.5, 0.5, 0.5);
  const auto lam = lambda_field(single(0.2, c, 1e-3), constant_velocities({Vec3(0.3, 1.0, -0.2)}));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  auto fd_error = [&](const Vec3& x, double h) {
    const Mat3 J = lam.sample(0.0, x).jacobian;
    Mat3 F;
    for (int b = 0; b < 3; ++b) {
      const Vec3 e = Vec3::Unit(b) * h;
      F.col(b) = (lam.value(0.0, x + e) - lam.value(0.0, x - e)) / (2 * h);
    }
    return (J - F).norm();
  };
  for (int i = 0; i < 50; ++i) {
    const Vec3 x = c + Vec3(u(rng), u(rng), u(rng));
    const double e1 = fd_error(x, 1e-3);
    const double e2 = fd_error(x, 5e-4);
    EXPECT_LT(e2, 0.3 * e1 + 1e-9 * (1.0 + lam.sample(0.0, x).jacobian.norm()));
  }
}

TEST(Fields, RigidExtensionValues) {
  const Vec3 c(0.5, 0.5, 0.5);
  const double r = 0.1;
  const auto cfg = single(0.25, c, r);
  RigidMotion m;
  m.center = c;
  m.translation = Vec3::UnitX();
  EXPECT_TRUE(rigid_extension(cfg, {m}).value(0.0, c).isApprox(Vec3::UnitX(), 1e-14));

  m.angular = Vec3(0.0, 0.0, 2.0);
  const auto w = rigid_extension(cfg, {m});
  const Vec3 x = c + Vec3(0.02, 0.01, -0.005);
  EXPECT_TRUE(w.value(0.0, x).isApprox(m.velocity_at(x), 1e-12));
  EXPECT_TRUE(w.value(0.0, c + Vec3(0.38 * r, 0, 0)).isZero());

  RigidMotion still;
  still.center = c;
  const auto zero = rigid_extension(cfg, {still});
  EXPECT_TRUE(zero.value(0.0, x).isZero());
}

TEST(Fields, RigidExtensionGradientScalesLikeSqrtR) {
  const Vec3 c(0.5, 0.5, 0.5);
  std::vector<double> ratio;
  for (double r : {0.1, 0.05, 0.025}) {
    RigidMotion m;
    m.center = c;
    m.translation = Vec3::UnitX();
    const auto w = rigid_extension(single(0.25, c, r), {m});
    ratio.push_back(analytic_norms(w, DomainBox::unit(3), 4).h1_semi / std::sqrt(r));
  }
  for (double q : ratio) EXPECT_NEAR(q / ratio.front(), 1.0, 0.15);
}

TEST(Fields, ProbeValues) {
  const double r = 0.1;
  const auto psi = probe_field(ProbeKind::kTranslation, r, Vec3::UnitY());
  EXPECT_TRUE(psi.value(0.0, Vec3::Zero()).isApprox(Vec3::UnitY(), 1e-14));
  EXPECT_TRUE(psi.value(0.0, Vec3(0.38 * r, 0.0, 0.0)).isZero());
  const auto phi = probe_field(ProbeKind::kRotation, r, Vec3::UnitZ());
  EXPECT_TRUE(phi.value(0.0, Vec3::Zero()).isZero());
  const Vec3 x(0.01, 0.02, 0.0);
  EXPECT_TRUE(phi.value(0.0, x).isApprox(Vec3::UnitZ().cross(x), 1e-12));
}

TEST(Fields, ProbeNormScalings) {
  std::vector<double> grad;
  std::vector<double> l2;
  for (double r : {0.1, 0.05, 0.025}) {
    const auto psi = probe_field(ProbeKind::kTranslation, r, Vec3(0.0, 2.0, 0.0));
    DomainBox box;
    box.lo = Vec3::Constant(-r);
    box.hi = Vec3::Constant(r);
    const auto n = analytic_norms(psi, box, 4);
    grad.push_back(n.h1_semi / (std::sqrt(r) * 2.0));
    l2.push_back(n.l2 / (std::pow(r, 1.5) * 2.0));
  }
  for (std::size_t i = 1; i < grad.size(); ++i) {
    EXPECT_NEAR(grad[i] / grad[0], 1.0, 0.1);
    EXPECT_NEAR(l2[i] / l2[0], 1.0, 0.1);
  }
}

TEST(Fields, ZeroFieldNorms) {
  const auto n = analytic_norms(AnalyticField(), DomainBox::unit(3), 2);
  EXPECT_EQ(n.l2, 0.0);
  EXPECT_EQ(n.h1_semi, 0.0);
}

TEST(Fields, QuadratureOfKnownIntegral) {
  // F = (sin(pi x), 0, 0) on the unit cube: ||F||^2 = 1/2, ||grad F||^2 = pi^2 / 2.
  AnalyticField f(
      [](double, const Vec3& x) {
        FieldSample s;
        s.value = Vec3(std::sin(kPi * x[0]), 0, 0);
        s.jacobian(0, 0) = kPi * std::cos(kPi * x[0]);
        return s;
      },
      {}, 1.0);
  const auto n = analytic_norms(f, DomainBox::unit(3), 2);
  EXPECT_NEAR(n.l2, std::sqrt(0.5), 1e-8);
  EXPECT_NEAR(n.h1_semi, kPi * std::sqrt(0.5), 1e-7);
}
