#include "pfrs/stokes.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pfrs;

namespace {

FaceArrays forcing_faces(const StaggeredGrid& g, ForcingPreset p) {
  return sample_field(g, [&](const Vec3& x) -> Vec3 { return forcing_value(p, x, g.dim()); }).u;
}

double mismatch_on_mask(const DiscreteField& u, const MaskField& mask) {
  double num = 0.0;
  double den = 0.0;
  for (int d = 0; d < 3; ++d) {
    for (std::size_t i = 0; i < mask.face[d].size(); ++i) {
      if (!mask.face[d][i]) continue;
      const double e = u.u[d][i] - mask.face_target[d][i];
      num += e * e;
      den += mask.face_target[d][i] * mask.face_target[d][i];
    }
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(Stokes, ZeroForcingWithoutObstaclesGivesZero) {
  StokesProblem pb;
  pb.grid = StaggeredGrid::over(DomainBox::unit(3), 12);
  pb.forcing = zero_faces(pb.grid);
  pb.mask = MaskField::empty(pb.grid);
  const auto [u, stats] = solve_stokes_perforated(pb);
  EXPECT_EQ(discrete_norms(u).linf, 0.0);
}

TEST(Stokes, ObstacleVelocityIsImposed) {
  StokesProblem pb;
  pb.grid = StaggeredGrid::over(DomainBox::unit(3), 24);
  pb.forcing = zero_faces(pb.grid);
  RigidMotion b;
  b.center = Vec3(0.5, 0.5, 0.5);
  b.translation = Vec3::UnitX();
  pb.mask = rasterize_obstacles(pb.grid, {b}, 0.15, 2.0);
  std::vector<double> mismatch;
  for (double f : {0.1, 0.05}) {
    pb.eta = f * pb.grid.h() * pb.grid.h();
    const auto [u, stats] = solve_stokes_perforated(pb);
    mismatch.push_back(mismatch_on_mask(u, *pb.mask));
  }
  EXPECT_LT(mismatch[0], 0.2);
  EXPECT_NEAR(mismatch[1] / mismatch[0], 0.5, 0.15);
}

TEST(Stokes, PlainAndZeroDensityBrinkmanAgree) {
  const auto g = StaggeredGrid::over(DomainBox::unit(3), 16);
  const FaceArrays f = forcing_faces(g, ForcingPreset::kSwirl);
  StokesProblem pb;
  pb.grid = g;
  pb.forcing = f;
  pb.mask = MaskField::empty(g);
  const auto [plain, s1] = solve_stokes_perforated(pb);
  const auto [brink, s2] = solve_brinkman(g, f, std::vector<double>(g.cell_count(), 0.0));
  for (int d = 0; d < 3; ++d) EXPECT_EQ(plain.u[d], brink.u[d]);
}

TEST(Stokes, BrinkmanZeroForcingAndFriction) {
  const auto g = StaggeredGrid::over(DomainBox::unit(3), 16);
  const auto [zero, s0] = solve_brinkman(g, zero_faces(g), std::vector<double>(g.cell_count(), 1.0));
  EXPECT_EQ(discrete_norms(zero).linf, 0.0);

  const FaceArrays f = forcing_faces(g, ForcingPreset::kSwirl);
  const auto [free, s1] = solve_brinkman(g, f, std::vector<double>(g.cell_count(), 0.0));
  const auto [damped, s2] = solve_brinkman(g, f, std::vector<double>(g.cell_count(), 1.0));
  EXPECT_LT(discrete_norms(damped).l2, discrete_norms(free).l2);
  EXPECT_LT(s2.residual, 1e-6);
}

TEST(Stokes, EnergyBalanceOfConvergedSolve) {
  StokesProblem pb;
  pb.grid = StaggeredGrid::over(DomainBox::unit(3), 20);
  pb.forcing = forcing_faces(pb.grid, ForcingPreset::kSwirl);
  RigidMotion b;
  b.center = Vec3(0.5, 0.5, 0.5);
  pb.mask = rasterize_obstacles(pb.grid, {b}, 0.15, 2.0);
  SolverOptions opts;
  opts.tol = 1e-10;
  const auto [u, stats] = solve_stokes_perforated(pb, opts);
  FaceArrays sigma, sigma_w;
  penalization_terms(*pb.mask, pb.effective_eta(), sigma, sigma_w);
  EXPECT_LT(energy_balance(u, sigma, sigma_w, pb.forcing).relative_error, 1e-6);
}

TEST(Stokes, DragVanishesAtRestAndIsLinear) {
  const auto g = StaggeredGrid::over(DomainBox::unit(3), 48);
  EXPECT_EQ(sphere_drag(0.15, Vec3::Zero(), g).force.norm(), 0.0);
  const auto a = sphere_drag(0.15, Vec3(1.0, 0.0, 0.0), g);
  const auto b = sphere_drag(0.15, Vec3(2.0, 0.0, 0.0), g);
  EXPECT_NEAR(b.force.norm() / a.force.norm(), 2.0, 0.04);
  EXPECT_LT(a.force[0], 0.0);
  EXPECT_GT(a.wall_factor, 1.0);
}

TEST(Stokes, WallCorrection) {
  EXPECT_DOUBLE_EQ(wall_correction_factor(0.0), 1.0);
  EXPECT_GT(wall_correction_factor(0.2), wall_correction_factor(0.1));
}

TEST(Stokes, TestFieldsAreSolenoidalAndVanishOnWalls) {
  const double h = 1e-5;
  for (int k = 0; k < 3; ++k) {
    for (const Vec3& x : {Vec3(0.2, 0.3, 0.4), Vec3(0.7, 0.1, 0.55), Vec3(0.45, 0.8, 0.9)}) {
      double div = 0.0;
      for (int a = 0; a < 3; ++a) {
        const Vec3 e = Vec3::Unit(a) * h;
        div += (test_field(k, x + e)[a] - test_field(k, x - e)[a]) / (2 * h);
      }
      EXPECT_NEAR(div, 0.0, 1e-8);
    }
    EXPECT_TRUE(test_field(k, Vec3(0.0, 0.3, 0.4)).isZero(1e-14));
    EXPECT_TRUE(test_field(k, Vec3(0.3, 1.0, 0.4)).isZero(1e-14));
    EXPECT_TRUE(test_field(k, Vec3(0.3, 0.4, 0.0)).isZero(1e-14));
  }
}

TEST(Stokes, ForcingPresetNames) {
  for (auto p : {ForcingPreset::kShear, ForcingPreset::kSwirl, ForcingPreset::kUniform}) {
    EXPECT_EQ(parse_forcing(to_string(p)), p);
  }
  EXPECT_THROW(parse_forcing("bogus"), Error);
}

TEST(Stokes, StudyRecordsImpossibleCase) {
  StokesStudyConfig cfg;
  cfg.eps_list = {0.45};
  cfg.grid_n = 16;
  const auto rows = stokes_convergence_study(cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NE(rows[0].status, "ok");
}

TEST(Stokes, StudyIsDeterministic) {
  StokesStudyConfig cfg;
  cfg.eps_list = {0.25, 0.25};
  cfg.regime.alpha = 3.0;
  cfg.regime.radius_prefactor = 16.0;
  cfg.grid_n = 24;
  cfg.min_cells = 1.0;
  cfg.forcing = ForcingPreset::kSwirl;
  const auto rows = stokes_convergence_study(cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[0].l2_gap, rows[1].l2_gap);
  EXPECT_EQ(rows[0].pairing_gaps, rows[1].pairing_gaps);
}
