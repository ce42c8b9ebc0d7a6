#include "pfrs/dynamic.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pfrs;

namespace {

ParticleConfiguration no_particles(int dim) {
  ParticleConfiguration cfg;
  cfg.regime.dim = dim;
  cfg.regime.eps = 0.2;
  cfg.domain = DomainBox::unit(dim);
  return cfg;
}

ParticleConfiguration one_particle(int dim, const Vec3& c, double eps, double r) {
  ParticleConfiguration cfg = no_particles(dim);
  cfg.regime.eps = eps;
  cfg.centers = {c};
  cfg.radius = r;
  return cfg;
}

// 2D vortex vanishing on the walls.
DiscreteField vortex(const StaggeredGrid& g, double amp) {
  return project_div_free(sample_field(g, [amp](const Vec3& x) -> Vec3 {
    const double sx = std::sin(kPi * x[0]), sy = std::sin(kPi * x[1]);
    return amp * Vec3(sx * sx * std::sin(2 * kPi * x[1]), -std::sin(2 * kPi * x[0]) * sy * sy, 0.0);
  }));
}

double kinetic(const DiscreteField& f) {
  const double n = l2_norm(f.grid, f.u);
  return 0.5 * n * n;
}

}  // namespace

TEST(Dynamic, RestStaysAtRest) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  auto s = DynamicState::at_rest(g, one_particle(2, Vec3(0.5, 0.5, 0.0), 0.25, 0.1));
  FlowStepper stepper(g);
  for (int k = 0; k < 3; ++k) stepper.step_penalized(s, 0.01, MotionMode::kPrescribed, zero_faces(g), constant_velocities({Vec3::Zero()}));
  EXPECT_EQ(discrete_norms(s.field).linf, 0.0);
  EXPECT_EQ(s.motions[0].center, Vec3(0.5, 0.5, 0.0));
}

TEST(Dynamic, ManufacturedSolutionConvergesAtSecondOrder) {
  const double T = 0.1;
  std::vector<double> err;
  for (int n : {16, 32}) {
    const double h = 1.0 / n;
    err.push_back(mms_run(n, 2 * h * h, T).l2_error);
  }
  EXPECT_LT(err[0], 2e-2);
  EXPECT_GT(err[0] / err[1], 3.0);
}

TEST(Dynamic, PrescribedKinematics) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  const double eps = 0.25;
  const double c = 2.0;
  const Vec3 h0(0.4, 0.5, 0.0);
  auto s = DynamicState::at_rest(g, one_particle(2, h0, eps, 0.08));
  s.field = vortex(g, 0.2);
  FlowStepper stepper(g);
  const double dt = 0.01;
  const Vec3 v = c * eps * eps * Vec3::UnitX();
  for (int k = 1; k <= 5; ++k) {
    stepper.step_penalized(s, dt, MotionMode::kPrescribed, zero_faces(g), constant_velocities({v}));
    EXPECT_NEAR(s.motions[0].center[0], h0[0] + k * c * eps * eps * dt, 1e-14);
    EXPECT_EQ(s.motions[0].center[1], h0[1]);
  }
}

TEST(Dynamic, BrinkmanWithoutFrictionMatchesPlainStep) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  auto a = DynamicState::at_rest(g, no_particles(2));
  a.field = vortex(g, 0.5);
  auto b = a;
  FlowStepper sa(g);
  FlowStepper sb(g);
  const FaceArrays f = zero_faces(g);
  for (int k = 0; k < 3; ++k) {
    sa.step_penalized(a, 0.01, MotionMode::kPrescribed, f);
    sb.step_brinkman(b, 0.01, std::vector<double>(g.cell_count(), 0.0), f);
  }
  for (int d = 0; d < 3; ++d) EXPECT_EQ(a.field.u[d], b.field.u[d]);
}

TEST(Dynamic, FrictionDissipatesFaster) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  auto free = DynamicState::at_rest(g, no_particles(2));
  free.field = vortex(g, 0.5);
  auto damped = free;
  FlowStepper s1(g);
  FlowStepper s2(g);
  const FaceArrays f = zero_faces(g);
  for (int k = 0; k < 10; ++k) {
    s1.step_brinkman(free, 0.01, std::vector<double>(g.cell_count(), 0.0), f);
    s2.step_brinkman(damped, 0.01, std::vector<double>(g.cell_count(), 20.0), f);
  }
  EXPECT_LT(kinetic(damped.field), kinetic(free.field));
}

TEST(Dynamic, ForcedBrinkmanReachesStationarySolution) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 24);
  const std::vector<double> friction(g.cell_count(), 5.0);
  const FaceArrays f = sample_field(g, [](const Vec3& x) -> Vec3 {
                         return 0.1 * forcing_value(ForcingPreset::kSwirl, x, 2);
                       }).u;
  auto s = DynamicState::at_rest(g, no_particles(2));
  FlowStepper stepper(g);
  for (int k = 0; k < 200; ++k) stepper.step_brinkman(s, 0.05, friction, f);
  SolverOptions opts;
  opts.tol = 1e-10;
  const auto [steady, stats] = solve_brinkman(g, f, friction, opts, 1.0);
  FaceArrays d = s.field.u;
  axpy(-1.0, steady.u, d);
  EXPECT_LT(l2_norm(g, d), 1e-4 * l2_norm(g, steady.u));
}

TEST(Dynamic, CflViolationIsReported) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  auto s = DynamicState::at_rest(g, no_particles(2));
  s.field = vortex(g, 50.0);
  FlowStepper stepper(g);
  try {
    stepper.step_penalized(s, 0.1, MotionMode::kPrescribed, zero_faces(g));
    FAIL() << "expected CflViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCflViolation);
  }
}

TEST(Dynamic, HeavyParticleInQuiescentFluidStaysPut) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  const Vec3 c(0.5, 0.5, 0.0);
  auto s = DynamicState::at_rest(g, one_particle(2, c, 0.25, 0.1));
  s.mass = {1.0};
  s.inertia = {0.4 * 0.01};
  FlowStepper stepper(g);
  for (int k = 0; k < 5; ++k) stepper.step_penalized(s, 0.01, MotionMode::kCoupled, zero_faces(g));
  EXPECT_EQ(s.motions[0].center, c);
  EXPECT_EQ(s.motions[0].translation, Vec3::Zero());
}

TEST(Dynamic, EnergyAuditOnDecayingVortex) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  auto s = DynamicState::at_rest(g, no_particles(2));
  s.field = vortex(g, 1.0);
  FlowStepper stepper(g);
  EnergyLedger ledger;
  for (int k = 0; k < 20; ++k) stepper.step_penalized(s, 0.005, MotionMode::kPrescribed, zero_faces(g), {}, &ledger);
  const auto audit = energy_audit(ledger);
  EXPECT_TRUE(audit.ok);
  EXPECT_LT(ledger.entries.back().kinetic, ledger.entries.front().kinetic);
}

TEST(Dynamic, EnergyAuditFlagsUnaccountedWork) {
  // Negative control: a forced spin-up whose forcing work is removed from the ledger.
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 32);
  auto s = DynamicState::at_rest(g, no_particles(2));
  const FaceArrays f = sample_field(g, [](const Vec3& x) -> Vec3 {
                         return forcing_value(ForcingPreset::kSwirl, x, 2);
                       }).u;
  FlowStepper stepper(g);
  EnergyLedger ledger;
  for (int k = 0; k < 10; ++k) stepper.step_penalized(s, 0.01, MotionMode::kPrescribed, f, {}, &ledger);
  EXPECT_TRUE(energy_audit(ledger).ok);
  for (auto& e : ledger.entries) e.work = 0.0;
  EXPECT_FALSE(energy_audit(ledger).ok);
}

TEST(Dynamic, EnergyAuditOfZeroData) {
  const auto g = StaggeredGrid::over(DomainBox::unit(2), 16);
  auto s = DynamicState::at_rest(g, no_particles(2));
  FlowStepper stepper(g);
  EnergyLedger ledger;
  for (int k = 0; k < 3; ++k) stepper.step_penalized(s, 0.01, MotionMode::kPrescribed, zero_faces(g), {}, &ledger);
  for (const auto& e : ledger.entries) {
    EXPECT_EQ(e.kinetic, 0.0);
    EXPECT_EQ(e.dissipation, 0.0);
    EXPECT_EQ(e.work, 0.0);
  }
  EXPECT_TRUE(energy_audit(ledger).ok);
}

TEST(Dynamic, LedgerCsvHeader) {
  EnergyLedger ledger;
  ledger.entries.push_back({});
  const std::string csv = ledger.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "time,kinetic,particle_kinetic,dissipation,penalty_dissipation,work");
}

TEST(Dynamic, DriftOfStationaryRunIsZero) {
  DynamicState s;
  s.motions = {RigidMotion{Vec3(0.5, 0.5, 0.5), Vec3::Zero(), Vec3::Zero()}};
  s.mass = {2.0};
  s.inertia = {0.1};
  s.radius = 0.1;
  s.eps = 0.25;
  std::vector<TrajectoryRow> traj;
  for (int k = 0; k < 4; ++k) traj.push_back({0.1 * k, 0, Vec3(0.5, 0.5, 0.5), Vec3::Zero(), Vec3::Zero()});
  const auto rep = drift_bound_check(traj, s);
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_EQ(rep[0].constant, 0.0);
  EXPECT_NEAR(rep[0].h1_indicator, std::sqrt(0.1) / (0.25 * 2.0), 1e-14);
  EXPECT_EQ(drift_spread({0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(drift_spread({1.0, 1.5, 1.2}), 1.5);
}

TEST(Dynamic, TwoDimensionalFriction) {
  EXPECT_NEAR(friction_coefficient_2d(0.01, 0.1), 4 * kPi / std::log(100.0) / 0.01, 1e-9);
}

TEST(Dynamic, StudyIsDeterministic) {
  DynamicStudyConfig cfg;
  cfg.eps_list = {0.2, 0.2};
  cfg.regime.dim = 2;
  cfg.regime.c2d = 0.0155;
  cfg.regime.radius_prefactor = 0.118;
  cfg.grid_n = 32;
  cfg.T = 0.05;
  cfg.dt = 0.01;
  cfg.min_cells = 1.0;
  cfg.forcing = ForcingPreset::kSwirl;
  const auto rows = dynamic_convergence_study(cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[0].l2_gap, rows[1].l2_gap);
  EXPECT_GT(rows[0].l2_gap, 0.0);
  EXPECT_TRUE(rows[0].energy_ok);
}
