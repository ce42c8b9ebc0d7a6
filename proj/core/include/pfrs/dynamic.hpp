#pragma once

#include "pfrs/config.hpp"
#include "pfrs/fields.hpp"
#include "pfrs/grid.hpp"
#include "pfrs/stokes.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pfrs {

struct DynamicState {
  double time = 0.0;
  DiscreteField field;
  /// motions[n].center is h_n(t); translation is h'_n, angular is omega_n.
  std::vector<RigidMotion> motions;
  std::vector<double> mass;
  std::vector<double> inertia;
  double radius = 0.0;
  double eps = 0.0;
  DomainBox domain;

  static DynamicState at_rest(const StaggeredGrid& g, const ParticleConfiguration& cfg);
  std::size_t count() const { return motions.size(); }
};

struct EnergyEntry {
  double time = 0.0;
  /// 1/2 int |u|^2 over the whole box (unit fluid density).
  double kinetic = 0.0;
  /// sum 1/2 m |h'|^2 + 1/2 J |omega|^2
  double particle_kinetic = 0.0;
  /// Cumulative int int |grad u|^2.
  double dissipation = 0.0;
  /// Cumulative int int sigma |u - w|^2 (penalization losses).
  double penalty_dissipation = 0.0;
  /// Cumulative external work: forcing, plus prescribed bodies pushing the fluid.
  double work = 0.0;

  double total() const { return kinetic + particle_kinetic; }
};

struct EnergyLedger {
  std::vector<EnergyEntry> entries;
  std::string to_csv() const;
};

struct TrajectoryRow {
  double time = 0.0;
  std::size_t particle = 0;
  Vec3 center = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 angular = Vec3::Zero();
};

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows);

enum class MotionMode { kPrescribed, kCoupled };

struct StepOptions {
  /// Penalization parameter; 0 selects h^2.
  double eta = 0.0;
  double min_cells = 2.0;
  /// dt * max|u| / h must not exceed this.
  double cfl = 1.0;
  bool check_collisions = true;
  SolverOptions solver;
};

/// Force and torque of the fluid on each body.
struct BodyLoads {
  std::vector<Vec3> force;
  std::vector<Vec3> torque;
};

/// Semi-implicit stepper: explicit upwind-biased advection, implicit diffusion, friction and
/// penalization, pressure from the divergence-free solve. One instance per run.
class FlowStepper {
 public:
  FlowStepper(const StaggeredGrid& g, StepOptions opts = {});
  ~FlowStepper();

  /// Prescribed: bodies move with schedule(n, t). Coupled: velocities follow the hydrodynamic loads
  /// of the new fluid field, one step behind. f is a face-sampled body force.
  void step_penalized(DynamicState& s, double dt, MotionMode mode, const FaceArrays& f,
                      const VelocitySchedule& schedule = {}, EnergyLedger* ledger = nullptr);
  /// Friction coefficient per face is friction_cells averaged to faces.
  void step_brinkman(DynamicState& s, double dt, const std::vector<double>& friction_cells, const FaceArrays& f,
                     EnergyLedger* ledger = nullptr);

  const StaggeredGrid& grid() const { return grid_; }
  const SolveStats& last_stats() const { return stats_; }
  const BodyLoads& last_loads() const { return loads_; }

 private:
  void check_cfl(const DiscreteField& u, double dt) const;
  FaceArrays explicit_rhs(const DiscreteField& u, double dt, const FaceArrays& f) const;
  void record(const DynamicState& s, const FaceArrays& sigma, const FaceArrays& sigma_w, const FaceArrays& f,
              double dt, bool prescribed_work, EnergyLedger* ledger) const;

  StaggeredGrid grid_;
  StepOptions opts_;
  std::unique_ptr<PenalizedStokesSolver> solver_;
  SolveStats stats_;
  BodyLoads loads_;
};

/// (u . grad) u on faces with a third-order upwind-biased stencil; wall-normal faces get 0.
FaceArrays advection(const StaggeredGrid& g, const FaceArrays& u);

/// Loads on each ball from the penalization defect sigma (u - w), ownership by nearest centre.
BodyLoads penalization_loads(const StaggeredGrid& g, const DynamicState& s, const FaceArrays& sigma,
                             const FaceArrays& sigma_w, const FaceArrays& u);

/// m dh' = dt F, J domega = dt T with F, T the loads of the fluid on each body. Moves centres by dt h'.
void couple_heavy_particles(DynamicState& s, const BodyLoads& loads, double dt);

EnergyEntry energy_entry(const DynamicState& s, double time);

struct EnergyAudit {
  bool ok = true;
  double worst_excess = 0.0;
  double worst_time = 0.0;
  std::size_t violations = 0;
};

/// Checks E(t) + D(t) <= E(0) + W(t) + tol * S at every entry, S = max(E(0), sup E, sup |W|).
EnergyAudit energy_audit(const EnergyLedger& ledger, double tol = 1e-3);

/// Manufactured 2D flow e^{-t} (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y)) and its forcing.
Vec3 mms_velocity(double t, const Vec3& x);
Vec3 mms_forcing(double t, const Vec3& x);

struct MmsResult {
  int n = 0;
  double dt = 0.0;
  double l2_error = 0.0;
};

/// Runs the manufactured problem on an n^2 grid to time T and reports the L2 error at T.
MmsResult mms_run(int n, double dt, double T, const StepOptions& opts = {});

struct DynamicStudyConfig {
  std::vector<double> eps_list;
  ScalingRegime regime;
  PlacementMode mode = PlacementMode::kLattice;
  std::uint64_t seed = 7;
  int grid_n = 128;
  double T = 1.0;
  double dt = 0.01;
  double eta_factor = 1.0;
  double density_cell_factor = 1.0;
  ForcingPreset forcing = ForcingPreset::kShear;
  double forcing_amplitude = 1.0;
  /// Prescribed translation h'_n = speed * eps^2 * e_1.
  double speed = 1.0;
  double min_cells = 2.0;
  SolverOptions solver;
  int threads = 1;
};

struct DynamicStudyRow {
  double eps = 0.0;
  std::size_t n_particles = 0;
  double radius = 0.0;
  int grid = 0;
  int steps = 0;
  double l2_gap = 0.0;       // space-time L2 of u_eps - u_B
  double final_gap = 0.0;    // L2 at T
  double brinkman_l2 = 0.0;  // space-time L2 of u_B
  double friction = 0.0;     // Brinkman coefficient per unit density
  bool energy_ok = true;
  double seconds = 0.0;
  std::string status = "ok";
};

/// Friction per unit of empirical density in 2D: 4 pi / (-log r) / eps^2.
double friction_coefficient_2d(double radius, double eps);

/// One row per eps, sorted by eps descending.
std::vector<DynamicStudyRow> dynamic_convergence_study(const DynamicStudyConfig& cfg);

struct DriftReport {
  std::size_t particle = 0;
  double mass = 0.0;
  double radius = 0.0;
  double velocity_drift = 0.0;  // sup |h' - h'(0)|
  double angular_drift = 0.0;   // r sup |omega - omega(0)|
  double constant = 0.0;        // (velocity_drift + angular_drift) m / r^{1/2}
  double h1_indicator = 0.0;    // r^{1/2} / (eps m)
};

std::vector<DriftReport> drift_bound_check(const std::vector<TrajectoryRow>& trajectory, const DynamicState& s);

/// Largest / smallest constant; 1 when all agree, 0 when every drift vanishes.
double drift_spread(const std::vector<double>& constants);

struct HeavyRunConfig {
  int grid_n = 32;
  double T = 0.2;
  double dt = 0.005;
  double mass = 1.0;
  double radius = 0.12;
  double eps = 0.25;
  Vec3 center{0.5, 0.3, 0.5};
  /// Initial fluid velocity amplitude (test_field(0) shape).
  double amplitude = 1.0;
  Vec3 initial_velocity = Vec3::Zero();
  double min_cells = 2.0;
};

struct HeavyRunResult {
  std::vector<TrajectoryRow> trajectory;
  EnergyLedger ledger;
  std::vector<DriftReport> drift;
  DynamicState final_state;
};

/// Single heavy ball at cfg.center in a decaying 3D flow, coupled mode, f = 0.
HeavyRunResult heavy_particle_run(const HeavyRunConfig& cfg);

}  // namespace pfrs
