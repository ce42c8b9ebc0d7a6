#pragma once

#include "pfrs/config.hpp"
#include "pfrs/grid.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pfrs {

enum class Preconditioner { kSpectral, kJacobi };

struct SolverOptions {
  double tol = 1e-7;
  int max_iter = 5000;
  Preconditioner precond = Preconditioner::kSpectral;
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;
  double seconds = 0.0;
};

/// Solves  c u - Delta u + sigma (u - w) + grad p = f,  div u = 0,  u = 0 on walls,
/// by preconditioned CG restricted to discretely divergence-free face fields.
/// sigma and target w live on faces. Holds transform plans; one instance per thread.
class PenalizedStokesSolver {
 public:
  explicit PenalizedStokesSolver(const StaggeredGrid& g, SolverOptions opts = {});
  ~PenalizedStokesSolver();

  /// `guess` (optional) seeds the iteration and is projected first.
  SolveStats solve(double c, const FaceArrays& sigma, const FaceArrays& sigma_w, const FaceArrays& f,
                   DiscreteField& out, const FaceArrays* guess = nullptr);

  const StaggeredGrid& grid() const { return grid_; }
  Projector& projector() { return *projector_; }

 private:
  StaggeredGrid grid_;
  SolverOptions opts_;
  std::unique_ptr<Projector> projector_;
  std::unique_ptr<SpectralHelmholtz> helmholtz_;
};

/// Face-wise penalization coefficient 1/eta on masked faces and the product sigma * w.
void penalization_terms(const MaskField& mask, double eta, FaceArrays& sigma, FaceArrays& sigma_w);

struct StokesProblem {
  StaggeredGrid grid;
  /// Body force per unit volume on faces.
  FaceArrays forcing;
  std::optional<MaskField> mask;
  /// Brinkman case: friction density per cell (already including any coefficient).
  std::optional<std::vector<double>> friction;
  /// Penalization parameter; 0 selects h^2.
  double eta = 0.0;

  void check() const;
  double effective_eta() const { return eta > 0.0 ? eta : grid.h() * grid.h(); }
};

std::pair<DiscreteField, SolveStats> solve_stokes_perforated(const StokesProblem& problem,
                                                             const SolverOptions& opts = {});

/// -Delta v + coefficient * R v + grad p = f. With R == 0 this is the plain Stokes solve.
std::pair<DiscreteField, SolveStats> solve_brinkman(const StaggeredGrid& g, const FaceArrays& f,
                                                    const std::vector<double>& density_cells,
                                                    const SolverOptions& opts = {}, double coefficient = 6.0 * kPi);
std::pair<DiscreteField, SolveStats> solve_brinkman(const StaggeredGrid& g, const FaceArrays& f,
                                                    const DensityField& density, const SolverOptions& opts = {},
                                                    double coefficient = 6.0 * kPi);

struct EnergyBalance {
  double dissipation = 0.0;  // int |grad u|^2
  double friction = 0.0;     // int sigma (u - w) . u
  double work = 0.0;         // int f . u
  double relative_error = 0.0;
};

/// Checks int |grad u|^2 + int sigma (u - w) . u = int f . u for a converged solve.
EnergyBalance energy_balance(const DiscreteField& u, const FaceArrays& sigma, const FaceArrays& sigma_w,
                             const FaceArrays& f);

/// Sphere-in-sphere wall correction for Stokes drag at radius ratio lambda.
double wall_correction_factor(double lambda);

struct DragResult {
  Vec3 force = Vec3::Zero();
  double stokes_drag = 0.0;
  double ratio = 0.0;
  /// Sphere-in-sphere estimate with outer radius = half the smallest box side.
  double wall_factor = 1.0;
  double wall_corrected_ratio = 0.0;
  double radius = 0.0;
  double h = 0.0;
  double eta = 0.0;
  std::size_t flagged_cells = 0;
  SolveStats stats;
};

/// Sphere of radius r at the box centre translating with U; force from the penalization defect.
DragResult sphere_drag(double r, const Vec3& U, const StaggeredGrid& g, const SolverOptions& opts = {},
                       double eta = 0.0);

enum class ForcingPreset { kShear, kSwirl, kUniform };
ForcingPreset parse_forcing(const std::string& name);
std::string to_string(ForcingPreset f);
/// In 2D the z factor of the shear preset is dropped.
Vec3 forcing_value(ForcingPreset f, const Vec3& x, int dim = 3);

/// Smooth divergence-free test fields vanishing on the unit-box walls; k in {0, 1, 2}.
/// All three share the mirror symmetries of the swirl forcing.
Vec3 test_field(int k, const Vec3& x);

struct StokesStudyConfig {
  std::vector<double> eps_list;
  ScalingRegime regime;
  PlacementMode mode = PlacementMode::kLattice;
  std::uint64_t seed = 7;
  int grid_n = 96;
  double eta_factor = 1.0;
  /// Density histogram cell side in units of eps.
  double density_cell_factor = 1.0;
  /// Centre the density cells on the lattice instead of anchoring them at the box corner.
  bool align_density = false;
  ForcingPreset forcing = ForcingPreset::kShear;
  double forcing_amplitude = 1.0;
  double min_cells = 3.0;
  SolverOptions solver;
  int threads = 1;
};

struct StokesStudyRow {
  double eps = 0.0;
  std::size_t n_particles = 0;
  double radius = 0.0;
  int grid = 0;
  double eta = 0.0;
  double l2_gap = 0.0;
  double h1_gap = 0.0;
  std::array<double, 3> pairing_gaps{0.0, 0.0, 0.0};
  double brinkman_l2 = 0.0;
  int iters_perforated = 0;
  int iters_brinkman = 0;
  double seconds = 0.0;
  std::string status = "ok";
};

/// One row per eps, sorted by eps descending. Failing cases keep status != "ok" and the study continues.
std::vector<StokesStudyRow> stokes_convergence_study(const StokesStudyConfig& cfg);

}  // namespace pfrs
