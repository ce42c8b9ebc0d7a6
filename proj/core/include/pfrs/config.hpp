#pragma once

#include "pfrs/common.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pfrs {

struct DomainBox {
  int dim = 3;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  static DomainBox unit(int dim);

  Vec3 extent() const { return hi - lo; }
  double volume() const;
  /// Distance to the nearest active wall (z ignored in 2D).
  double distance_to_boundary(const Vec3& x) const;
  bool contains(const Vec3& x) const;
  void check() const;
};

/// Radius law. In 3D r = radius_prefactor * eps^alpha. In 2D r solves
/// -eps^2 log(r / radius_prefactor) = c2d, i.e. r = radius_prefactor * exp(-c2d / eps^2).
struct ScalingRegime {
  int dim = 3;
  double eps = 0.1;
  double alpha = 3.0;
  double c2d = 1.0;
  double radius_prefactor = 1.0;
  /// Solid density law rho_S = rho_coefficient * eps^rho_exponent.
  double rho_exponent = -10.0;
  double rho_coefficient = 1.0;

  double radius() const;
  double solid_density() const;
  void check() const;
};

struct ParticleConfiguration {
  ScalingRegime regime;
  DomainBox domain;
  std::vector<Vec3> centers;
  double radius = 0.0;

  std::size_t count() const { return centers.size(); }
  double eps() const { return regime.eps; }
};

enum class PlacementMode { kLattice, kRandom };

struct PlacementRule {
  double spacing_factor = 2.5;
  double margin_factor = 1.5;
  /// Random mode target; 0 means "same count as the lattice would give".
  std::size_t target_count = 0;
  std::size_t attempts_per_particle = 1000;
};

ParticleConfiguration generate_configuration(const DomainBox& domain, const ScalingRegime& regime,
                                             PlacementMode mode, std::uint64_t seed,
                                             const PlacementRule& rule = {});

struct Violation {
  enum class Kind { kPairSeparation, kBoundaryDistance, kRuntimePairSeparation, kRuntimeBoundaryDistance, kRadius };
  Kind kind;
  std::size_t i = 0;
  std::size_t j = 0;
  double distance = 0.0;
  double threshold = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  /// Only the strict initial-time constraints.
  bool initial_ok() const;
  /// Only the weaker runtime (moved-center) constraints.
  bool runtime_ok() const;
  std::size_t count(Violation::Kind kind) const;
};

ValidationReport validate_configuration(const ParticleConfiguration& cfg);

/// Runtime check for moved centers: pairs > eps apart and > eps/2 from the walls.
ValidationReport check_runtime_separation(const std::vector<Vec3>& centers, const DomainBox& domain,
                                          double eps);

struct DensityField {
  int dim = 3;
  std::array<int, 3> n{1, 1, 1};
  double cell = 1.0;
  Vec3 origin = Vec3::Zero();
  std::vector<double> values;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n[0]) * (j + static_cast<std::size_t>(n[1]) * k);
  }
  double cell_volume() const;
  double total_mass() const;
  double max_value() const;
};

/// Histogram of eps^dim * sum delta_{h_n}. Cells are cubes of side cell_size anchored at
/// domain.lo; the last cell along an axis may stick out of the box.
DensityField empirical_density(const ParticleConfiguration& cfg, double cell_size);
/// Same with cells anchored at `origin` (cells start there and run to domain.hi).
DensityField empirical_density(const ParticleConfiguration& cfg, double cell_size, const Vec3& origin);
/// Origin that centres one cell of side cell_size on the lowest lattice centre along each axis.
Vec3 lattice_density_origin(const ParticleConfiguration& cfg, double cell_size);

/// Volume-weighted average of `density` over the boxes [lo + i*h, lo + (i+1)*h].
DensityField resample_density(const DensityField& density, const Vec3& lo, std::array<int, 3> n, double h);

/// Largest |a - b| after resampling both onto a common coarse grid.
double density_distance(const DensityField& a, const DensityField& b);

struct HeavyParticleParams {
  double rho_s = 0.0;
  double mass = 0.0;
  double inertia = 0.0;
  double radius = 0.0;
};

struct HeavyRegimeReport {
  HeavyParticleParams params;
  /// rho_S * eps^{19/2}; diverges in the heavy regime.
  double heavy_indicator = 0.0;
  /// Upper bound for r |omega| up to a constant: (rho_S eps^9)^{-1/2}.
  double angular_bound = 0.0;
  /// r^{1/2} / (eps m); must vanish along the family.
  double h1_indicator = 0.0;
  bool degenerate_mass = false;
};

HeavyRegimeReport heavy_particle_params(const ScalingRegime& regime);

std::string to_json_string(const ParticleConfiguration& cfg, int indent = 2);
ParticleConfiguration configuration_from_json(const std::string& text);

}  // namespace pfrs
