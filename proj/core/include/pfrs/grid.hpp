#pragma once

#include "pfrs/common.hpp"
#include "pfrs/config.hpp"
#include "pfrs/fields.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace pfrs {

/// Uniform MAC grid. Index x fastest. In 2D n[2] == 1 and the z component is empty.
class StaggeredGrid {
 public:
  StaggeredGrid() = default;
  StaggeredGrid(int dim, std::array<int, 3> n, double h, Vec3 lo = Vec3::Zero());

  /// Cells of side extent_x / n_x covering `box`; other extents must be multiples of h.
  static StaggeredGrid over(const DomainBox& box, int nx);

  int dim() const { return dim_; }
  const std::array<int, 3>& n() const { return n_; }
  int n(int a) const { return n_[a]; }
  double h() const { return h_; }
  const Vec3& lo() const { return lo_; }
  DomainBox box() const;

  std::size_t cell_count() const { return static_cast<std::size_t>(n_[0]) * n_[1] * n_[2]; }
  std::array<int, 3> face_dims(int d) const;
  std::size_t face_count(int d) const;
  double cell_volume() const { return dim_ == 2 ? h_ * h_ : h_ * h_ * h_; }

  std::size_t cell_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n_[0]) * (j + static_cast<std::size_t>(n_[1]) * k);
  }
  std::size_t face_index(int d, int i, int j, int k) const {
    const auto f = face_dims(d);
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(f[0]) * (j + static_cast<std::size_t>(f[1]) * k);
  }
  Vec3 cell_center(int i, int j, int k) const;
  Vec3 face_center(int d, int i, int j, int k) const;

  bool same_shape(const StaggeredGrid& o) const { return dim_ == o.dim_ && n_ == o.n_ && h_ == o.h_; }

 private:
  int dim_ = 3;
  std::array<int, 3> n_{1, 1, 1};
  double h_ = 1.0;
  Vec3 lo_ = Vec3::Zero();
};

FaceArrays zero_faces(const StaggeredGrid& g);
double dot(const FaceArrays& a, const FaceArrays& b);
void axpy(double alpha, const FaceArrays& x, FaceArrays& y);
void scale(double alpha, FaceArrays& x);

/// Visit every face (d, i, j, k, flat index).
void for_each_face(const StaggeredGrid& g, const std::function<void(int, int, int, int, std::size_t)>& fn);
bool is_wall_face(const StaggeredGrid& g, int d, int i, int j, int k);

struct DiscreteField {
  StaggeredGrid grid;
  FaceArrays u;
  std::vector<double> p;

  static DiscreteField zeros(const StaggeredGrid& g);
};

/// Face values from a point function. With enforce_walls, wall-normal faces are set to 0.
DiscreteField sample_field(const StaggeredGrid& g, const std::function<Vec3(const Vec3&)>& fn,
                           bool enforce_walls = true);
DiscreteField sample_field(const StaggeredGrid& g, const AnalyticField& f, double t, bool enforce_walls = true);

std::vector<double> divergence(const StaggeredGrid& g, const FaceArrays& u);
/// Interior-face gradient of a cell field; wall faces get 0.
FaceArrays gradient(const StaggeredGrid& g, const std::vector<double>& p);
/// Vector Laplacian with no-slip mirror ghosts; wall-normal faces map to 0.
FaceArrays laplacian(const StaggeredGrid& g, const FaceArrays& u);

enum class OperatorKind { kDivergence, kGradient, kLaplacian };
/// Divergence writes into p of the result; gradient reads p and writes u; laplacian maps u to u.
DiscreteField apply_operator(OperatorKind kind, const DiscreteField& f);

/// Per-component cell averages of the face values.
std::array<std::vector<double>, 3> cell_average(const StaggeredGrid& g, const FaceArrays& u);
/// Face averages of a cell field (wall faces take the single adjacent cell).
FaceArrays cell_to_faces(const StaggeredGrid& g, const std::vector<double>& cells);

struct DiscreteNorms {
  double l2 = 0.0;
  double h1 = 0.0;
  double linf = 0.0;
};

DiscreteNorms discrete_norms(const DiscreteField& f);
double l2_norm(const StaggeredGrid& g, const FaceArrays& u);
double h1_seminorm(const StaggeredGrid& g, const FaceArrays& u);
/// Midpoint-rule pairing of collocated velocities.
double l2_inner(const StaggeredGrid& g, const FaceArrays& a, const FaceArrays& b);

/// Neumann Poisson solve on cells by DCT: L p = rhs, mean(p) = 0. Not reentrant.
class SpectralPoisson {
 public:
  explicit SpectralPoisson(const StaggeredGrid& g);
  ~SpectralPoisson();
  SpectralPoisson(const SpectralPoisson&) = delete;
  SpectralPoisson& operator=(const SpectralPoisson&) = delete;

  /// out = L^{-1} rhs on the mean-free subspace (L is the negative-semidefinite Laplacian).
  void solve(const std::vector<double>& rhs, std::vector<double>& out);

 private:
  struct Impl;
  Impl* impl_;
};

/// (c - Delta_h)^{-1} on each velocity component with no-slip walls, by sine transforms. Not reentrant.
class SpectralHelmholtz {
 public:
  explicit SpectralHelmholtz(const StaggeredGrid& g);
  ~SpectralHelmholtz();
  SpectralHelmholtz(const SpectralHelmholtz&) = delete;
  SpectralHelmholtz& operator=(const SpectralHelmholtz&) = delete;

  void solve(double c, const FaceArrays& rhs, FaceArrays& out);

 private:
  struct Impl;
  Impl* impl_;
};

enum class ProjectionBackend { kSpectral, kConjugateGradient };

struct ProjectionOptions {
  ProjectionBackend backend = ProjectionBackend::kSpectral;
  double tol = 1e-8;
  int max_iter = 5000;
};

struct ProjectionStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Holds transform plans so repeated projections on one grid are cheap.
class Projector {
 public:
  explicit Projector(const StaggeredGrid& g, ProjectionOptions opts = {});
  ~Projector();
  Projector(const Projector&) = delete;
  Projector& operator=(const Projector&) = delete;

  /// u <- u - G phi with D G phi = D u. Returns phi if requested.
  ProjectionStats project(FaceArrays& u, std::vector<double>* phi = nullptr);
  /// Cell-centred Neumann solve L phi = rhs.
  ProjectionStats solve_poisson(const std::vector<double>& rhs, std::vector<double>& phi);

  const StaggeredGrid& grid() const { return grid_; }

 private:
  StaggeredGrid grid_;
  ProjectionOptions opts_;
  SpectralPoisson* spectral_ = nullptr;
};

DiscreteField project_div_free(const DiscreteField& f, const ProjectionOptions& opts = {},
                               ProjectionStats* stats = nullptr);

struct MaskField {
  StaggeredGrid grid;
  std::vector<std::uint8_t> cell;
  std::array<std::vector<double>, 3> cell_target;
  std::array<std::vector<std::uint8_t>, 3> face;
  FaceArrays face_target;

  std::size_t flagged_cells() const;
  static MaskField empty(const StaggeredGrid& g);
};

/// Ball rasterization at cell and face centres. Throws UnresolvableRadius if r < min_cells * h.
MaskField rasterize_obstacles(const StaggeredGrid& g, const std::vector<RigidMotion>& bodies, double radius,
                              double min_cells = 3.0);
/// Convenience: bodies at the configuration centres with the given motions (empty = at rest).
MaskField rasterize_obstacles(const ParticleConfiguration& cfg, const std::vector<RigidMotion>& motions,
                              const StaggeredGrid& g, double min_cells = 3.0);

struct RestrictionResult {
  DiscreteField field;
  /// ||R u||_{H1} / ||u||_{H1}
  double h1_ratio = 0.0;
  int iterations = 0;
  double residual = 0.0;
  std::size_t zeroed_faces = 0;
};

/// Zero every face touching a masked cell or its one-cell halo, then project onto div-free fields
/// that stay zero there.
RestrictionResult restrict_field(const DiscreteField& f, const MaskField& mask, double tol = 1e-10,
                                 int max_iter = 4000);

void write_field(const std::string& path, const DiscreteField& f);
DiscreteField read_field(const std::string& path);

/// Cell values of `density` on the solver grid (volume-weighted).
std::vector<double> density_on_grid(const DensityField& density, const StaggeredGrid& g);

}  // namespace pfrs
