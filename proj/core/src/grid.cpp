#include "pfrs/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pfrs {

StaggeredGrid::StaggeredGrid(int dim, std::array<int, 3> n, double h, Vec3 lo) : dim_(dim), n_(n), h_(h), lo_(lo) {
  if (dim != 2 && dim != 3) throw Error(ErrorCode::kUnsupportedDimension, "grid dim must be 2 or 3");
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "grid spacing must be positive");
  if (dim == 2) {
    n_[2] = 1;
    lo_[2] = 0.0;
  }
  for (int a = 0; a < dim; ++a) {
    if (n_[a] < 2) throw Error(ErrorCode::kInvalidArgument, "grid needs at least two cells per axis");
  }
}

StaggeredGrid StaggeredGrid::over(const DomainBox& box, int nx) {
  box.check();
  const double h = box.extent()[0] / nx;
  std::array<int, 3> n{nx, 1, 1};
  for (int a = 1; a < box.dim; ++a) {
    const double cells = box.extent()[a] / h;
    n[a] = static_cast<int>(std::lround(cells));
    if (std::abs(cells - n[a]) > 1e-9 * cells) {
      throw Error(ErrorCode::kShapeMismatch, "box extents are not commensurate with the spacing");
    }
  }
  return StaggeredGrid(box.dim, n, h, box.lo);
}

DomainBox StaggeredGrid::box() const {
  DomainBox b;
  b.dim = dim_;
  b.lo = lo_;
  b.hi = lo_;
  for (int a = 0; a < dim_; ++a) b.hi[a] += n_[a] * h_;
  return b;
}

std::array<int, 3> StaggeredGrid::face_dims(int d) const {
  auto f = n_;
  if (d < dim_) f[d] += 1;
  return f;
}

std::size_t StaggeredGrid::face_count(int d) const {
  if (d >= dim_) return 0;
  const auto f = face_dims(d);
  return static_cast<std::size_t>(f[0]) * f[1] * f[2];
}

Vec3 StaggeredGrid::cell_center(int i, int j, int k) const {
  Vec3 c(lo_[0] + (i + 0.5) * h_, lo_[1] + (j + 0.5) * h_, lo_[2] + (k + 0.5) * h_);
  if (dim_ == 2) c[2] = 0.0;
  return c;
}

Vec3 StaggeredGrid::face_center(int d, int i, int j, int k) const {
  Vec3 c = cell_center(i, j, k);
  c[d] -= 0.5 * h_;
  return c;
}

FaceArrays zero_faces(const StaggeredGrid& g) {
  FaceArrays u;
  for (int d = 0; d < 3; ++d) u[d].assign(g.face_count(d), 0.0);
  return u;
}

double dot(const FaceArrays& a, const FaceArrays& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double* x = a[d].data();
    const double* y = b[d].data();
    const std::size_t n = a[d].size();
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  }
  return s;
}

void axpy(double alpha, const FaceArrays& x, FaceArrays& y) {
  for (int d = 0; d < 3; ++d) {
    const std::size_t n = x[d].size();
    for (std::size_t i = 0; i < n; ++i) y[d][i] += alpha * x[d][i];
  }
}

void scale(double alpha, FaceArrays& x) {
  for (auto& c : x) {
    for (double& v : c) v *= alpha;
  }
}

void for_each_face(const StaggeredGrid& g, const std::function<void(int, int, int, int, std::size_t)>& fn) {
  for (int d = 0; d < g.dim(); ++d) {
    const auto f = g.face_dims(d);
    std::size_t q = 0;
    for (int k = 0; k < f[2]; ++k) {
      for (int j = 0; j < f[1]; ++j) {
        for (int i = 0; i < f[0]; ++i) fn(d, i, j, k, q++);
      }
    }
  }
}

bool is_wall_face(const StaggeredGrid& g, int d, int i, int j, int k) {
  const int idx = d == 0 ? i : (d == 1 ? j : k);
  return idx == 0 || idx == g.n(d);
}

DiscreteField DiscreteField::zeros(const StaggeredGrid& g) {
  DiscreteField f;
  f.grid = g;
  f.u = zero_faces(g);
  f.p.assign(g.cell_count(), 0.0);
  return f;
}

DiscreteField sample_field(const StaggeredGrid& g, const std::function<Vec3(const Vec3&)>& fn, bool enforce_walls) {
  DiscreteField f = DiscreteField::zeros(g);
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t q) {
    if (enforce_walls && is_wall_face(g, d, i, j, k)) return;
    f.u[d][q] = fn(g.face_center(d, i, j, k))[d];
  });
  return f;
}

DiscreteField sample_field(const StaggeredGrid& g, const AnalyticField& field, double t, bool enforce_walls) {
  return sample_field(g, [&](const Vec3& x) -> Vec3 { return field.value(t, x); }, enforce_walls);
}

namespace {

void require_faces(const StaggeredGrid& g, const FaceArrays& u) {
  for (int d = 0; d < 3; ++d) {
    if (u[d].size() != g.face_count(d)) throw Error(ErrorCode::kShapeMismatch, "face array size does not match grid");
  }
}

void require_cells(const StaggeredGrid& g, const std::vector<double>& p) {
  if (p.size() != g.cell_count()) throw Error(ErrorCode::kShapeMismatch, "cell array size does not match grid");
}

}  // namespace

std::vector<double> divergence(const StaggeredGrid& g, const FaceArrays& u) {
  require_faces(g, u);
  std::vector<double> out(g.cell_count(), 0.0);
  const double inv_h = 1.0 / g.h();
  for (int d = 0; d < g.dim(); ++d) {
    const auto f = g.face_dims(d);
    const std::size_t stride = d == 0 ? 1 : (d == 1 ? static_cast<std::size_t>(f[0]) : static_cast<std::size_t>(f[0]) * f[1]);
    const double* ud = u[d].data();
    for (int k = 0; k < g.n(2); ++k) {
      for (int j = 0; j < g.n(1); ++j) {
        std::size_t c = g.cell_index(0, j, k);
        std::size_t q = g.face_index(d, 0, j, k);
        for (int i = 0; i < g.n(0); ++i, ++c, ++q) out[c] += (ud[q + stride] - ud[q]) * inv_h;
      }
    }
  }
  return out;
}

FaceArrays gradient(const StaggeredGrid& g, const std::vector<double>& p) {
  require_cells(g, p);
  FaceArrays out = zero_faces(g);
  const double inv_h = 1.0 / g.h();
  for (int d = 0; d < g.dim(); ++d) {
    const std::size_t cstride = d == 0 ? 1 : (d == 1 ? static_cast<std::size_t>(g.n(0)) : static_cast<std::size_t>(g.n(0)) * g.n(1));
    const auto f = g.face_dims(d);
    for (int k = 0; k < f[2]; ++k) {
      for (int j = 0; j < f[1]; ++j) {
        for (int i = 0; i < f[0]; ++i) {
          if (is_wall_face(g, d, i, j, k)) continue;
          const std::size_t c = g.cell_index(i, j, k);
          out[d][g.face_index(d, i, j, k)] = (p[c] - p[c - cstride]) * inv_h;
        }
      }
    }
  }
  return out;
}

FaceArrays laplacian(const StaggeredGrid& g, const FaceArrays& u) {
  require_faces(g, u);
  FaceArrays out = zero_faces(g);
  const double inv_h2 = 1.0 / (g.h() * g.h());
  for (int d = 0; d < g.dim(); ++d) {
    const auto f = g.face_dims(d);
    const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(f[0]), static_cast<std::size_t>(f[0]) * f[1]};
    const double* ud = u[d].data();
    double* od = out[d].data();
    for (int k = 0; k < f[2]; ++k) {
      for (int j = 0; j < f[1]; ++j) {
        for (int i = 0; i < f[0]; ++i) {
          const std::array<int, 3> idx{i, j, k};
          if (idx[d] == 0 || idx[d] == g.n(d)) continue;
          const std::size_t q = g.face_index(d, i, j, k);
          const double c = ud[q];
          double acc = 0.0;
          for (int a = 0; a < g.dim(); ++a) {
            const double lo = idx[a] > 0 ? ud[q - stride[a]] : -c;
            const double hi = idx[a] < f[a] - 1 ? ud[q + stride[a]] : -c;
            acc += lo + hi - 2.0 * c;
          }
          od[q] = acc * inv_h2;
        }
      }
    }
  }
  return out;
}

DiscreteField apply_operator(OperatorKind kind, const DiscreteField& f) {
  DiscreteField out = DiscreteField::zeros(f.grid);
  switch (kind) {
    case OperatorKind::kDivergence:
      out.p = divergence(f.grid, f.u);
      break;
    case OperatorKind::kGradient:
      out.u = gradient(f.grid, f.p);
      break;
    case OperatorKind::kLaplacian:
      out.u = laplacian(f.grid, f.u);
      break;
  }
  return out;
}

std::array<std::vector<double>, 3> cell_average(const StaggeredGrid& g, const FaceArrays& u) {
  require_faces(g, u);
  std::array<std::vector<double>, 3> out;
  for (int d = 0; d < 3; ++d) out[d].assign(g.cell_count(), 0.0);
  for (int d = 0; d < g.dim(); ++d) {
    const auto f = g.face_dims(d);
    const std::size_t stride = d == 0 ? 1 : (d == 1 ? static_cast<std::size_t>(f[0]) : static_cast<std::size_t>(f[0]) * f[1]);
    for (int k = 0; k < g.n(2); ++k) {
      for (int j = 0; j < g.n(1); ++j) {
        for (int i = 0; i < g.n(0); ++i) {
          const std::size_t q = g.face_index(d, i, j, k);
          out[d][g.cell_index(i, j, k)] = 0.5 * (u[d][q] + u[d][q + stride]);
        }
      }
    }
  }
  return out;
}

FaceArrays cell_to_faces(const StaggeredGrid& g, const std::vector<double>& cells) {
  require_cells(g, cells);
  FaceArrays out = zero_faces(g);
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t q) {
    std::array<int, 3> hi{i, j, k};
    std::array<int, 3> lo{i, j, k};
    lo[d] -= 1;
    const bool has_lo = lo[d] >= 0;
    const bool has_hi = hi[d] < g.n(d);
    double s = 0.0;
    int cnt = 0;
    if (has_lo) {
      s += cells[g.cell_index(lo[0], lo[1], lo[2])];
      ++cnt;
    }
    if (has_hi) {
      s += cells[g.cell_index(hi[0], hi[1], hi[2])];
      ++cnt;
    }
    out[d][q] = s / cnt;
  });
  return out;
}

double l2_inner(const StaggeredGrid& g, const FaceArrays& a, const FaceArrays& b) {
  const auto ca = cell_average(g, a);
  const auto cb = cell_average(g, b);
  double s = 0.0;
  for (int d = 0; d < g.dim(); ++d) {
    for (std::size_t c = 0; c < g.cell_count(); ++c) s += ca[d][c] * cb[d][c];
  }
  return s * g.cell_volume();
}

double l2_norm(const StaggeredGrid& g, const FaceArrays& u) { return std::sqrt(std::max(0.0, l2_inner(g, u, u))); }

double h1_seminorm(const StaggeredGrid& g, const FaceArrays& u) {
  const FaceArrays lap = laplacian(g, u);
  return std::sqrt(std::max(0.0, -dot(u, lap) * g.cell_volume()));
}

DiscreteNorms discrete_norms(const DiscreteField& f) {
  DiscreteNorms n;
  n.l2 = l2_norm(f.grid, f.u);
  n.h1 = h1_seminorm(f.grid, f.u);
  for (const auto& c : f.u) {
    for (double v : c) n.linf = std::max(n.linf, std::abs(v));
  }
  return n;
}

Projector::Projector(const StaggeredGrid& g, ProjectionOptions opts) : grid_(g), opts_(opts) {
  if (opts_.backend == ProjectionBackend::kSpectral) spectral_ = new SpectralPoisson(g);
}

Projector::~Projector() { delete spectral_; }

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void remove_mean(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

}  // namespace

ProjectionStats Projector::solve_poisson(const std::vector<double>& rhs_in, std::vector<double>& phi) {
  const auto& g = grid_;
  ProjectionStats st;
  std::vector<double> rhs = rhs_in;
  remove_mean(rhs);
  const double bnorm = norm2(rhs);
  if (bnorm == 0.0) {
    phi.assign(g.cell_count(), 0.0);
    return st;
  }
  if (spectral_) {
    spectral_->solve(rhs, phi);
    st.iterations = 1;
    const auto lphi = divergence(g, gradient(g, phi));
    double r = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) r += (lphi[i] - rhs[i]) * (lphi[i] - rhs[i]);
    st.residual = std::sqrt(r) / bnorm;
    return st;
  }
  // Jacobi PCG on -L, which is SPD on mean-free vectors.
  std::vector<double> diag(g.cell_count());
  const double ih2 = 1.0 / (g.h() * g.h());
  for (int k = 0; k < g.n(2); ++k) {
    for (int j = 0; j < g.n(1); ++j) {
      for (int i = 0; i < g.n(0); ++i) {
        const std::array<int, 3> idx{i, j, k};
        int nb = 0;
        for (int a = 0; a < g.dim(); ++a) nb += (idx[a] > 0) + (idx[a] < g.n(a) - 1);
        diag[g.cell_index(i, j, k)] = nb * ih2;
      }
    }
  }
  const std::size_t n = rhs.size();
  phi.assign(n, 0.0);
  std::vector<double> r(n), z(n), p(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = -rhs[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];
  for (int it = 1; it <= opts_.max_iter; ++it) {
    auto ap = divergence(g, gradient(g, p));
    for (double& v : ap) v = -v;
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    st.iterations = it;
    st.residual = norm2(r) / bnorm;
    if (st.residual < opts_.tol) {
      remove_mean(phi);
      return st;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    double rz_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw Error(ErrorCode::kSolverStalled,
              "poisson CG reached " + std::to_string(opts_.max_iter) + " iterations, residual " +
                  std::to_string(st.residual));
}

ProjectionStats Projector::project(FaceArrays& u, std::vector<double>* phi_out) {
  std::vector<double> phi;
  const ProjectionStats st = solve_poisson(divergence(grid_, u), phi);
  axpy(-1.0, gradient(grid_, phi), u);
  if (phi_out) *phi_out = std::move(phi);
  return st;
}

DiscreteField project_div_free(const DiscreteField& f, const ProjectionOptions& opts, ProjectionStats* stats) {
  Projector proj(f.grid, opts);
  DiscreteField out = f;
  const ProjectionStats st = proj.project(out.u, &out.p);
  if (stats) *stats = st;
  return out;
}

std::size_t MaskField::flagged_cells() const {
  return static_cast<std::size_t>(std::count(cell.begin(), cell.end(), std::uint8_t{1}));
}

MaskField MaskField::empty(const StaggeredGrid& g) {
  MaskField m;
  m.grid = g;
  m.cell.assign(g.cell_count(), 0);
  for (int d = 0; d < 3; ++d) {
    m.cell_target[d].assign(g.cell_count(), 0.0);
    m.face[d].assign(g.face_count(d), 0);
    m.face_target[d].assign(g.face_count(d), 0.0);
  }
  return m;
}

MaskField rasterize_obstacles(const StaggeredGrid& g, const std::vector<RigidMotion>& bodies, double radius,
                              double min_cells) {
  MaskField m = MaskField::empty(g);
  if (bodies.empty()) return m;
  if (radius < min_cells * g.h()) {
    throw Error(ErrorCode::kUnresolvableRadius, "radius " + std::to_string(radius) + " is below " +
                                                    std::to_string(min_cells) + " cells of size " +
                                                    std::to_string(g.h()));
  }
  const double r2 = radius * radius;
  for (const RigidMotion& b : bodies) {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
    for (int a = 0; a < g.dim(); ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((b.center[a] - radius - g.lo()[a]) / g.h())) - 1);
      hi[a] = std::min(g.n(a), static_cast<int>(std::ceil((b.center[a] + radius - g.lo()[a]) / g.h())) + 1);
    }
    for (int k = lo[2]; k <= hi[2]; ++k) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int i = lo[0]; i <= hi[0]; ++i) {
          if (i < g.n(0) && j < g.n(1) && k < g.n(2)) {
            const Vec3 x = g.cell_center(i, j, k);
            if ((x - b.center).squaredNorm() < r2) {
              const std::size_t c = g.cell_index(i, j, k);
              m.cell[c] = 1;
              const Vec3 w = b.velocity_at(x);
              for (int d = 0; d < 3; ++d) m.cell_target[d][c] = w[d];
            }
          }
          for (int d = 0; d < g.dim(); ++d) {
            const auto f = g.face_dims(d);
            if (i >= f[0] || j >= f[1] || k >= f[2]) continue;
            const Vec3 x = g.face_center(d, i, j, k);
            if ((x - b.center).squaredNorm() < r2) {
              const std::size_t q = g.face_index(d, i, j, k);
              m.face[d][q] = 1;
              m.face_target[d][q] = b.velocity_at(x)[d];
            }
          }
        }
      }
    }
  }
  return m;
}

MaskField rasterize_obstacles(const ParticleConfiguration& cfg, const std::vector<RigidMotion>& motions,
                              const StaggeredGrid& g, double min_cells) {
  std::vector<RigidMotion> bodies;
  if (motions.empty()) {
    for (const auto& c : cfg.centers) bodies.push_back({c, Vec3::Zero(), Vec3::Zero()});
  } else {
    if (motions.size() != cfg.centers.size()) {
      throw Error(ErrorCode::kShapeMismatch, "one rigid motion per particle is required");
    }
    bodies = motions;
  }
  return rasterize_obstacles(g, bodies, cfg.radius, min_cells);
}

RestrictionResult restrict_field(const DiscreteField& f, const MaskField& mask, double tol, int max_iter) {
  const StaggeredGrid& g = f.grid;
  if (!g.same_shape(mask.grid)) throw Error(ErrorCode::kShapeMismatch, "mask grid differs from field grid");
  RestrictionResult res;

  // Dilate the cell mask by one cell in every direction (diagonals included).
  std::vector<std::uint8_t> halo(g.cell_count(), 0);
  const int kr = g.dim() == 3 ? 1 : 0;
  for (int k = 0; k < g.n(2); ++k) {
    for (int j = 0; j < g.n(1); ++j) {
      for (int i = 0; i < g.n(0); ++i) {
        if (!mask.cell[g.cell_index(i, j, k)]) continue;
        for (int c = std::max(0, k - kr); c <= std::min(g.n(2) - 1, k + kr); ++c) {
          for (int b = std::max(0, j - 1); b <= std::min(g.n(1) - 1, j + 1); ++b) {
            for (int a = std::max(0, i - 1); a <= std::min(g.n(0) - 1, i + 1); ++a) halo[g.cell_index(a, b, c)] = 1;
          }
        }
      }
    }
  }
  FaceArrays keep = zero_faces(g);
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t q) {
    std::array<int, 3> lo{i, j, k};
    lo[d] -= 1;
    const bool lo_bad = lo[d] >= 0 && halo[g.cell_index(lo[0], lo[1], lo[2])];
    const bool hi_bad = std::array<int, 3>{i, j, k}[d] < g.n(d) && halo[g.cell_index(i, j, k)];
    keep[d][q] = (lo_bad || hi_bad) ? 0.0 : 1.0;
    if (lo_bad || hi_bad) ++res.zeroed_faces;
  });
  auto apply_z = [&](FaceArrays& u) {
    for (int d = 0; d < 3; ++d) {
      for (std::size_t q = 0; q < u[d].size(); ++q) u[d][q] *= keep[d][q];
    }
  };

  FaceArrays u0 = f.u;
  apply_z(u0);
  // Solve -D Z G q = -D u0; PCG with the Neumann Poisson inverse as preconditioner.
  std::vector<double> b = divergence(g, u0);
  for (double& v : b) v = -v;
  const std::size_t n = b.size();
  // Divergence below tol * |u0| / h is already converged; chasing it further only amplifies roundoff.
  const double floor = tol * std::sqrt(dot(u0, u0)) / g.h();
  const double bnorm = std::max(norm2(b), floor);
  std::vector<double> q(n, 0.0);
  if (norm2(b) > floor) {
    SpectralPoisson precond(g);
    auto apply_a = [&](const std::vector<double>& x) {
      FaceArrays gx = gradient(g, x);
      apply_z(gx);
      auto out = divergence(g, gx);
      for (double& v : out) v = -v;
      return out;
    };
    auto apply_m = [&](const std::vector<double>& r, std::vector<double>& z) {
      precond.solve(r, z);
      for (double& v : z) v = -v;
    };
    std::vector<double> r = b, z, p;
    apply_m(r, z);
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];
    for (int it = 1; it <= max_iter; ++it) {
      const auto ap = apply_a(p);
      double pap = 0.0;
      for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
      if (pap <= 0.0) break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        q[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      res.iterations = it;
      res.residual = norm2(r) / bnorm;
      if (res.residual < tol) break;
      apply_m(r, z);
      double rz_new = 0.0;
      for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (res.residual >= tol) {
      throw Error(ErrorCode::kSolverStalled, "restriction solve residual " + std::to_string(res.residual));
    }
  }
  FaceArrays gq = gradient(g, q);
  apply_z(gq);
  axpy(-1.0, gq, u0);
  res.field = DiscreteField::zeros(g);
  res.field.u = std::move(u0);
  const double in = h1_seminorm(g, f.u);
  res.h1_ratio = in > 0.0 ? h1_seminorm(g, res.field.u) / in : 0.0;
  return res;
}

void write_field(const std::string& path, const DiscreteField& f) {
  static_assert(std::endian::native == std::endian::little, "field dumps assume a little-endian host");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  const auto& g = f.grid;
  std::ostringstream header;
  header.precision(17);
  header << "PFRS1 " << g.dim() << ' ' << g.n(0) << ' ' << g.n(1) << ' ' << g.n(2) << ' ' << g.h() << '\n';
  os << header.str();
  for (int d = 0; d < g.dim(); ++d) {
    os.write(reinterpret_cast<const char*>(f.u[d].data()), static_cast<std::streamsize>(f.u[d].size() * sizeof(double)));
  }
  std::vector<double> p = f.p;
  p.resize(g.cell_count(), 0.0);
  os.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!os) throw Error(ErrorCode::kIoError, "short write to " + path);
}

DiscreteField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::string line;
  std::getline(is, line);
  std::istringstream header(line);
  std::string magic;
  int dim = 0;
  std::array<int, 3> n{};
  double h = 0.0;
  header >> magic >> dim >> n[0] >> n[1] >> n[2] >> h;
  if (magic != "PFRS1" || !header) throw Error(ErrorCode::kIoError, path + " is not a PFRS1 dump");
  DiscreteField f = DiscreteField::zeros(StaggeredGrid(dim, n, h));
  for (int d = 0; d < dim; ++d) {
    is.read(reinterpret_cast<char*>(f.u[d].data()), static_cast<std::streamsize>(f.u[d].size() * sizeof(double)));
  }
  is.read(reinterpret_cast<char*>(f.p.data()), static_cast<std::streamsize>(f.p.size() * sizeof(double)));
  if (!is) throw Error(ErrorCode::kIoError, path + " is truncated");
  return f;
}

std::vector<double> density_on_grid(const DensityField& density, const StaggeredGrid& g) {
  return resample_density(density, g.lo(), g.n(), g.h()).values;
}

}  // namespace pfrs
