#include "pfrs/stokes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace pfrs {

namespace {

double face_mean(const StaggeredGrid& g, const FaceArrays& a) {
  double s = 0.0;
  std::size_t n = 0;
  for (int d = 0; d < g.dim(); ++d) {
    for (double v : a[d]) s += v;
    n += a[d].size();
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

void zero_walls(const StaggeredGrid& g, FaceArrays& u) {
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t q) {
    if (is_wall_face(g, d, i, j, k)) u[d][q] = 0.0;
  });
}

}  // namespace

PenalizedStokesSolver::PenalizedStokesSolver(const StaggeredGrid& g, SolverOptions opts)
    : grid_(g), opts_(opts), projector_(std::make_unique<Projector>(g)) {
  if (opts_.precond == Preconditioner::kSpectral) helmholtz_ = std::make_unique<SpectralHelmholtz>(g);
}

PenalizedStokesSolver::~PenalizedStokesSolver() = default;

SolveStats PenalizedStokesSolver::solve(double c, const FaceArrays& sigma, const FaceArrays& sigma_w,
                                        const FaceArrays& f, DiscreteField& out, const FaceArrays* guess) {
  const auto t0 = std::chrono::steady_clock::now();
  const StaggeredGrid& g = grid_;
  SolveStats st;

  auto apply_a = [&](const FaceArrays& u) {
    FaceArrays au = laplacian(g, u);
    for (int d = 0; d < g.dim(); ++d) {
      for (std::size_t q = 0; q < au[d].size(); ++q) au[d][q] = c * u[d][q] - au[d][q] + sigma[d][q] * u[d][q];
    }
    zero_walls(g, au);
    return au;
  };

  const double shift = c + face_mean(g, sigma);
  auto apply_m = [&](const FaceArrays& r) {
    FaceArrays z;
    if (helmholtz_) {
      helmholtz_->solve(shift, r, z);
    } else {
      z = r;
      const double lap = 2.0 * g.dim() / (g.h() * g.h());
      for (int d = 0; d < g.dim(); ++d) {
        for (std::size_t q = 0; q < z[d].size(); ++q) z[d][q] /= (c + lap + sigma[d][q]);
      }
    }
    zero_walls(g, z);
    projector_->project(z);
    return z;
  };

  FaceArrays rhs = f;
  axpy(1.0, sigma_w, rhs);
  zero_walls(g, rhs);

  FaceArrays u = guess ? *guess : zero_faces(g);
  zero_walls(g, u);
  projector_->project(u);

  FaceArrays r = rhs;
  axpy(-1.0, apply_a(u), r);
  projector_->project(r);
  FaceArrays rhs_proj = rhs;
  projector_->project(rhs_proj);
  const double bnorm = std::sqrt(dot(rhs_proj, rhs_proj));

  if (bnorm == 0.0) {
    out = DiscreteField::zeros(g);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return st;
  }

  st.residual = std::sqrt(dot(r, r)) / bnorm;
  if (st.residual >= opts_.tol) {
    FaceArrays z = apply_m(r);
    FaceArrays p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= opts_.max_iter; ++it) {
      FaceArrays ap = apply_a(p);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      axpy(alpha, p, u);
      projector_->project(ap);
      axpy(-alpha, ap, r);
      st.iterations = it;
      st.residual = std::sqrt(dot(r, r)) / bnorm;
      if (st.residual < opts_.tol) break;
      z = apply_m(r);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int d = 0; d < g.dim(); ++d) {
        for (std::size_t q = 0; q < p[d].size(); ++q) p[d][q] = z[d][q] + beta * p[d][q];
      }
    }
  }
  if (!(st.residual < opts_.tol)) {
    throw Error(ErrorCode::kSolverStalled, "stokes CG stopped at residual " + std::to_string(st.residual) +
                                               " after " + std::to_string(st.iterations) + " iterations");
  }

  // Pressure from the non-solenoidal part of the momentum defect.
  FaceArrays defect = rhs;
  axpy(-1.0, apply_a(u), defect);
  out = DiscreteField::zeros(g);
  projector_->solve_poisson(divergence(g, defect), out.p);
  out.u = std::move(u);
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return st;
}

void penalization_terms(const MaskField& mask, double eta, FaceArrays& sigma, FaceArrays& sigma_w) {
  const StaggeredGrid& g = mask.grid;
  sigma = zero_faces(g);
  sigma_w = zero_faces(g);
  const double inv = 1.0 / eta;
  for (int d = 0; d < g.dim(); ++d) {
    for (std::size_t q = 0; q < sigma[d].size(); ++q) {
      if (mask.face[d][q]) {
        sigma[d][q] = inv;
        sigma_w[d][q] = inv * mask.face_target[d][q];
      }
    }
  }
}

void StokesProblem::check() const {
  if (mask.has_value() == friction.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "exactly one of mask or friction must be set");
  }
  if (eta < 0.0) throw Error(ErrorCode::kInvalidArgument, "eta must be positive");
  for (int d = 0; d < 3; ++d) {
    if (forcing[d].size() != grid.face_count(d)) throw Error(ErrorCode::kShapeMismatch, "forcing shape");
  }
}

std::pair<DiscreteField, SolveStats> solve_stokes_perforated(const StokesProblem& problem, const SolverOptions& opts) {
  problem.check();
  if (!problem.mask) throw Error(ErrorCode::kInvalidArgument, "perforated solve needs a mask");
  if (!problem.mask->grid.same_shape(problem.grid)) throw Error(ErrorCode::kShapeMismatch, "mask grid");
  FaceArrays sigma, sigma_w;
  penalization_terms(*problem.mask, problem.effective_eta(), sigma, sigma_w);
  PenalizedStokesSolver solver(problem.grid, opts);
  DiscreteField out;
  const SolveStats st = solver.solve(0.0, sigma, sigma_w, problem.forcing, out);
  return {std::move(out), st};
}

std::pair<DiscreteField, SolveStats> solve_brinkman(const StaggeredGrid& g, const FaceArrays& f,
                                                    const std::vector<double>& density_cells,
                                                    const SolverOptions& opts, double coefficient) {
  if (density_cells.size() != g.cell_count()) throw Error(ErrorCode::kShapeMismatch, "density shape");
  for (double v : density_cells) {
    if (v < 0.0) throw Error(ErrorCode::kInvalidArgument, "density must be nonnegative");
  }
  FaceArrays sigma = cell_to_faces(g, density_cells);
  scale(coefficient, sigma);
  const FaceArrays sigma_w = zero_faces(g);
  PenalizedStokesSolver solver(g, opts);
  DiscreteField out;
  const SolveStats st = solver.solve(0.0, sigma, sigma_w, f, out);
  return {std::move(out), st};
}

std::pair<DiscreteField, SolveStats> solve_brinkman(const StaggeredGrid& g, const FaceArrays& f,
                                                    const DensityField& density, const SolverOptions& opts,
                                                    double coefficient) {
  return solve_brinkman(g, f, density_on_grid(density, g), opts, coefficient);
}

EnergyBalance energy_balance(const DiscreteField& u, const FaceArrays& sigma, const FaceArrays& sigma_w,
                             const FaceArrays& f) {
  const StaggeredGrid& g = u.grid;
  const double vol = g.cell_volume();
  EnergyBalance e;
  e.dissipation = -dot(u.u, laplacian(g, u.u)) * vol;
  double fr = 0.0;
  double work = 0.0;
  for (int d = 0; d < g.dim(); ++d) {
    for (std::size_t q = 0; q < u.u[d].size(); ++q) {
      fr += (sigma[d][q] * u.u[d][q] - sigma_w[d][q]) * u.u[d][q];
      work += f[d][q] * u.u[d][q];
    }
  }
  e.friction = fr * vol;
  e.work = work * vol;
  const double scale_ref = std::max({std::abs(e.dissipation), std::abs(e.friction), std::abs(e.work), 1e-300});
  e.relative_error = std::abs(e.dissipation + e.friction - e.work) / scale_ref;
  return e;
}

double wall_correction_factor(double lambda) {
  const double l3 = lambda * lambda * lambda;
  const double l5 = l3 * lambda * lambda;
  const double l6 = l5 * lambda;
  return (1.0 - l5) / (1.0 - 2.25 * lambda + 2.5 * l3 - 2.25 * l5 + l6);
}

DragResult sphere_drag(double r, const Vec3& U, const StaggeredGrid& g, const SolverOptions& opts, double eta) {
  if (g.dim() != 3) throw Error(ErrorCode::kUnsupportedDimension, "sphere drag is three-dimensional");
  DragResult res;
  res.radius = r;
  res.h = g.h();
  res.eta = eta > 0.0 ? eta : g.h() * g.h();
  const DomainBox box = g.box();
  const Vec3 center = 0.5 * (box.lo + box.hi);
  const MaskField mask = rasterize_obstacles(g, {RigidMotion{center, U, Vec3::Zero()}}, r, 6.0);
  res.flagged_cells = mask.flagged_cells();
  FaceArrays sigma, sigma_w;
  penalization_terms(mask, res.eta, sigma, sigma_w);
  PenalizedStokesSolver solver(g, opts);
  DiscreteField u;
  res.stats = solver.solve(0.0, sigma, sigma_w, zero_faces(g), u);
  const double vol = g.cell_volume();
  for (int d = 0; d < 3; ++d) {
    double s = 0.0;
    for (std::size_t q = 0; q < u.u[d].size(); ++q) s += sigma[d][q] * u.u[d][q] - sigma_w[d][q];
    res.force[d] = s * vol;
  }
  res.stokes_drag = 6.0 * kPi * r * U.norm();
  res.ratio = res.stokes_drag > 0.0 ? res.force.norm() / res.stokes_drag : 0.0;
  const double outer = 0.5 * box.extent().minCoeff();
  res.wall_factor = wall_correction_factor(r / outer);
  res.wall_corrected_ratio = res.ratio / res.wall_factor;
  return res;
}

ForcingPreset parse_forcing(const std::string& name) {
  if (name == "shear") return ForcingPreset::kShear;
  if (name == "swirl") return ForcingPreset::kSwirl;
  if (name == "uniform") return ForcingPreset::kUniform;
  throw Error(ErrorCode::kUsageError, "unknown forcing preset '" + name + "'");
}

std::string to_string(ForcingPreset f) {
  switch (f) {
    case ForcingPreset::kShear: return "shear";
    case ForcingPreset::kSwirl: return "swirl";
    case ForcingPreset::kUniform: return "uniform";
  }
  return "shear";
}

Vec3 forcing_value(ForcingPreset f, const Vec3& x, int dim) {
  const double pi = kPi;
  switch (f) {
    case ForcingPreset::kShear:
      return Vec3(std::sin(pi * x[1]) * (dim == 2 ? 1.0 : std::sin(pi * x[2])), 0.0, 0.0);
    case ForcingPreset::kSwirl:
      return Vec3(-std::sin(pi * x[0]) * std::cos(pi * x[1]), std::cos(pi * x[0]) * std::sin(pi * x[1]), 0.0);
    case ForcingPreset::kUniform:
      return Vec3(1.0, 0.0, 0.0);
  }
  return Vec3::Zero();
}

Vec3 test_field(int k, const Vec3& x) {
  // Planar curl (d_y G, -d_x G, 0) of G = sin^px(pi x) sin^py(pi y) sin^pz(pi z).
  static constexpr int powers[3][3] = {{2, 2, 1}, {4, 2, 1}, {2, 2, 3}};
  const int* p = powers[((k % 3) + 3) % 3];
  const double pi = kPi;
  double s[3], ds[3];
  for (int a = 0; a < 3; ++a) {
    const double sn = std::sin(pi * x[a]);
    s[a] = std::pow(sn, p[a]);
    ds[a] = p[a] * pi * std::pow(sn, p[a] - 1) * std::cos(pi * x[a]);
  }
  return Vec3(s[0] * ds[1] * s[2], -ds[0] * s[1] * s[2], 0.0);
}

std::vector<StokesStudyRow> stokes_convergence_study(const StokesStudyConfig& cfg) {
  std::vector<StokesStudyRow> rows(cfg.eps_list.size());
  const DomainBox box = DomainBox::unit(3);

  auto run_case = [&](std::size_t idx) {
    const auto t0 = std::chrono::steady_clock::now();
    StokesStudyRow& row = rows[idx];
    row.eps = cfg.eps_list[idx];
    row.grid = cfg.grid_n;
    try {
      const StaggeredGrid g = StaggeredGrid::over(box, cfg.grid_n);
      row.eta = cfg.eta_factor * g.h() * g.h();
      ScalingRegime regime = cfg.regime;
      regime.dim = 3;
      regime.eps = row.eps;
      const ParticleConfiguration pc = generate_configuration(box, regime, cfg.mode, cfg.seed);
      row.n_particles = pc.count();
      row.radius = pc.radius;
      if (pc.centers.empty()) throw Error(ErrorCode::kNoAdmissiblePlacement, "no particles placed");

      const MaskField mask = rasterize_obstacles(pc, {}, g, cfg.min_cells);
      const FaceArrays f =
          sample_field(g, [&](const Vec3& x) -> Vec3 { return cfg.forcing_amplitude * forcing_value(cfg.forcing, x); }).u;

      StokesProblem prob;
      prob.grid = g;
      prob.forcing = f;
      prob.mask = mask;
      prob.eta = row.eta;
      auto [v_eps, st_p] = solve_stokes_perforated(prob, cfg.solver);
      row.iters_perforated = st_p.iterations;

      // Friction per unit volume: 6 pi (r / eps^3) * R, which is 6 pi r times the number density.
      const double cell = cfg.density_cell_factor * row.eps;
      const DensityField dens = cfg.align_density ? empirical_density(pc, cell, lattice_density_origin(pc, cell))
                                                  : empirical_density(pc, cell);
      const double capacity = pc.radius / std::pow(row.eps, 3);
      auto [v_b, st_b] = solve_brinkman(g, f, density_on_grid(dens, g), cfg.solver, 6.0 * kPi * capacity);
      row.iters_brinkman = st_b.iterations;

      FaceArrays diff = v_eps.u;
      axpy(-1.0, v_b.u, diff);
      row.l2_gap = l2_norm(g, diff);
      row.h1_gap = h1_seminorm(g, diff);
      row.brinkman_l2 = l2_norm(g, v_b.u);
      Projector proj(g);
      for (int k = 0; k < 3; ++k) {
        FaceArrays phi = sample_field(g, [k](const Vec3& x) -> Vec3 { return test_field(k, x); }).u;
        proj.project(phi);
        row.pairing_gaps[k] = std::abs(l2_inner(g, diff, phi));
      }
    } catch (const std::exception& e) {
      row.status = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  parallel_for(rows.size(), resolve_threads(cfg.threads), run_case);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.eps > b.eps; });
  return rows;
}

}  // namespace pfrs
