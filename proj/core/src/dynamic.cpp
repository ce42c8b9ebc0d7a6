#include "pfrs/dynamic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pfrs {

namespace {

/// Face value with odd reflection across the no-slip walls.
double face_at(const StaggeredGrid& g, const FaceArrays& u, int d, std::array<int, 3> idx) {
  const auto fd = g.face_dims(d);
  double sign = 1.0;
  for (int a = 0; a < g.dim(); ++a) {
    const int n = fd[a];
    if (a == d) {
      if (idx[a] < 0) {
        idx[a] = -idx[a];
        sign = -sign;
      } else if (idx[a] > n - 1) {
        idx[a] = 2 * (n - 1) - idx[a];
        sign = -sign;
      }
    } else {
      if (idx[a] < 0) {
        idx[a] = -idx[a] - 1;
        sign = -sign;
      } else if (idx[a] > n - 1) {
        idx[a] = 2 * n - 1 - idx[a];
        sign = -sign;
      }
    }
    idx[a] = std::clamp(idx[a], 0, n - 1);
  }
  return sign * u[d][g.face_index(d, idx[0], idx[1], idx[2])];
}

double max_abs(const FaceArrays& u) {
  double m = 0.0;
  for (const auto& c : u) {
    for (double v : c) m = std::max(m, std::abs(v));
  }
  return m;
}

Vec3 integrate_schedule(const VelocitySchedule& schedule, std::size_t n, double t, double dt) {
  // Simpson's rule: exact for schedules up to cubic in time.
  return dt / 6.0 * (schedule(n, t) + 4.0 * schedule(n, t + 0.5 * dt) + schedule(n, t + dt));
}

void check_collisions(const DynamicState& s) {
  std::vector<Vec3> centers;
  centers.reserve(s.count());
  for (const auto& m : s.motions) centers.push_back(m.center);
  const ValidationReport rep = check_runtime_separation(centers, s.domain, s.eps);
  if (!rep.ok()) {
    const Violation& v = rep.violations.front();
    throw Error(ErrorCode::kCollisionDetected, "separation " + std::to_string(v.distance) + " below " +
                                                   std::to_string(v.threshold) + " at t = " + std::to_string(s.time));
  }
}

}  // namespace

DynamicState DynamicState::at_rest(const StaggeredGrid& g, const ParticleConfiguration& cfg) {
  DynamicState s;
  s.field = DiscreteField::zeros(g);
  for (const Vec3& c : cfg.centers) s.motions.push_back({c, Vec3::Zero(), Vec3::Zero()});
  s.mass.assign(cfg.count(), 0.0);
  s.inertia.assign(cfg.count(), 0.0);
  s.radius = cfg.radius;
  s.eps = cfg.eps();
  s.domain = cfg.domain;
  return s;
}

std::string EnergyLedger::to_csv() const {
  std::ostringstream os;
  os << "time,kinetic,particle_kinetic,dissipation,penalty_dissipation,work\n";
  os << std::setprecision(12);
  for (const auto& e : entries) {
    os << e.time << ',' << e.kinetic << ',' << e.particle_kinetic << ',' << e.dissipation << ','
       << e.penalty_dissipation << ',' << e.work << '\n';
  }
  return os.str();
}

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
  std::ostringstream os;
  os << "time,particle,hx,hy,hz,vx,vy,vz,wx,wy,wz\n";
  os << std::setprecision(12);
  for (const auto& r : rows) {
    os << r.time << ',' << r.particle;
    for (const Vec3* v : {&r.center, &r.velocity, &r.angular}) {
      for (int a = 0; a < 3; ++a) os << ',' << (*v)[a];
    }
    os << '\n';
  }
  return os.str();
}

FaceArrays advection(const StaggeredGrid& g, const FaceArrays& u) {
  FaceArrays out = zero_faces(g);
  const double inv6h = 1.0 / (6.0 * g.h());
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t q) {
    if (is_wall_face(g, d, i, j, k)) return;
    const std::array<int, 3> idx{i, j, k};
    double acc = 0.0;
    for (int e = 0; e < g.dim(); ++e) {
      double a = 0.0;
      if (e == d) {
        a = u[d][q];
      } else {
        std::array<int, 3> p = idx;
        for (int de = 0; de <= 1; ++de) {
          for (int dd = -1; dd <= 0; ++dd) {
            p = idx;
            p[e] += de;
            p[d] += dd;
            a += face_at(g, u, e, p);
          }
        }
        a *= 0.25;
      }
      if (a == 0.0) continue;
      auto phi = [&](int off) {
        std::array<int, 3> p = idx;
        p[e] += off;
        return face_at(g, u, d, p);
      };
      const double deriv = a > 0.0 ? (2.0 * phi(1) + 3.0 * phi(0) - 6.0 * phi(-1) + phi(-2)) * inv6h
                                   : (-phi(2) + 6.0 * phi(1) - 3.0 * phi(0) - 2.0 * phi(-1)) * inv6h;
      acc += a * deriv;
    }
    out[d][q] = acc;
  });
  return out;
}

BodyLoads penalization_loads(const StaggeredGrid& g, const DynamicState& s, const FaceArrays& sigma,
                             const FaceArrays& sigma_w, const FaceArrays& u) {
  BodyLoads loads;
  loads.force.assign(s.count(), Vec3::Zero());
  loads.torque.assign(s.count(), Vec3::Zero());
  if (s.count() == 0) return loads;
  const double vol = g.cell_volume();
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t q) {
    if (sigma[d][q] == 0.0) return;
    const Vec3 x = g.face_center(d, i, j, k);
    std::size_t owner = 0;
    double best = (x - s.motions[0].center).squaredNorm();
    for (std::size_t n = 1; n < s.count(); ++n) {
      const double dist = (x - s.motions[n].center).squaredNorm();
      if (dist < best) {
        best = dist;
        owner = n;
      }
    }
    Vec3 f = Vec3::Zero();
    f[d] = (sigma[d][q] * u[d][q] - sigma_w[d][q]) * vol;
    loads.force[owner] += f;
    loads.torque[owner] += (x - s.motions[owner].center).cross(f);
  });
  return loads;
}

void couple_heavy_particles(DynamicState& s, const BodyLoads& loads, double dt) {
  if (loads.force.size() != s.count()) throw Error(ErrorCode::kShapeMismatch, "one load per particle");
  const bool planar = s.domain.dim == 2;
  for (std::size_t n = 0; n < s.count(); ++n) {
    if (!(s.mass[n] > 0.0) || !(s.inertia[n] > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "coupled particles need positive mass and inertia");
    }
    RigidMotion& m = s.motions[n];
    m.translation += dt * loads.force[n] / s.mass[n];
    Vec3 torque = loads.torque[n];
    if (planar) {
      m.translation[2] = 0.0;
      torque[0] = torque[1] = 0.0;
    }
    m.angular += dt * torque / s.inertia[n];
    m.center += dt * m.translation;
  }
}

EnergyEntry energy_entry(const DynamicState& s, double time) {
  EnergyEntry e;
  e.time = time;
  const StaggeredGrid& g = s.field.grid;
  e.kinetic = 0.5 * dot(s.field.u, s.field.u) * g.cell_volume();
  for (std::size_t n = 0; n < s.count(); ++n) {
    const RigidMotion& m = s.motions[n];
    e.particle_kinetic += 0.5 * s.mass[n] * m.translation.squaredNorm() + 0.5 * s.inertia[n] * m.angular.squaredNorm();
  }
  return e;
}

FlowStepper::FlowStepper(const StaggeredGrid& g, StepOptions opts)
    : grid_(g), opts_(opts), solver_(std::make_unique<PenalizedStokesSolver>(g, opts.solver)) {}

FlowStepper::~FlowStepper() = default;

void FlowStepper::check_cfl(const DiscreteField& u, double dt) const {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  const double umax = max_abs(u.u);
  if (dt * umax > opts_.cfl * grid_.h()) {
    throw Error(ErrorCode::kCflViolation, "dt * max|u| / h = " + std::to_string(dt * umax / grid_.h()));
  }
}

FaceArrays FlowStepper::explicit_rhs(const DiscreteField& u, double dt, const FaceArrays& f) const {
  FaceArrays rhs = advection(grid_, u.u);
  for (int d = 0; d < grid_.dim(); ++d) {
    for (std::size_t q = 0; q < rhs[d].size(); ++q) {
      rhs[d][q] = u.u[d][q] / dt - rhs[d][q] + (f[d].empty() ? 0.0 : f[d][q]);
    }
  }
  return rhs;
}

void FlowStepper::record(const DynamicState& s, const FaceArrays& sigma, const FaceArrays& sigma_w,
                         const FaceArrays& f, double dt, bool prescribed_work, EnergyLedger* ledger) const {
  if (!ledger) return;
  const StaggeredGrid& g = grid_;
  const double vol = g.cell_volume();
  const FaceArrays& u = s.field.u;
  EnergyEntry prev = ledger->entries.back();
  EnergyEntry e = energy_entry(s, s.time);
  double pen = 0.0;
  double work = 0.0;
  for (int d = 0; d < g.dim(); ++d) {
    for (std::size_t q = 0; q < u[d].size(); ++q) {
      if (!f[d].empty()) work += f[d][q] * u[d][q];
      if (sigma[d][q] == 0.0) continue;
      const double w = sigma_w[d][q] / sigma[d][q];
      const double defect = u[d][q] - w;
      pen += sigma[d][q] * defect * defect;
      if (prescribed_work) work -= sigma[d][q] * defect * w;
    }
  }
  e.dissipation = prev.dissipation - dt * dot(u, laplacian(g, u)) * vol;
  e.penalty_dissipation = prev.penalty_dissipation + dt * pen * vol;
  e.work = prev.work + dt * work * vol;
  ledger->entries.push_back(e);
}

void FlowStepper::step_penalized(DynamicState& s, double dt, MotionMode mode, const FaceArrays& f,
                                 const VelocitySchedule& schedule, EnergyLedger* ledger) {
  const StaggeredGrid& g = grid_;
  check_cfl(s.field, dt);
  if (mode == MotionMode::kPrescribed && s.count() > 0 && !schedule) {
    throw Error(ErrorCode::kInvalidArgument, "prescribed mode needs a velocity schedule");
  }
  if (ledger && ledger->entries.empty()) ledger->entries.push_back(energy_entry(s, s.time));
  if (mode == MotionMode::kPrescribed) {
    for (std::size_t n = 0; n < s.count(); ++n) s.motions[n].translation = schedule(n, s.time);
  }

  FaceArrays sigma = zero_faces(g);
  FaceArrays sigma_w = zero_faces(g);
  if (s.count() > 0) {
    const MaskField mask = rasterize_obstacles(g, s.motions, s.radius, opts_.min_cells);
    penalization_terms(mask, opts_.eta > 0.0 ? opts_.eta : g.h() * g.h(), sigma, sigma_w);
  }
  const FaceArrays rhs = explicit_rhs(s.field, dt, f);
  DiscreteField next;
  stats_ = solver_->solve(1.0 / dt, sigma, sigma_w, rhs, next, &s.field.u);
  s.field = std::move(next);
  loads_ = penalization_loads(g, s, sigma, sigma_w, s.field.u);

  const double t = s.time;
  s.time = t + dt;
  if (mode == MotionMode::kPrescribed) {
    for (std::size_t n = 0; n < s.count(); ++n) {
      s.motions[n].center += integrate_schedule(schedule, n, t, dt);
      s.motions[n].translation = schedule(n, s.time);
    }
  } else {
    couple_heavy_particles(s, loads_, dt);
  }
  if (opts_.check_collisions && s.count() > 0) check_collisions(s);
  record(s, sigma, sigma_w, f, dt, mode == MotionMode::kPrescribed, ledger);
}

void FlowStepper::step_brinkman(DynamicState& s, double dt, const std::vector<double>& friction_cells,
                                const FaceArrays& f, EnergyLedger* ledger) {
  const StaggeredGrid& g = grid_;
  check_cfl(s.field, dt);
  if (friction_cells.size() != g.cell_count()) throw Error(ErrorCode::kShapeMismatch, "friction shape");
  if (ledger && ledger->entries.empty()) ledger->entries.push_back(energy_entry(s, s.time));
  const FaceArrays sigma = cell_to_faces(g, friction_cells);
  const FaceArrays sigma_w = zero_faces(g);
  const FaceArrays rhs = explicit_rhs(s.field, dt, f);
  DiscreteField next;
  stats_ = solver_->solve(1.0 / dt, sigma, sigma_w, rhs, next, &s.field.u);
  s.field = std::move(next);
  s.time += dt;
  record(s, sigma, sigma_w, f, dt, false, ledger);
}

EnergyAudit energy_audit(const EnergyLedger& ledger, double tol) {
  EnergyAudit a;
  if (ledger.entries.empty()) return a;
  const double e0 = ledger.entries.front().total();
  double scale_ref = e0;
  for (const auto& e : ledger.entries) scale_ref = std::max({scale_ref, e.total(), std::abs(e.work)});
  const double slack = tol * scale_ref + 1e-300;
  for (const auto& e : ledger.entries) {
    const double excess = e.total() + e.dissipation - e.work - e0;
    if (excess > slack) {
      a.ok = false;
      ++a.violations;
    }
    if (excess > a.worst_excess) {
      a.worst_excess = excess;
      a.worst_time = e.time;
    }
  }
  if (scale_ref > 0.0) a.worst_excess /= scale_ref;
  return a;
}

Vec3 mms_velocity(double t, const Vec3& x) {
  const double E = std::exp(-t);
  const double sa = std::sin(kPi * x[0]);
  const double sb = std::sin(kPi * x[1]);
  return Vec3(E * sa * sa * std::sin(2.0 * kPi * x[1]), -E * std::sin(2.0 * kPi * x[0]) * sb * sb, 0.0);
}

Vec3 mms_forcing(double t, const Vec3& x) {
  const double pi = kPi;
  const double E = std::exp(-t);
  const double sa = std::sin(pi * x[0]);
  const double sb = std::sin(pi * x[1]);
  const double s2a = std::sin(2.0 * pi * x[0]);
  const double s2b = std::sin(2.0 * pi * x[1]);
  const double c2a = std::cos(2.0 * pi * x[0]);
  const double c2b = std::cos(2.0 * pi * x[1]);
  const Vec3 u = mms_velocity(t, x);
  // Gradients grad(i, j) = d_j u_i.
  const double u1x = E * pi * s2a * s2b;
  const double u1y = E * 2.0 * pi * sa * sa * c2b;
  const double u2x = -E * 2.0 * pi * c2a * sb * sb;
  const double u2y = -E * pi * s2a * s2b;
  const double lap1 = E * pi * pi * s2b * (2.0 * c2a - 4.0 * sa * sa);
  const double lap2 = E * pi * pi * s2a * (4.0 * sb * sb - 2.0 * c2b);
  return Vec3(-u[0] + u[0] * u1x + u[1] * u1y - lap1, -u[1] + u[0] * u2x + u[1] * u2y - lap2, 0.0);
}

MmsResult mms_run(int n, double dt, double T, const StepOptions& opts) {
  const StaggeredGrid g = StaggeredGrid::over(DomainBox::unit(2), n);
  DynamicState s;
  s.domain = DomainBox::unit(2);
  s.field = sample_field(g, [](const Vec3& x) -> Vec3 { return mms_velocity(0.0, x); });
  FlowStepper stepper(g, opts);
  const int steps = std::max(1, static_cast<int>(std::lround(T / dt)));
  const double h = T / steps;
  for (int k = 0; k < steps; ++k) {
    const double t1 = s.time + h;
    // Backward Euler evaluates the forcing at the new time level.
    const FaceArrays f = sample_field(g, [t1](const Vec3& x) -> Vec3 { return mms_forcing(t1, x); }).u;
    stepper.step_penalized(s, h, MotionMode::kPrescribed, f);
  }
  FaceArrays err = sample_field(g, [T](const Vec3& x) -> Vec3 { return mms_velocity(T, x); }).u;
  axpy(-1.0, s.field.u, err);
  MmsResult r;
  r.n = n;
  r.dt = h;
  r.l2_error = l2_norm(g, err);
  return r;
}

double friction_coefficient_2d(double radius, double eps) {
  if (!(radius > 0.0 && radius < 1.0)) throw Error(ErrorCode::kInvalidArgument, "2D friction needs 0 < r < 1");
  return 4.0 * kPi / (-std::log(radius)) / (eps * eps);
}

std::vector<DynamicStudyRow> dynamic_convergence_study(const DynamicStudyConfig& cfg) {
  std::vector<DynamicStudyRow> rows(cfg.eps_list.size());

  auto run_case = [&](std::size_t idx) {
    const auto t0 = std::chrono::steady_clock::now();
    DynamicStudyRow& row = rows[idx];
    row.eps = cfg.eps_list[idx];
    row.grid = cfg.grid_n;
    try {
      ScalingRegime regime = cfg.regime;
      const int dim = regime.dim;
      regime.eps = row.eps;
      const DomainBox box = DomainBox::unit(dim);
      const StaggeredGrid g = StaggeredGrid::over(box, cfg.grid_n);
      const ParticleConfiguration pc = generate_configuration(box, regime, cfg.mode, cfg.seed);
      row.n_particles = pc.count();
      row.radius = pc.radius;

      const FaceArrays f = sample_field(g, [&](const Vec3& x) -> Vec3 {
                             return cfg.forcing_amplitude * forcing_value(cfg.forcing, x, dim);
                           }).u;
      const double speed = cfg.speed * row.eps * row.eps;
      const VelocitySchedule schedule = [speed](std::size_t, double) { return Vec3(speed, 0.0, 0.0); };

      std::vector<double> friction(g.cell_count(), 0.0);
      if (pc.count() > 0) {
        row.friction = dim == 2 ? friction_coefficient_2d(pc.radius, row.eps)
                                : 6.0 * kPi * pc.radius / std::pow(row.eps, 3);
        friction = density_on_grid(empirical_density(pc, cfg.density_cell_factor * row.eps), g);
        for (double& v : friction) v *= row.friction;
      }

      StepOptions opts;
      opts.eta = cfg.eta_factor * g.h() * g.h();
      opts.min_cells = cfg.min_cells;
      opts.solver = cfg.solver;
      FlowStepper pen(g, opts);
      FlowStepper brk(g, opts);
      DynamicState sp = DynamicState::at_rest(g, pc);
      DynamicState sb = DynamicState::at_rest(g, pc);
      EnergyLedger ledger;

      const int steps = std::max(1, static_cast<int>(std::lround(cfg.T / cfg.dt)));
      const double dt = cfg.T / steps;
      double gap2 = 0.0;
      double ref2 = 0.0;
      for (int k = 0; k < steps; ++k) {
        pen.step_penalized(sp, dt, MotionMode::kPrescribed, f, schedule, &ledger);
        brk.step_brinkman(sb, dt, friction, f);
        FaceArrays diff = sp.field.u;
        axpy(-1.0, sb.field.u, diff);
        const double d = l2_norm(g, diff);
        const double b = l2_norm(g, sb.field.u);
        gap2 += dt * d * d;
        ref2 += dt * b * b;
        if (k + 1 == steps) row.final_gap = d;
      }
      row.steps = steps;
      row.l2_gap = std::sqrt(gap2);
      row.brinkman_l2 = std::sqrt(ref2);
      row.energy_ok = energy_audit(ledger).ok;
    } catch (const std::exception& e) {
      row.status = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  parallel_for(rows.size(), resolve_threads(cfg.threads), run_case);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.eps > b.eps; });
  return rows;
}

std::vector<DriftReport> drift_bound_check(const std::vector<TrajectoryRow>& trajectory, const DynamicState& s) {
  std::vector<DriftReport> out(s.count());
  std::vector<bool> seen(s.count(), false);
  std::vector<Vec3> v0(s.count(), Vec3::Zero());
  std::vector<Vec3> w0(s.count(), Vec3::Zero());
  for (const auto& row : trajectory) {
    if (row.particle >= s.count()) throw Error(ErrorCode::kShapeMismatch, "trajectory particle index");
    const std::size_t n = row.particle;
    if (!seen[n]) {
      seen[n] = true;
      v0[n] = row.velocity;
      w0[n] = row.angular;
    }
    out[n].velocity_drift = std::max(out[n].velocity_drift, (row.velocity - v0[n]).norm());
    out[n].angular_drift = std::max(out[n].angular_drift, s.radius * (row.angular - w0[n]).norm());
  }
  for (std::size_t n = 0; n < s.count(); ++n) {
    DriftReport& r = out[n];
    r.particle = n;
    r.mass = s.mass[n];
    r.radius = s.radius;
    const double sr = std::sqrt(s.radius);
    r.constant = (r.velocity_drift + r.angular_drift) * r.mass / sr;
    r.h1_indicator = (s.eps > 0.0 && r.mass > 0.0) ? sr / (s.eps * r.mass) : 0.0;
  }
  return out;
}

double drift_spread(const std::vector<double>& constants) {
  if (constants.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
  if (*hi == 0.0) return 0.0;
  if (*lo == 0.0) return std::numeric_limits<double>::infinity();
  return *hi / *lo;
}

HeavyRunResult heavy_particle_run(const HeavyRunConfig& cfg) {
  const DomainBox box = DomainBox::unit(3);
  const StaggeredGrid g = StaggeredGrid::over(box, cfg.grid_n);
  HeavyRunResult res;
  DynamicState& s = res.final_state;
  s.domain = box;
  s.eps = cfg.eps;
  s.radius = cfg.radius;
  s.motions = {RigidMotion{cfg.center, cfg.initial_velocity, Vec3::Zero()}};
  s.mass = {cfg.mass};
  s.inertia = {0.4 * cfg.mass * cfg.radius * cfg.radius};
  s.field = sample_field(g, [&](const Vec3& x) -> Vec3 { return cfg.amplitude * test_field(0, x); });
  Projector(g).project(s.field.u);

  StepOptions opts;
  opts.min_cells = cfg.min_cells;
  FlowStepper stepper(g, opts);
  const int steps = std::max(1, static_cast<int>(std::lround(cfg.T / cfg.dt)));
  const double dt = cfg.T / steps;
  const FaceArrays f = zero_faces(g);
  auto log_state = [&] {
    for (std::size_t n = 0; n < s.count(); ++n) {
      res.trajectory.push_back({s.time, n, s.motions[n].center, s.motions[n].translation, s.motions[n].angular});
    }
  };
  log_state();
  for (int k = 0; k < steps; ++k) {
    stepper.step_penalized(s, dt, MotionMode::kCoupled, f, {}, &res.ledger);
    log_state();
  }
  res.drift = drift_bound_check(res.trajectory, s);
  return res;
}

}  // namespace pfrs
