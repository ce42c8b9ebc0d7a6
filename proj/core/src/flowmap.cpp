#include "pfrs/flowmap.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace pfrs {

namespace {

struct FlowVars {
  Vec3 x = Vec3::Zero();
  Mat3 dx = Mat3::Identity();
  Hessian d2{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

FlowVars rhs(const AnalyticField& lambda, double t, const FlowVars& s, bool second) {
  FlowVars d;
  const FieldSample f = lambda.sample(t, s.x);
  d.x = f.value;
  d.dx = f.jacobian * s.dx;
  if (second) {
    const Hessian h = lambda.hessian(t, s.x);
    for (int i = 0; i < 3; ++i) {
      Mat3 acc = Mat3::Zero();
      for (int k = 0; k < 3; ++k) acc += f.jacobian(i, k) * s.d2[k];
      acc += s.dx.transpose() * h[i] * s.dx;
      d.d2[i] = acc;
    }
  } else {
    for (auto& m : d.d2) m.setZero();
  }
  return d;
}

FlowVars combine(const FlowVars& s, double a, const FlowVars& k) {
  FlowVars o;
  o.x = s.x + a * k.x;
  o.dx = s.dx + a * k.dx;
  for (int i = 0; i < 3; ++i) o.d2[i] = s.d2[i] + a * k.d2[i];
  return o;
}

FlowVars rk4_step(const AnalyticField& lambda, double t, double h, const FlowVars& s, bool second) {
  const FlowVars k1 = rhs(lambda, t, s, second);
  const FlowVars k2 = rhs(lambda, t + 0.5 * h, combine(s, 0.5 * h, k1), second);
  const FlowVars k3 = rhs(lambda, t + 0.5 * h, combine(s, 0.5 * h, k2), second);
  const FlowVars k4 = rhs(lambda, t + h, combine(s, h, k3), second);
  FlowVars o;
  o.x = s.x + (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  o.dx = s.dx + (h / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  for (int i = 0; i < 3; ++i) o.d2[i] = s.d2[i] + (h / 6.0) * (k1.d2[i] + 2.0 * k2.d2[i] + 2.0 * k3.d2[i] + k4.d2[i]);
  return o;
}

bool inside_support(const AnalyticField& f, const Vec3& x) {
  if (f.is_zero()) return false;
  if (f.support().empty()) return true;
  for (const Ball& b : f.support()) {
    if ((x - b.center).squaredNorm() < b.radius * b.radius) return true;
  }
  return false;
}

double hessian_norm(const Hessian& h) {
  double s = 0.0;
  for (const auto& m : h) s += m.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

FlowMapState integrate_flow(const AnalyticField& lambda, const std::vector<Vec3>& markers, double t0, double t1,
                            double dt, const FlowOptions& opts) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  if (!(t1 >= t0)) throw Error(ErrorCode::kInvalidArgument, "time span must be increasing");
  const int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / dt - 1e-9)));
  const double h = (t1 - t0) / steps;

  for (int k = 0; k < steps; ++k) {
    for (double t : {t0 + k * h, t0 + (k + 0.5) * h}) {
      const double bound = lambda.jacobian_bound(t);
      if (h * bound > 1.0) {
        throw Error(ErrorCode::kStepTooLarge, "dt * sup|D lambda| = " + std::to_string(h * bound) + " at t = " +
                                                  std::to_string(t));
      }
    }
  }

  FlowMapState st;
  st.lambda = lambda;
  st.t0 = t0;
  st.dt = h;
  st.record_every = std::max(1, opts.record_every);
  st.second_derivatives = opts.second_derivatives;
  st.markers = markers;
  std::vector<int> recorded;
  for (int k = 0; k <= steps; ++k) {
    if (k % st.record_every == 0 || k == steps) recorded.push_back(k);
  }
  for (int k : recorded) st.times.push_back(k == steps ? t1 : t0 + k * h);
  const std::size_t nt = recorded.size();
  const std::size_t nm = markers.size();
  st.x.assign(nt, std::vector<Vec3>(nm));
  st.dx.assign(nt, std::vector<Mat3>(nm));
  st.det.assign(nt, std::vector<double>(nm, 1.0));
  if (opts.second_derivatives) st.d2x.assign(nt, std::vector<Hessian>(nm));

  parallel_for(nm, resolve_threads(0), [&](std::size_t m) {
    FlowVars s;
    s.x = markers[m];
    const bool moving = inside_support(lambda, s.x);
    std::size_t slot = 0;
    for (int k = 0; k <= steps; ++k) {
      if (k > 0 && moving) s = rk4_step(lambda, t0 + (k - 1) * h, h, s, opts.second_derivatives);
      if (slot < nt && recorded[slot] == k) {
        st.x[slot][m] = s.x;
        st.dx[slot][m] = s.dx;
        st.det[slot][m] = s.dx.determinant();
        if (opts.second_derivatives) st.d2x[slot][m] = s.d2;
        ++slot;
      }
    }
  });
  return st;
}

PointMap FlowMapState::map_point(double t, const Vec3& y, bool second) const {
  PointMap out;
  out.x = y;
  if (!inside_support(lambda, y)) return out;
  const double span = t - t0;
  if (span < -1e-12) throw Error(ErrorCode::kInvalidArgument, "time precedes the flow start");
  const int full = static_cast<int>(std::floor(span / dt + 1e-9));
  FlowVars s;
  s.x = y;
  for (int k = 0; k < full; ++k) s = rk4_step(lambda, t0 + k * dt, dt, s, second);
  const double rest = span - full * dt;
  if (rest > 1e-12 * dt) s = rk4_step(lambda, t0 + full * dt, rest, s, second);
  out.x = s.x;
  out.dx = s.dx;
  out.d2x = s.d2;
  return out;
}

std::size_t FlowMapState::time_index(double t) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs(times[i] - t) < std::abs(times[best] - t)) best = i;
  }
  return best;
}

InverseMapEntry invert_flow(const FlowMapState& state, double t, const Vec3& x, double tol, int max_iter) {
  InverseMapEntry e;
  e.y = x;
  if (!inside_support(state.lambda, x)) {
    // Fixed points: X(t, x) = x outside every support.
    PointMap pm = state.map_point(t, x);
    e.residual = (pm.x - x).norm();
    if (e.residual <= tol) return e;
  }
  // Backward integration of dY/ds = lambda(s, Y) from s = t to t0.
  const double span = t - state.t0;
  const int steps = std::max(1, static_cast<int>(std::ceil(span / state.dt - 1e-9)));
  const double h = span / steps;
  Vec3 y = x;
  if (span > 0.0) {
    for (int k = steps; k > 0; --k) {
      FlowVars s;
      s.x = y;
      s = rk4_step(state.lambda, state.t0 + k * h, -h, s, false);
      y = s.x;
    }
  }
  PointMap pm = state.map_point(t, y);
  double res = (pm.x - x).norm();
  int it = 0;
  while (res > tol && it < max_iter) {
    ++it;
    const Vec3 step = pm.dx.lu().solve(pm.x - x);
    double damp = 1.0;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      const Vec3 y_new = y - damp * step;
      const PointMap trial = state.map_point(t, y_new);
      const double r_new = (trial.x - x).norm();
      if (r_new < res || r_new <= tol) {
        y = y_new;
        pm = trial;
        res = r_new;
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) break;
  }
  if (!(res <= tol)) {
    throw Error(ErrorCode::kNewtonDiverged, "inverse flow residual " + std::to_string(res) + " after " +
                                                std::to_string(it) + " iterations");
  }
  e.y = y;
  e.dy = pm.dx.inverse();
  e.residual = res;
  e.iterations = it;
  return e;
}

Hessian inverse_second_derivative(const Mat3& dx, const Hessian& d2x) {
  const Mat3 dy = dx.inverse();
  std::array<Mat3, 3> inner;
  for (int k = 0; k < 3; ++k) inner[k] = dy.transpose() * d2x[k] * dy;
  Hessian out;
  for (int i = 0; i < 3; ++i) {
    out[i].setZero();
    for (int k = 0; k < 3; ++k) out[i] -= dy(i, k) * inner[k];
  }
  return out;
}

std::string BoundReport::to_json() const {
  nlohmann::json j;
  j["eps"] = eps;
  j["v6b"] = v6b;
  j["v6d"] = v6d;
  j["v8"] = v8;
  j["v13"] = v13;
  j["v14"] = v14;
  j["v15"] = v15;
  j["det"] = det;
  j["has_second"] = has_second;
  return j.dump(2);
}

BoundReport flow_bound_report(const FlowMapState& state, double eps) {
  BoundReport r;
  r.eps = eps;
  r.has_second = state.second_derivatives;
  const Mat3 I = Mat3::Identity();
  for (std::size_t ti = 0; ti < state.times.size(); ++ti) {
    const double t = state.times[ti];
    for (std::size_t m = 0; m < state.markers.size(); ++m) {
      const Mat3& dx = state.dx[ti][m];
      const Mat3 dy = dx.inverse();
      r.v6b = std::max(r.v6b, (dx - I).norm());
      r.v8 = std::max(r.v8, (dy - I).norm());
      r.det = std::max(r.det, std::abs(state.det[ti][m] - 1.0));
      const FieldSample f = state.lambda.sample(t, state.x[ti][m]);
      const Mat3 dtdx = f.jacobian * dx;
      r.v14 = std::max(r.v14, dtdx.norm());
      Mat3 dtdy = -dy * f.jacobian;
      if (state.second_derivatives) {
        const Hessian& d2 = state.d2x[ti][m];
        r.v6d = std::max(r.v6d, hessian_norm(d2));
        r.v13 = std::max(r.v13, hessian_norm(inverse_second_derivative(dx, d2)));
        const Vec3 dty = -dy * f.value;
        Mat3 m2;
        for (int k = 0; k < 3; ++k) m2.row(k) = (d2[k] * dty).transpose();
        dtdy -= dy * m2 * dy;
      }
      r.v15 = std::max(r.v15, dtdy.norm());
    }
  }
  return r;
}

AnalyticField transform_field(const AnalyticField& f, const FlowMapState& state, MapDirection dir) {
  if (f.is_zero()) return f;
  AnalyticField::Evaluator eval;
  if (dir == MapDirection::kForward) {
    eval = [f, state](double t, const Vec3& y) {
      const PointMap pm = state.map_point(t, y);
      FieldSample s = f.sample(t, pm.x);
      s.jacobian = s.jacobian * pm.dx;
      return s;
    };
  } else {
    eval = [f, state](double t, const Vec3& x) {
      const InverseMapEntry inv = invert_flow(state, t, x);
      FieldSample s = f.sample(t, inv.y);
      s.jacobian = s.jacobian * inv.dy;
      return s;
    };
  }
  return AnalyticField(std::move(eval), {}, f.length_scale());
}

Vec3 interpolate_faces(const DiscreteField& f, const Vec3& x) {
  const StaggeredGrid& g = f.grid;
  Vec3 out = Vec3::Zero();
  for (int d = 0; d < g.dim(); ++d) {
    const auto fd = g.face_dims(d);
    auto get = [&](std::array<int, 3> idx) {
      double sign = 1.0;
      for (int a = 0; a < g.dim(); ++a) {
        if (a == d) {
          idx[a] = std::clamp(idx[a], 0, fd[a] - 1);
        } else if (idx[a] < 0) {
          idx[a] = 0;
          sign = -sign;
        } else if (idx[a] > fd[a] - 1) {
          idx[a] = fd[a] - 1;
          sign = -sign;
        }
      }
      return sign * f.u[d][g.face_index(d, idx[0], idx[1], idx[2])];
    };
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) {
      double s = (x[a] - g.lo()[a]) / g.h();
      if (a != d) s -= 0.5;
      base[a] = static_cast<int>(std::floor(s));
      frac[a] = s - base[a];
    }
    double acc = 0.0;
    const int kmax = g.dim() == 3 ? 1 : 0;
    for (int c = 0; c <= kmax; ++c) {
      for (int b = 0; b <= 1; ++b) {
        for (int a = 0; a <= 1; ++a) {
          const double w = (a ? frac[0] : 1.0 - frac[0]) * (b ? frac[1] : 1.0 - frac[1]) *
                           (g.dim() == 3 ? (c ? frac[2] : 1.0 - frac[2]) : 1.0);
          if (w == 0.0) continue;
          acc += w * get({base[0] + a, base[1] + b, base[2] + c});
        }
      }
    }
    out[d] = acc;
  }
  return out;
}

DiscreteField transform_field(const DiscreteField& f, const FlowMapState& state, std::size_t ti, MapDirection dir) {
  if (ti >= state.times.size()) throw Error(ErrorCode::kInvalidArgument, "time index out of range");
  const StaggeredGrid& g = f.grid;
  const DomainBox box = g.box();
  const double t = state.times[ti];
  DiscreteField out = f;
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t q) {
    const Vec3 p = g.face_center(d, i, j, k);
    if (!inside_support(state.lambda, p)) return;
    const Vec3 mapped = dir == MapDirection::kForward ? state.map_point(t, p).x : invert_flow(state, t, p).y;
    if (!box.contains(mapped)) throw Error(ErrorCode::kOutOfDomain, "mapped point leaves the domain");
    out.u[d][q] = interpolate_faces(f, mapped)[d];
  });
  return out;
}

namespace {

double bump_normalization() {
  static const double value = [] {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate([](double s) { return std::exp(-1.0 / (1.0 - s * s)); }, -1.0, 1.0);
  }();
  return value;
}

}  // namespace

double mollifier(double s, double delta) {
  const double z = s / delta;
  if (std::abs(z) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - z * z)) / (bump_normalization() * delta);
}

double mollifier_mass(double delta, double dt) {
  double s = 0.0;
  const int n = static_cast<int>(std::ceil(delta / dt)) + 1;
  for (int k = -n; k <= n; ++k) s += mollifier(k * dt, delta) * dt;
  return s;
}

MollifiedSeries mollify_time(const std::vector<double>& times, const std::vector<std::vector<double>>& samples,
                             double delta) {
  if (times.size() != samples.size() || times.size() < 2) {
    throw Error(ErrorCode::kShapeMismatch, "need matching time and sample lists");
  }
  const double t0 = times.front();
  const double t1 = times.back();
  if (!(delta > 0.0) || delta >= 0.5 * (t1 - t0)) {
    throw Error(ErrorCode::kDeltaTooLarge, "delta must lie in (0, T/2)");
  }
  const double dt = (t1 - t0) / static_cast<double>(times.size() - 1);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (std::abs(times[k] - (t0 + k * dt)) > 1e-9 * std::max(1.0, std::abs(t1))) {
      throw Error(ErrorCode::kInvalidArgument, "samples must be uniformly spaced in time");
    }
  }
  if (delta <= dt) throw Error(ErrorCode::kInvalidArgument, "delta must exceed the sample spacing");
  const double tiny = 1e-12 * std::max(1.0, std::abs(t1));
  MollifiedSeries out;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double tau = times[k];
    if (!(tau - t0 > delta + tiny && t1 - tau > delta + tiny)) continue;
    std::vector<double> acc(samples[k].size(), 0.0);
    double wsum = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double w = mollifier(tau - times[j], delta) * dt;
      if (w == 0.0) continue;
      wsum += w;
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += w * samples[j][c];
    }
    for (double& v : acc) v /= wsum;
    out.times.push_back(tau);
    out.values.push_back(std::move(acc));
  }
  return out;
}

double RemainderTerms::total() const {
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

std::vector<Vec3> support_cell_markers(const StaggeredGrid& g, const AnalyticField& lambda,
                                       std::vector<std::size_t>* cells) {
  std::vector<Vec3> out;
  if (cells) cells->clear();
  if (lambda.is_zero()) return out;
  for (const Ball& b : lambda.support()) {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
    for (int a = 0; a < g.dim(); ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((b.center[a] - b.radius - g.lo()[a]) / g.h())));
      hi[a] = std::min(g.n(a) - 1, static_cast<int>(std::ceil((b.center[a] + b.radius - g.lo()[a]) / g.h())));
    }
    for (int k = lo[2]; k <= hi[2]; ++k) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const Vec3 c = g.cell_center(i, j, k);
          if ((c - b.center).squaredNorm() < b.radius * b.radius) {
            out.push_back(c);
            if (cells) cells->push_back(g.cell_index(i, j, k));
          }
        }
      }
    }
  }
  return out;
}

namespace {

/// Cell-centred values and gradients (grad(i, j) = d_j f_i) of a face field.
struct Collocated {
  std::array<std::vector<double>, 3> value;
  const StaggeredGrid* grid = nullptr;

  Vec3 at(std::size_t c) const { return Vec3(value[0][c], value[1][c], value[2][c]); }

  Mat3 grad(int i, int j, int k) const {
    const StaggeredGrid& g = *grid;
    Mat3 m = Mat3::Zero();
    const std::array<int, 3> idx{i, j, k};
    for (int a = 0; a < g.dim(); ++a) {
      std::array<int, 3> lo = idx, hi = idx;
      lo[a] = std::max(0, idx[a] - 1);
      hi[a] = std::min(g.n(a) - 1, idx[a] + 1);
      const double span = (hi[a] - lo[a]) * g.h();
      const std::size_t cl = g.cell_index(lo[0], lo[1], lo[2]);
      const std::size_t ch = g.cell_index(hi[0], hi[1], hi[2]);
      for (int c = 0; c < 3; ++c) m(c, a) = (value[c][ch] - value[c][cl]) / span;
    }
    return m;
  }
};

Collocated collocate(const DiscreteField& f) {
  Collocated c;
  c.value = cell_average(f.grid, f.u);
  c.grid = &f.grid;
  return c;
}

Mat3 q_apply(const Hessian& d2y, const Vec3& a, const Mat3& dx) {
  Mat3 q;
  for (int i = 0; i < 3; ++i) q.row(i) = a.transpose() * d2y[i] * dx;
  return q;
}

}  // namespace

RemainderTerms remainder_eval(const DiscreteField& u_tilde, const DiscreteField& v, const DiscreteField& psi,
                              const FlowMapState& state, std::size_t ti, const std::vector<std::size_t>& cells) {
  const StaggeredGrid& g = u_tilde.grid;
  if (!g.same_shape(v.grid) || !g.same_shape(psi.grid)) throw Error(ErrorCode::kShapeMismatch, "fields differ in grid");
  if (g.dim() != 3) throw Error(ErrorCode::kUnsupportedDimension, "remainder is three-dimensional");
  if (cells.size() != state.markers.size()) throw Error(ErrorCode::kShapeMismatch, "one cell per marker");
  RemainderTerms out;
  if (cells.empty()) return out;
  if (!state.second_derivatives) throw Error(ErrorCode::kMissingDerivative, "flow was integrated without D2X");
  if (ti >= state.times.size()) throw Error(ErrorCode::kInvalidArgument, "time index out of range");

  const Collocated cu = collocate(u_tilde);
  const Collocated cv = collocate(v);
  const Collocated cp = collocate(psi);
  const double t = state.times[ti];
  const double vol = g.cell_volume();
  const std::size_t nx = static_cast<std::size_t>(g.n(0));
  const std::size_t nxy = nx * static_cast<std::size_t>(g.n(1));

  for (std::size_t m = 0; m < cells.size(); ++m) {
    const std::size_t c = cells[m];
    const int i = static_cast<int>(c % nx);
    const int j = static_cast<int>((c / nx) % g.n(1));
    const int k = static_cast<int>(c / nxy);
    const Mat3& dx = state.dx[ti][m];
    const Hessian& d2x = state.d2x[ti][m];
    const Mat3 dy = dx.inverse();
    const Hessian d2y = inverse_second_derivative(dx, d2x);
    const FieldSample lam = state.lambda.sample(t, state.x[ti][m]);
    const Vec3 dty = -dy * lam.value;
    const Mat3 dtdx = lam.jacobian * dx;

    const Vec3 u = cu.at(c);
    const Vec3 vv = cv.at(c);
    const Vec3 ps = cp.at(c);
    const Mat3 grad_v = cv.grad(i, j, k);
    const Mat3 grad_psi = cp.grad(i, j, k);

    const Vec3 xpsi = dx * ps;
    const Mat3 q_xpsi = q_apply(d2y, xpsi, dx);
    const Mat3 q_u = q_apply(d2y, u, dx);
    Mat3 grad_xpsi = dx * grad_psi;
    for (int r = 0; r < 3; ++r) grad_xpsi.row(r) += (ps.transpose() * d2x[r]);

    out.terms[0] += -(grad_v.cwiseProduct(q_xpsi)).sum() * vol;
    out.terms[1] += -(q_u.cwiseProduct(grad_psi)).sum() * vol;
    out.terms[2] += (q_u.cwiseProduct(q_xpsi)).sum() * vol;
    out.terms[3] += -(dx * vv).dot(dtdx * ps) * vol;
    out.terms[4] += -u.dot(grad_xpsi * dty) * vol;
    out.terms[5] += ((u * u.transpose()).cwiseProduct(q_xpsi)).sum() * vol;
  }
  return out;
}

}  // namespace pfrs
