#include "pfrs/fields.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace pfrs {

CutoffValue cutoff_eval(double z) {
  if (z < 0.5) return {1.0, 0.0, 0.0};
  if (z > 0.75) return {0.0, 0.0, 0.0};
  const double s = (z - 0.5) * 4.0;
  if (s <= 0.0) return {1.0, 0.0, 0.0};
  if (s >= 1.0) return {0.0, 0.0, 0.0};
  const double q = -1.0 / s + 1.0 / (1.0 - s);
  const double dq = 1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s));
  const double ddq = -2.0 / (s * s * s) + 2.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s));
  // sigma = 1/(1+e^q), one_minus = 1/(1+e^-q); both forms avoid cancellation.
  const double sigma = 1.0 / (1.0 + std::exp(q));
  const double one_minus = 1.0 / (1.0 + std::exp(-q));
  const double w = sigma * one_minus;
  CutoffValue c;
  c.value = sigma;
  c.d1 = -w * dq * 4.0;
  c.d2 = (w * (one_minus - sigma) * dq * dq - w * ddq) * 16.0;
  return c;
}

Mat3 tmatrix(const Vec3& x) {
  Mat3 m;
  m << 0.0, x[2], -x[1],
      -x[2], 0.0, x[0],
      x[1], -x[0], 0.0;
  return m;
}

Mat3 cross_matrix(const Vec3& w) { return -tmatrix(w); }

namespace {

/// phi(rho) = chi(rho / ell) and the combinations used by the curl formulas.
struct Radial {
  double a = 1.0;   // phi + rho phi'/2
  double da = 0.0;  // 3 phi'/2 + rho phi''/2
  double b = 0.0;   // -phi'/(2 rho)
  double db = 0.0;  // -phi''/(2 rho) + phi'/(2 rho^2)
  bool plateau = true;
  bool outside = false;
};

Radial radial(double rho, double ell) {
  Radial r;
  const double z = rho / ell;
  if (z < 0.5) return r;
  if (z > 0.75) {
    r.plateau = false;
    r.outside = true;
    r.a = 0.0;
    return r;
  }
  const CutoffValue c = cutoff_eval(z);
  const double p = c.value;
  const double dp = c.d1 / ell;
  const double ddp = c.d2 / (ell * ell);
  r.plateau = false;
  r.a = p + 0.5 * rho * dp;
  r.da = 1.5 * dp + 0.5 * rho * ddp;
  r.b = -dp / (2.0 * rho);
  r.db = -ddp / (2.0 * rho) + dp / (2.0 * rho * rho);
  return r;
}

/// Half curl of chi(|x|/ell) T(x) v, evaluated at relative position x.
void add_translation(const Vec3& x, const Vec3& v, double ell, FieldSample& out) {
  const double rho = x.norm();
  const Radial r = radial(rho, ell);
  if (r.outside) return;
  if (r.plateau) {
    out.value += v;
    return;
  }
  const double xv = x.dot(v);
  out.value += r.a * v + r.b * xv * x;
  const Vec3 xhat = x / rho;
  out.jacobian += r.da * v * xhat.transpose() + r.db * xv * x * xhat.transpose() +
                  r.b * (xv * Mat3::Identity() + x * v.transpose());
}

/// curl of -chi(|x|/ell) |x|^2/2 w, i.e. A(rho) (w x x).
void add_rotation(const Vec3& x, const Vec3& w, double ell, FieldSample& out) {
  const double rho = x.norm();
  const Radial r = radial(rho, ell);
  if (r.outside) return;
  const Vec3 wx = w.cross(x);
  out.value += r.a * wx;
  out.jacobian += r.a * cross_matrix(w);
  if (!r.plateau) out.jacobian += r.da * wx * (x / rho).transpose();
}

/// Uniform hash over centers; candidate lookup for point queries.
class CenterIndex {
 public:
  CenterIndex(const std::vector<Vec3>& centers, double cell) : centers_(centers), cell_(cell) {
    for (std::size_t n = 0; n < centers_.size(); ++n) buckets_[key(cell_of(centers_[n]))].push_back(n);
  }

  template <class F>
  void for_each_within(const Vec3& x, double radius, F&& fn) const {
    const auto c = cell_of(x);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    for (int dk = -reach; dk <= reach; ++dk) {
      for (int dj = -reach; dj <= reach; ++dj) {
        for (int di = -reach; di <= reach; ++di) {
          auto it = buckets_.find(key({c[0] + di, c[1] + dj, c[2] + dk}));
          if (it == buckets_.end()) continue;
          for (std::size_t n : it->second) {
            if ((x - centers_[n]).squaredNorm() < radius * radius) fn(n);
          }
        }
      }
    }
  }

 private:
  std::array<long long, 3> cell_of(const Vec3& x) const {
    return {static_cast<long long>(std::floor(x[0] / cell_)), static_cast<long long>(std::floor(x[1] / cell_)),
            static_cast<long long>(std::floor(x[2] / cell_))};
  }
  static long long key(std::array<long long, 3> c) {
    return (c[0] & 0x1fffff) | ((c[1] & 0x1fffff) << 21) | ((c[2] & 0x1fffff) << 42);
  }

  std::vector<Vec3> centers_;
  double cell_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

double frobenius_sup_unit() {
  // Jacobian of the unit translational profile depends on rho and the angle between x and v.
  double best = 0.0;
  const Vec3 v(1.0, 0.0, 0.0);
  for (int i = 0; i <= 400; ++i) {
    const double rho = 0.5 + 0.25 * i / 400.0;
    for (int k = 0; k <= 90; ++k) {
      const double th = kPi * k / 90.0;
      FieldSample s;
      add_translation(Vec3(rho * std::cos(th), rho * std::sin(th), 0.0), v, 1.0, s);
      best = std::max(best, s.jacobian.norm());
    }
  }
  return best;
}

}  // namespace

double unit_transport_jacobian_sup() {
  static const double value = frobenius_sup_unit();
  return value;
}

AnalyticField::AnalyticField() = default;

AnalyticField::AnalyticField(Evaluator eval, std::vector<Ball> support, double length_scale, JacobianBound bound)
    : eval_(std::move(eval)), support_(std::move(support)), length_scale_(length_scale), bound_(std::move(bound)) {}

FieldSample AnalyticField::sample(double t, const Vec3& x) const {
  if (!eval_) return {};
  return eval_(t, x);
}

Hessian AnalyticField::hessian(double t, const Vec3& x) const {
  Hessian h;
  for (auto& m : h) m.setZero();
  if (!eval_) return h;
  const double d = 1e-4 * length_scale_;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = d;
    const Mat3 diff = (eval_(t, x + e).jacobian - eval_(t, x - e).jacobian) / (2.0 * d);
    for (int i = 0; i < 3; ++i) h[i].col(k) = diff.row(i).transpose();
  }
  for (auto& m : h) m = 0.5 * (m + m.transpose()).eval();
  return h;
}

double AnalyticField::jacobian_bound(double t) const {
  if (!eval_) return 0.0;
  if (bound_) return bound_(t);
  return 0.0;
}

VelocitySchedule constant_velocities(std::vector<Vec3> velocities) {
  auto shared = std::make_shared<const std::vector<Vec3>>(std::move(velocities));
  return [shared](std::size_t n, double) { return (*shared)[n]; };
}

namespace {

void require_3d(const ParticleConfiguration& cfg) {
  if (cfg.domain.dim != 3) throw Error(ErrorCode::kUnsupportedDimension, "curl fields are three-dimensional");
}

void check_supports(const std::vector<Vec3>& centers, double min_separation) {
  CenterIndex index(centers, min_separation);
  for (std::size_t n = 0; n < centers.size(); ++n) {
    index.for_each_within(centers[n], min_separation, [&](std::size_t m) {
      if (m != n) {
        throw Error(ErrorCode::kOverlappingSupports, "centers " + std::to_string(n) + " and " +
                                                         std::to_string(m) + " are closer than " +
                                                         std::to_string(min_separation));
      }
    });
  }
}

}  // namespace

AnalyticField lambda_field(const ParticleConfiguration& cfg, VelocitySchedule translations) {
  require_3d(cfg);
  const double eps = cfg.regime.eps;
  check_supports(cfg.centers, 1.5 * eps);
  if (cfg.centers.empty()) return {};

  std::vector<Ball> support;
  for (const auto& c : cfg.centers) support.push_back({c, 0.75 * eps});
  auto index = std::make_shared<const CenterIndex>(cfg.centers, 1.5 * eps);
  auto centers = std::make_shared<const std::vector<Vec3>>(cfg.centers);

  AnalyticField::Evaluator eval = [index, centers, translations, eps](double t, const Vec3& x) {
    FieldSample s;
    index->for_each_within(x, 0.75 * eps, [&](std::size_t n) {
      add_translation(x - (*centers)[n], translations(n, t), eps, s);
    });
    return s;
  };
  const double k_unit = unit_transport_jacobian_sup();
  AnalyticField::JacobianBound bound = [centers, translations, eps, k_unit](double t) {
    double vmax = 0.0;
    for (std::size_t n = 0; n < centers->size(); ++n) vmax = std::max(vmax, translations(n, t).norm());
    return k_unit * vmax / eps;
  };
  return AnalyticField(std::move(eval), std::move(support), eps, std::move(bound));
}

AnalyticField rigid_extension(const ParticleConfiguration& cfg, const std::vector<RigidMotion>& motions) {
  require_3d(cfg);
  if (motions.size() != cfg.centers.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one rigid motion per particle is required");
  }
  bool all_zero = true;
  for (const auto& m : motions) all_zero = all_zero && m.translation.isZero(0.0) && m.angular.isZero(0.0);
  if (all_zero) return {};

  const double ell = 0.5 * cfg.radius;
  std::vector<Vec3> centers;
  std::vector<Ball> support;
  for (const auto& m : motions) {
    centers.push_back(m.center);
    support.push_back({m.center, 0.75 * ell});
  }
  check_supports(centers, 1.5 * ell);
  auto index = std::make_shared<const CenterIndex>(centers, std::max(1.5 * ell, 1e-12));
  auto shared = std::make_shared<const std::vector<RigidMotion>>(motions);
  AnalyticField::Evaluator eval = [index, shared, ell](double, const Vec3& x) {
    FieldSample s;
    index->for_each_within(x, 0.75 * ell, [&](std::size_t n) {
      const RigidMotion& m = (*shared)[n];
      const Vec3 rel = x - m.center;
      add_translation(rel, m.translation, ell, s);
      add_rotation(rel, m.angular, ell, s);
    });
    return s;
  };
  return AnalyticField(std::move(eval), std::move(support), ell);
}

AnalyticField probe_field(ProbeKind kind, double r, const Vec3& z) {
  if (!(r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "probe radius must be positive");
  const double ell = 0.5 * r;
  AnalyticField::Evaluator eval;
  if (kind == ProbeKind::kTranslation) {
    eval = [z, ell](double, const Vec3& x) {
      FieldSample s;
      add_translation(x, z, ell, s);
      return s;
    };
  } else {
    eval = [z, ell](double, const Vec3& x) {
      FieldSample s;
      add_rotation(x, z, ell, s);
      return s;
    };
  }
  return AnalyticField(std::move(eval), {Ball{Vec3::Zero(), 0.75 * ell}}, ell);
}

namespace {

constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                            0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                              0.4786286704993665, 0.2369268850561891};

void integrate_box(const AnalyticField& f, double t, const Vec3& lo, const Vec3& hi, int level,
                   const Ball* owner, double& l2, double& h1) {
  const Vec3 step = (hi - lo) / level;
  for (int c = 0; c < level; ++c) {
    for (int b = 0; b < level; ++b) {
      for (int a = 0; a < level; ++a) {
        const Vec3 sub_lo = lo + Vec3(a * step[0], b * step[1], c * step[2]);
        const Vec3 half = 0.5 * step;
        const Vec3 mid = sub_lo + half;
        const double jac = half[0] * half[1] * half[2];
        for (int k = 0; k < 5; ++k) {
          for (int j = 0; j < 5; ++j) {
            for (int i = 0; i < 5; ++i) {
              const Vec3 x = mid + Vec3(kGaussNodes[i] * half[0], kGaussNodes[j] * half[1],
                                        kGaussNodes[k] * half[2]);
              if (owner && (x - owner->center).squaredNorm() > owner->radius * owner->radius) continue;
              const double w = kGaussWeights[i] * kGaussWeights[j] * kGaussWeights[k] * jac;
              const FieldSample s = f.sample(t, x);
              l2 += w * s.value.squaredNorm();
              h1 += w * s.jacobian.squaredNorm();
            }
          }
        }
      }
    }
  }
}

}  // namespace

FieldNorms analytic_norms(const AnalyticField& field, const DomainBox& region, int level, double t) {
  if (level < 1) throw Error(ErrorCode::kInvalidArgument, "quadrature level must be >= 1");
  if (region.dim != 3) throw Error(ErrorCode::kUnsupportedDimension, "analytic norms are three-dimensional");
  FieldNorms out;
  if (field.is_zero()) return out;
  double l2 = 0.0;
  double h1 = 0.0;
  if (field.support().empty()) {
    integrate_box(field, t, region.lo, region.hi, level, nullptr, l2, h1);
  } else {
    for (const Ball& ball : field.support()) {
      Vec3 lo = (ball.center.array() - ball.radius).max(region.lo.array());
      Vec3 hi = (ball.center.array() + ball.radius).min(region.hi.array());
      if ((hi.array() <= lo.array()).any()) continue;
      integrate_box(field, t, lo, hi, level, &ball, l2, h1);
    }
  }
  out.l2 = std::sqrt(l2);
  out.h1_semi = std::sqrt(h1);
  return out;
}

}  // namespace pfrs
