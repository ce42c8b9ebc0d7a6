#pragma once

#include "pfrs/common.hpp"
#include "pfrs/config.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace pfrs {

struct CutoffValue {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// C-infinity cut-off: 1 on [0, 1/2), 0 on (3/4, inf), logistic-exponential blend between.
CutoffValue cutoff_eval(double z);

/// T(x) z = z x x (cross product). Skew-symmetric.
Mat3 tmatrix(const Vec3& x);

/// [w]_x with [w]_x v = w x v.
Mat3 cross_matrix(const Vec3& w);

struct RigidMotion {
  Vec3 center = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  Vec3 velocity_at(const Vec3& x) const { return translation + angular.cross(x - center); }
};

/// jacobian(i, j) = dF_i / dx_j
struct FieldSample {
  Vec3 value = Vec3::Zero();
  Mat3 jacobian = Mat3::Zero();
};

struct Ball {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Immutable, cheap to copy, safe for concurrent queries.
class AnalyticField {
 public:
  using Evaluator = std::function<FieldSample(double t, const Vec3& x)>;
  /// Estimate of sup_x ||DF(t, x)||_F at time t.
  using JacobianBound = std::function<double(double t)>;

  AnalyticField();
  AnalyticField(Evaluator eval, std::vector<Ball> support, double length_scale, JacobianBound bound = {});

  FieldSample sample(double t, const Vec3& x) const;
  Vec3 value(double t, const Vec3& x) const { return sample(t, x).value; }
  /// Central differences of the analytic Jacobian, step 1e-4 * length_scale.
  Hessian hessian(double t, const Vec3& x) const;

  /// Field vanishes outside the union of these balls. Empty with !is_zero() means unbounded support.
  const std::vector<Ball>& support() const { return support_; }
  bool is_zero() const { return !eval_; }
  double length_scale() const { return length_scale_; }
  double jacobian_bound(double t) const;

 private:
  Evaluator eval_;
  std::vector<Ball> support_;
  double length_scale_ = 1.0;
  JacobianBound bound_;
};

/// Per-particle translational velocity h'_n(t).
using VelocitySchedule = std::function<Vec3(std::size_t n, double t)>;

VelocitySchedule constant_velocities(std::vector<Vec3> velocities);

/// Transport field: curl(chi(|x - h_n(0)| / eps) T(x - h_n(0)) h'_n(t)) / 2 summed over particles.
AnalyticField lambda_field(const ParticleConfiguration& cfg, VelocitySchedule translations);

/// Rigid extension with plateau radius r/4 and support radius 3r/8 around each motion.center.
AnalyticField rigid_extension(const ParticleConfiguration& cfg, const std::vector<RigidMotion>& motions);

enum class ProbeKind { kTranslation, kRotation };

/// Probe centred at the origin. Translation plateau value z, rotation plateau value z x x.
AnalyticField probe_field(ProbeKind kind, double r, const Vec3& z);

/// Sup over |x| of the Frobenius norm of the unit-scale translational Jacobian for |v| = 1.
double unit_transport_jacobian_sup();

struct FieldNorms {
  double l2 = 0.0;
  double h1_semi = 0.0;
};

/// Composite Gauss-Legendre (5 points per axis) on `level`^3 sub-boxes per support box.
FieldNorms analytic_norms(const AnalyticField& field, const DomainBox& region, int level, double t = 0.0);

}  // namespace pfrs
