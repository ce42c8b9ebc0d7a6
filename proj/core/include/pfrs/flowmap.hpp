#pragma once

#include "pfrs/fields.hpp"
#include "pfrs/grid.hpp"

#include <string>
#include <vector>

namespace pfrs {

/// d2x[i](a, b) = d^2 X_i / dy_a dy_b
struct PointMap {
  Vec3 x = Vec3::Zero();
  Mat3 dx = Mat3::Identity();
  Hessian d2x{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

/// Write-once record of marker trajectories. Index [time][marker].
struct FlowMapState {
  AnalyticField lambda;
  double t0 = 0.0;
  double dt = 0.0;
  int record_every = 1;
  bool second_derivatives = false;
  std::vector<double> times;
  std::vector<Vec3> markers;
  std::vector<std::vector<Vec3>> x;
  std::vector<std::vector<Mat3>> dx;
  std::vector<std::vector<Hessian>> d2x;
  std::vector<std::vector<double>> det;

  /// Re-integrates a single point from t0 to t with the same step sequence.
  PointMap map_point(double t, const Vec3& y, bool second = false) const;
  std::size_t time_index(double t) const;
};

struct FlowOptions {
  bool second_derivatives = false;
  /// Keep every n-th step (the final time is always kept).
  int record_every = 1;
};

/// RK4 for X, D_yX and optionally D^2_yX. Throws StepTooLarge if dt * sup|D lambda| > 1.
FlowMapState integrate_flow(const AnalyticField& lambda, const std::vector<Vec3>& markers, double t0, double t1,
                            double dt, const FlowOptions& opts = {});

struct InverseMapEntry {
  Vec3 y = Vec3::Zero();
  Mat3 dy = Mat3::Identity();
  double residual = 0.0;
  int iterations = 0;
};

/// Y(t, x): backward RK4 for the initial guess, then damped Newton on X(t, y) = x.
InverseMapEntry invert_flow(const FlowMapState& state, double t, const Vec3& x, double tol = 1e-12,
                            int max_iter = 50);

struct BoundReport {
  double eps = 0.0;
  double v6b = 0.0;  // sup |D_yX - I|
  double v6d = 0.0;  // sup |D^2_yX|
  double v8 = 0.0;   // sup |D_xY - I|
  double v13 = 0.0;  // sup |D^2_xY|
  double v14 = 0.0;  // sup |d_t D_yX|
  double v15 = 0.0;  // sup |d_t D_xY|
  double det = 0.0;  // sup |det D_yX - 1|
  bool has_second = false;

  std::string to_json() const;
};

/// Suprema over recorded times and markers; inverse quantities are taken at x = X(t, y).
BoundReport flow_bound_report(const FlowMapState& state, double eps);

/// D^2_xY at x = X(t, y) from D_yX and D^2_yX: d2y[i](c, d).
Hessian inverse_second_derivative(const Mat3& dx, const Hessian& d2x);

enum class MapDirection { kForward, kInverse };

/// Forward: f~(t, y) = f(t, X(t, y)).  Inverse: f(t, x) = f~(t, Y(t, x)).
AnalyticField transform_field(const AnalyticField& f, const FlowMapState& state, MapDirection dir);
/// Same for a grid field at recorded time index `ti`, by trilinear sampling of each component.
DiscreteField transform_field(const DiscreteField& f, const FlowMapState& state, std::size_t ti, MapDirection dir);

/// Trilinear sample of the face field at x (no-slip mirror beyond the walls).
Vec3 interpolate_faces(const DiscreteField& f, const Vec3& x);

struct MollifiedSeries {
  std::vector<double> times;
  std::vector<std::vector<double>> values;
};

/// Unit-mass bump kernel theta_delta(s).
double mollifier(double s, double delta);
/// Riemann sum of theta_delta on a grid of step dt centred at 0.
double mollifier_mass(double delta, double dt);

/// [f]_delta(tau) = sum_k theta_delta(tau - t_k) f(t_k) dt on (t0 + delta, T - delta).
/// Samples must be uniformly spaced; weights are renormalized to sum to 1.
MollifiedSeries mollify_time(const std::vector<double>& times, const std::vector<std::vector<double>>& samples,
                             double delta);

struct RemainderTerms {
  std::array<double, 6> terms{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  double total() const;
};

/// Cell centres of `g` inside any support ball of `lambda`, with their cell indices.
std::vector<Vec3> support_cell_markers(const StaggeredGrid& g, const AnalyticField& lambda,
                                       std::vector<std::size_t>* cells);

/// Six remainder integrals at recorded time index `ti`. Markers of `state` must be the cell
/// centres listed in `cells`; every other cell has identity flow and contributes nothing.
/// With Q(a)_ij = sum_kl Y_i,kl a_k X_l,j (Y = D^2_xY at X, X = D_yX):
///   T1 = -int grad v : Q(X psi)          T4 = -int (X v) . (d_t X psi)
///   T2 = -int Q(u) : grad psi            T5 = -int u . (grad_y[X psi] d_tY)
///   T3 = +int Q(u) : Q(X psi)            T6 = +int (u x u) : Q(X psi)
RemainderTerms remainder_eval(const DiscreteField& u_tilde, const DiscreteField& v, const DiscreteField& psi,
                              const FlowMapState& state, std::size_t ti, const std::vector<std::size_t>& cells);

}  // namespace pfrs
