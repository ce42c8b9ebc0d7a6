#include "pfrs/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pfrs {

namespace {

int active_axes(int dim) { return dim == 2 ? 2 : 3; }

double uniform01(std::mt19937_64& rng) {
  // Same bits on every platform, unlike std::uniform_real_distribution.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Vec3> lattice_centers(const DomainBox& box, double spacing, double margin) {
  const int axes = active_axes(box.dim);
  std::array<int, 3> k{1, 1, 1};
  std::array<double, 3> start{0.0, 0.0, 0.0};
  for (int a = 0; a < axes; ++a) {
    const double len = box.hi[a] - box.lo[a];
    const double room = len - 2.0 * margin;
    if (room < 0.0) {
      throw Error(ErrorCode::kNoAdmissiblePlacement,
                  "margin " + std::to_string(margin) + " does not fit in extent " + std::to_string(len));
    }
    k[a] = static_cast<int>(std::floor(room / spacing + 1e-9)) + 1;
    const double span = (k[a] - 1) * spacing;
    start[a] = box.lo[a] + 0.5 * (len - span);
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(k[0]) * k[1] * k[2]);
  for (int c = 0; c < k[2]; ++c) {
    for (int b = 0; b < k[1]; ++b) {
      for (int a = 0; a < k[0]; ++a) {
        Vec3 p(start[0] + a * spacing, start[1] + b * spacing, axes == 3 ? start[2] + c * spacing : 0.0);
        out.push_back(p);
      }
    }
  }
  return out;
}

std::vector<Vec3> random_centers(const DomainBox& box, double spacing, double margin, std::size_t target,
                                 std::size_t cap, std::uint64_t seed) {
  const int axes = active_axes(box.dim);
  for (int a = 0; a < axes; ++a) {
    if (box.hi[a] - box.lo[a] - 2.0 * margin < 0.0) {
      throw Error(ErrorCode::kNoAdmissiblePlacement, "margin does not fit in the box");
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<Vec3> out;
  out.reserve(target);
  std::size_t attempts = 0;
  while (out.size() < target) {
    if (attempts++ >= cap) {
      throw Error(ErrorCode::kSeedExhausted, "placed " + std::to_string(out.size()) + " of " +
                                                 std::to_string(target) + " after " + std::to_string(cap) +
                                                 " draws");
    }
    Vec3 p = Vec3::Zero();
    for (int a = 0; a < axes; ++a) {
      p[a] = box.lo[a] + margin + uniform01(rng) * (box.hi[a] - box.lo[a] - 2.0 * margin);
    }
    bool ok = true;
    for (const auto& q : out) {
      if ((p - q).norm() <= spacing) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(p);
  }
  return out;
}

}  // namespace

DomainBox DomainBox::unit(int dim) {
  DomainBox b;
  b.dim = dim;
  b.lo = Vec3::Zero();
  b.hi = dim == 2 ? Vec3(1.0, 1.0, 0.0) : Vec3::Ones();
  return b;
}

double DomainBox::volume() const {
  const Vec3 e = extent();
  return dim == 2 ? e[0] * e[1] : e[0] * e[1] * e[2];
}

double DomainBox::distance_to_boundary(const Vec3& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < active_axes(dim); ++a) d = std::min({d, x[a] - lo[a], hi[a] - x[a]});
  return d;
}

bool DomainBox::contains(const Vec3& x) const {
  for (int a = 0; a < active_axes(dim); ++a) {
    if (x[a] < lo[a] || x[a] > hi[a]) return false;
  }
  return true;
}

void DomainBox::check() const {
  if (dim != 2 && dim != 3) throw Error(ErrorCode::kUnsupportedDimension, "dim must be 2 or 3");
  for (int a = 0; a < active_axes(dim); ++a) {
    if (!(hi[a] > lo[a])) throw Error(ErrorCode::kInvalidArgument, "box upper corner must exceed lower corner");
  }
}

double ScalingRegime::radius() const {
  if (dim == 2) return radius_prefactor * std::exp(-c2d / (eps * eps));
  return radius_prefactor * std::pow(eps, alpha);
}

double ScalingRegime::solid_density() const { return rho_coefficient * std::pow(eps, rho_exponent); }

void ScalingRegime::check() const {
  if (dim != 2 && dim != 3) throw Error(ErrorCode::kUnsupportedDimension, "dim must be 2 or 3");
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  if (!(alpha >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be >= 1");
  if (!(c2d > 0.0)) throw Error(ErrorCode::kInvalidArgument, "c2d must be positive");
  if (!(radius_prefactor > 0.0)) throw Error(ErrorCode::kInvalidArgument, "radius prefactor must be positive");
}

ParticleConfiguration generate_configuration(const DomainBox& domain, const ScalingRegime& regime,
                                             PlacementMode mode, std::uint64_t seed, const PlacementRule& rule) {
  domain.check();
  regime.check();
  if (domain.dim != regime.dim) throw Error(ErrorCode::kInvalidArgument, "domain and regime dims differ");

  const double spacing = rule.spacing_factor * regime.eps;
  const double margin = rule.margin_factor * regime.eps;

  ParticleConfiguration cfg;
  cfg.regime = regime;
  cfg.domain = domain;
  cfg.radius = regime.radius();

  if (mode == PlacementMode::kLattice) {
    cfg.centers = lattice_centers(domain, spacing, margin);
  } else {
    std::size_t target = rule.target_count;
    if (target == 0) target = lattice_centers(domain, spacing, margin).size();
    cfg.centers = random_centers(domain, spacing, margin, target, rule.attempts_per_particle * target, seed);
  }
  return cfg;
}

bool ValidationReport::initial_ok() const {
  return count(Violation::Kind::kPairSeparation) == 0 && count(Violation::Kind::kBoundaryDistance) == 0 &&
         count(Violation::Kind::kRadius) == 0;
}

bool ValidationReport::runtime_ok() const {
  return count(Violation::Kind::kRuntimePairSeparation) == 0 &&
         count(Violation::Kind::kRuntimeBoundaryDistance) == 0;
}

std::size_t ValidationReport::count(Violation::Kind kind) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

namespace {

void check_separation(const std::vector<Vec3>& centers, const DomainBox& domain, double pair_min,
                      double wall_min, Violation::Kind pair_kind, Violation::Kind wall_kind,
                      std::vector<Violation>& out) {
  const std::size_t n = centers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double dw = domain.distance_to_boundary(centers[i]);
    if (!(dw > wall_min)) out.push_back({wall_kind, i, i, dw, wall_min});
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (centers[i] - centers[j]).norm();
      if (!(d > pair_min)) out.push_back({pair_kind, i, j, d, pair_min});
    }
  }
}

}  // namespace

ValidationReport validate_configuration(const ParticleConfiguration& cfg) {
  ValidationReport rep;
  const double eps = cfg.regime.eps;
  check_separation(cfg.centers, cfg.domain, 2.0 * eps, eps, Violation::Kind::kPairSeparation,
                   Violation::Kind::kBoundaryDistance, rep.violations);
  check_separation(cfg.centers, cfg.domain, eps, 0.5 * eps, Violation::Kind::kRuntimePairSeparation,
                   Violation::Kind::kRuntimeBoundaryDistance, rep.violations);
  const double expected = cfg.regime.radius();
  if (std::abs(cfg.radius - expected) > 1e-12 * std::max(1.0, expected)) {
    rep.violations.push_back({Violation::Kind::kRadius, 0, 0, cfg.radius, expected});
  }
  return rep;
}

ValidationReport check_runtime_separation(const std::vector<Vec3>& centers, const DomainBox& domain, double eps) {
  ValidationReport rep;
  check_separation(centers, domain, eps, 0.5 * eps, Violation::Kind::kRuntimePairSeparation,
                   Violation::Kind::kRuntimeBoundaryDistance, rep.violations);
  return rep;
}

double DensityField::cell_volume() const { return dim == 2 ? cell * cell : cell * cell * cell; }

double DensityField::total_mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * cell_volume();
}

double DensityField::max_value() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

DensityField empirical_density(const ParticleConfiguration& cfg, double cell_size) {
  return empirical_density(cfg, cell_size, cfg.domain.lo);
}

DensityField empirical_density(const ParticleConfiguration& cfg, double cell_size, const Vec3& origin) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "cell size must be positive");
  DensityField d;
  d.dim = cfg.domain.dim;
  d.cell = cell_size;
  d.origin = origin;
  const int axes = active_axes(d.dim);
  for (int a = 0; a < axes; ++a) {
    d.n[a] = std::max(1, static_cast<int>(std::ceil((cfg.domain.hi[a] - origin[a]) / cell_size - 1e-9)));
  }
  d.values.assign(static_cast<std::size_t>(d.n[0]) * d.n[1] * d.n[2], 0.0);
  const double weight = std::pow(cfg.regime.eps, d.dim) / d.cell_volume();
  for (const auto& c : cfg.centers) {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < axes; ++a) {
      idx[a] = std::clamp(static_cast<int>(std::floor((c[a] - d.origin[a]) / cell_size)), 0, d.n[a] - 1);
    }
    d.values[d.index(idx[0], idx[1], idx[2])] += weight;
  }
  return d;
}

Vec3 lattice_density_origin(const ParticleConfiguration& cfg, double cell_size) {
  Vec3 o = cfg.domain.lo;
  if (cfg.centers.empty()) return o;
  for (int a = 0; a < active_axes(cfg.domain.dim); ++a) {
    double m = cfg.centers.front()[a];
    for (const auto& c : cfg.centers) m = std::min(m, c[a]);
    o[a] = m - 0.5 * cell_size;
  }
  return o;
}

DensityField resample_density(const DensityField& src, const Vec3& lo, std::array<int, 3> n, double h) {
  const int axes = active_axes(src.dim);
  // Per-axis overlap lengths between target cells and source cells.
  std::array<std::vector<std::vector<std::pair<int, double>>>, 3> overlap;
  for (int a = 0; a < 3; ++a) {
    overlap[a].resize(n[a]);
    if (a >= axes) {
      overlap[a][0].push_back({0, 1.0});
      continue;
    }
    for (int t = 0; t < n[a]; ++t) {
      const double t0 = lo[a] + t * h;
      const double t1 = t0 + h;
      const int s_first = std::max(0, static_cast<int>(std::floor((t0 - src.origin[a]) / src.cell)));
      const int s_last = std::min(src.n[a] - 1, static_cast<int>(std::floor((t1 - src.origin[a]) / src.cell)));
      for (int s = s_first; s <= s_last; ++s) {
        const double s0 = src.origin[a] + s * src.cell;
        const double len = std::min(t1, s0 + src.cell) - std::max(t0, s0);
        if (len > 0.0) overlap[a][t].push_back({s, len / h});
      }
    }
  }
  DensityField out;
  out.dim = src.dim;
  out.n = n;
  out.cell = h;
  out.origin = lo;
  out.values.assign(static_cast<std::size_t>(n[0]) * n[1] * n[2], 0.0);
  for (int k = 0; k < n[2]; ++k) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) {
        double acc = 0.0;
        for (auto [sk, wk] : overlap[2][k]) {
          for (auto [sj, wj] : overlap[1][j]) {
            for (auto [si, wi] : overlap[0][i]) acc += wi * wj * wk * src.values[src.index(si, sj, sk)];
          }
        }
        out.values[out.index(i, j, k)] = acc;
      }
    }
  }
  return out;
}

double density_distance(const DensityField& a, const DensityField& b) {
  if (a.dim != b.dim) throw Error(ErrorCode::kShapeMismatch, "density dims differ");
  const double h = std::max(a.cell, b.cell);
  std::array<int, 3> n{1, 1, 1};
  for (int ax = 0; ax < active_axes(a.dim); ++ax) {
    n[ax] = std::max(1, static_cast<int>(std::floor(a.n[ax] * a.cell / h + 1e-9)));
  }
  const auto ra = resample_density(a, a.origin, n, h);
  const auto rb = resample_density(b, a.origin, n, h);
  double d = 0.0;
  for (std::size_t i = 0; i < ra.values.size(); ++i) d = std::max(d, std::abs(ra.values[i] - rb.values[i]));
  return d;
}

HeavyRegimeReport heavy_particle_params(const ScalingRegime& regime) {
  if (regime.dim != 3) throw Error(ErrorCode::kUnsupportedDimension, "heavy particle regime is three-dimensional");
  regime.check();
  HeavyRegimeReport rep;
  const double r = regime.radius();
  const double eps = regime.eps;
  rep.params.radius = r;
  rep.params.rho_s = regime.solid_density();
  rep.params.mass = rep.params.rho_s * r * r * r;
  rep.params.inertia = 0.4 * rep.params.mass * r * r;
  rep.heavy_indicator = rep.params.rho_s * std::pow(eps, 9.5);
  rep.degenerate_mass = !(rep.params.mass > 0.0);
  if (rep.degenerate_mass) {
    rep.angular_bound = std::numeric_limits<double>::infinity();
    rep.h1_indicator = std::numeric_limits<double>::infinity();
  } else {
    rep.angular_bound = 1.0 / std::sqrt(rep.params.rho_s * std::pow(eps, 9.0));
    rep.h1_indicator = std::sqrt(r) / (eps * rep.params.mass);
  }
  return rep;
}

std::string to_json_string(const ParticleConfiguration& cfg, int indent) {
  using nlohmann::json;
  const int axes = active_axes(cfg.domain.dim);
  auto vec = [axes](const Vec3& v) {
    json a = json::array();
    for (int i = 0; i < axes; ++i) a.push_back(v[i]);
    return a;
  };
  json j;
  j["dim"] = cfg.domain.dim;
  j["eps"] = cfg.regime.eps;
  j["alpha"] = cfg.regime.alpha;
  j["c2d"] = cfg.regime.c2d;
  j["radius_prefactor"] = cfg.regime.radius_prefactor;
  j["rho_exponent"] = cfg.regime.rho_exponent;
  j["rho_coefficient"] = cfg.regime.rho_coefficient;
  j["radius"] = cfg.radius;
  j["domain"] = {{"lo", vec(cfg.domain.lo)}, {"hi", vec(cfg.domain.hi)}};
  json centers = json::array();
  for (const auto& c : cfg.centers) centers.push_back(vec(c));
  j["centers"] = centers;
  return j.dump(indent);
}

ParticleConfiguration configuration_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("configuration json: ") + e.what());
  }
  auto vec = [](const json& a) {
    Vec3 v = Vec3::Zero();
    for (std::size_t i = 0; i < a.size() && i < 3; ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
  };
  try {
    ParticleConfiguration cfg;
    cfg.regime.dim = j.at("dim").get<int>();
    cfg.regime.eps = j.at("eps").get<double>();
    cfg.regime.alpha = j.value("alpha", 3.0);
    cfg.regime.c2d = j.value("c2d", 1.0);
    cfg.regime.radius_prefactor = j.value("radius_prefactor", 1.0);
    cfg.regime.rho_exponent = j.value("rho_exponent", -10.0);
    cfg.regime.rho_coefficient = j.value("rho_coefficient", 1.0);
    cfg.radius = j.at("radius").get<double>();
    cfg.domain.dim = cfg.regime.dim;
    cfg.domain.lo = vec(j.at("domain").at("lo"));
    cfg.domain.hi = vec(j.at("domain").at("hi"));
    for (const auto& c : j.at("centers")) cfg.centers.push_back(vec(c));
    cfg.domain.check();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("configuration json: ") + e.what());
  }
}

}  // namespace pfrs
