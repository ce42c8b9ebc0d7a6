// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include "pfrs/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace pfrs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return v.size() >= 2;
}

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

// 1. Single-sphere drag against 6 pi r |U|.
Outcome drag_anchor() {
  const DragAnchorConfig cfg;
  const auto g = StaggeredGrid::over(DomainBox::unit(3), cfg.grid_n);
  const auto d = sphere_drag(cfg.radius, Vec3::UnitX(), g, {}, cfg.eta_factor * g.h() * g.h());
  const bool box_ok = 1.0 >= 10.0 * cfg.radius;
  return {box_ok && d.ratio >= cfg.lo && d.ratio <= cfg.hi,
          "ratio " + fmt(d.ratio) + " in [" + fmt(cfg.lo) + ", " + fmt(cfg.hi) + "], r " + fmt(cfg.radius) +
              ", grid " + std::to_string(cfg.grid_n) + ", wall factor " + fmt(d.wall_factor) +
              ", wall-corrected " + fmt(d.wall_corrected_ratio)};
}

// 2. Stationary perforated Stokes vs Brinkman.
Outcome stokes_trend() {
  const auto rows = stokes_convergence_study(default_stokes_study());
  std::vector<double> l2;
  std::array<std::vector<double>, 3> pair;
  bool ok = rows.size() == 3;
  for (const auto& r : rows) {
    ok = ok && r.status == "ok";
    l2.push_back(r.l2_gap);
    for (int k = 0; k < 3; ++k) pair[k].push_back(r.pairing_gaps[k]);
  }
  ok = ok && strictly_decreasing(l2);
  for (const auto& p : pair) ok = ok && strictly_decreasing(p);
  return {ok, "l2 " + join(l2) + "; pairings " + join(pair[0]) + " | " + join(pair[1]) + " | " + join(pair[2])};
}

// 3. Flow-map derivative bounds and volume preservation.
Outcome flowmap_bounds() {
  const auto reps = flowmap_check(FlowmapCheckConfig{});
  std::vector<double> ratio, second, det;
  for (const auto& r : reps) {
    ratio.push_back(r.v6b / r.eps);
    second.push_back(r.v6d);
    det.push_back(r.det);
  }
  bool ok = reps.size() == 3 && strictly_decreasing(second);
  for (std::size_t i = 1; i < ratio.size(); ++i) {
    const double q = ratio[i] / ratio[i - 1];
    ok = ok && q >= 0.5 && q <= 2.0;
  }
  for (double d : det) ok = ok && d < 1e-8;
  return {ok, "sup|DX-I|/eps " + join(ratio) + "; sup|D2X| " + join(second) + "; det err " + join(det)};
}

// 4. Remainder integrals.
Outcome remainder_smallness() {
  const auto id = remainder_identity(RemainderCheckConfig{}.grid_n, 0.2);
  bool zero = true;
  for (double t : id.terms) zero = zero && t == 0.0;
  std::vector<double> total;
  for (const auto& r : remainder_check(RemainderCheckConfig{})) total.push_back(std::abs(r.terms.total()));
  return {zero && strictly_decreasing(total),
          std::string("identity ") + (zero ? "exact zeros" : "NONZERO") + "; |total| " + join(total)};
}

// 5. Rigid extension and probe norm scalings.
Outcome extension_probe() {
  ScalingRegime reg;
  reg.eps = 0.125;
  auto cfg = generate_configuration(DomainBox::unit(3), reg, PlacementMode::kLattice, 7);
  std::vector<double> ext;
  for (double r : {0.05, 0.025, 0.0125}) {
    cfg.radius = r;
    std::vector<RigidMotion> motions;
    double sup = 0.0;
    for (std::size_t n = 0; n < cfg.count(); ++n) {
      RigidMotion m;
      m.center = cfg.centers[n];
      m.translation = Vec3(1.0, 0.5 * n / cfg.count(), -0.3);
      m.angular = Vec3(0.2, 0.4, 0.1 * n) * (0.5 / r);
      sup = std::max(sup, m.translation.norm() + r * m.angular.norm());
      motions.push_back(m);
    }
    const double grad = analytic_norms(rigid_extension(cfg, motions), DomainBox::unit(3), 4).h1_semi;
    ext.push_back(grad / (std::sqrt(cfg.count() * r) * sup));
  }
  std::vector<double> pg, pl;
  for (double r : {0.1, 0.05, 0.025}) {
    const Vec3 z(0.0, 1.0, 0.0);
    DomainBox box;
    box.lo = Vec3::Constant(-r);
    box.hi = Vec3::Constant(r);
    const auto n = analytic_norms(probe_field(ProbeKind::kTranslation, r, z), box, 4);
    pg.push_back(n.h1_semi / std::sqrt(r));
    pl.push_back(n.l2 / std::pow(r, 1.5));
  }
  const bool ok = spread(ext) <= 1.15 && spread(pg) <= 1.10 && spread(pl) <= 1.10;
  return {ok, "N " + std::to_string(cfg.count()) + ", |grad w|/(sqrt(Nr) sup) " + join(ext) + "; |grad Psi|/r^0.5 " +
                  join(pg) + "; |Psi|/r^1.5 " + join(pl)};
}

DiscreteField vortex2d(const StaggeredGrid& g, double amp) {
  return project_div_free(sample_field(g, [amp](const Vec3& x) -> Vec3 {
    const double sx = std::sin(kPi * x[0]), sy = std::sin(kPi * x[1]);
    return amp * Vec3(sx * sx * std::sin(2 * kPi * x[1]), -std::sin(2 * kPi * x[0]) * sy * sy, 0.0);
  }));
}

// 6. Discrete energy inequality on unforced runs, plus a negative control.
Outcome energy() {
  std::vector<std::string> parts;
  bool ok = true;
  auto audit = [&](const std::string& name, const EnergyLedger& l) {
    const auto a = energy_audit(l, 1e-3);
    ok = ok && a.ok;
    parts.push_back(name + (a.ok ? " ok" : " VIOLATED") + " (excess " + fmt(a.worst_excess) + ")");
  };

  const auto g = StaggeredGrid::over(DomainBox::unit(2), 64);
  const FaceArrays f = zero_faces(g);
  const double dt = 0.005;
  const int steps = 40;

  ParticleConfiguration none;
  none.regime.dim = 2;
  none.domain = DomainBox::unit(2);
  {
    auto s = DynamicState::at_rest(g, none);
    s.field = vortex2d(g, 1.0);
    FlowStepper st(g);
    EnergyLedger l;
    for (int k = 0; k < steps; ++k) st.step_penalized(s, dt, MotionMode::kPrescribed, f, {}, &l);
    audit("vortex", l);
  }

  ScalingRegime reg;
  reg.dim = 2;
  reg.eps = 0.2;
  reg.c2d = 0.0155;
  reg.radius_prefactor = 0.118;
  const auto pc = generate_configuration(DomainBox::unit(2), reg, PlacementMode::kLattice, 7);
  StepOptions opts;
  opts.min_cells = 1.0;
  EnergyLedger prescribed;
  {
    auto s = DynamicState::at_rest(g, pc);
    s.field = vortex2d(g, 1.0);
    FlowStepper st(g, opts);
    const VelocitySchedule v = [](std::size_t n, double) { return Vec3(0.04, n % 2 ? 0.02 : -0.02, 0.0); };
    for (int k = 0; k < steps; ++k) st.step_penalized(s, dt, MotionMode::kPrescribed, f, v, &prescribed);
    audit("prescribed", prescribed);
  }
  {
    auto s = DynamicState::at_rest(g, pc);
    s.field = vortex2d(g, 1.0);
    std::vector<double> friction(g.cell_count(), 50.0);
    FlowStepper st(g);
    EnergyLedger l;
    for (int k = 0; k < steps; ++k) st.step_brinkman(s, dt, friction, f, &l);
    audit("brinkman", l);
  }
  {
    HeavyRunConfig hc;
    hc.grid_n = 32;
    hc.T = 0.1;
    const auto res = heavy_particle_run(hc);
    audit("coupled", res.ledger);
  }

  // Negative control: forced spin-up with the forcing work dropped from the ledger.
  {
    auto s = DynamicState::at_rest(g, none);
    const FaceArrays swirl = sample_field(g, [](const Vec3& x) -> Vec3 {
                               return forcing_value(ForcingPreset::kSwirl, x, 2);
                             }).u;
    FlowStepper st(g);
    EnergyLedger l;
    for (int k = 0; k < 10; ++k) st.step_penalized(s, dt, MotionMode::kPrescribed, swirl, {}, &l);
    for (auto& e : l.entries) e.work = 0.0;
    const bool flagged = !energy_audit(l, 1e-3).ok;
    ok = ok && flagged;
    parts.push_back(std::string("negative control ") + (flagged ? "flagged" : "MISSED"));
  }

  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  return {ok, detail};
}

// 7. Heavy-particle drift over a mass sweep.
Outcome heavy_drift() {
  std::vector<double> constants, h1;
  for (double m : {1.0, 2.0, 4.0}) {
    HeavyRunConfig hc;
    hc.grid_n = 48;
    hc.mass = m;
    const auto res = heavy_particle_run(hc);
    constants.push_back(res.drift.at(0).constant);
    h1.push_back(res.drift.at(0).h1_indicator);
  }
  const double s = drift_spread(constants);
  return {s > 0.0 && s <= 1.5, "constants " + join(constants) + " (spread " + fmt(s) + "); H1 indicator " + join(h1)};
}

// 8. 2D penalized NS vs Brinkman NS.
Outcome dynamic_trend() {
  const auto rows = dynamic_convergence_study(default_dynamic_study());
  std::vector<double> gap;
  bool ok = rows.size() == 3;
  for (const auto& r : rows) {
    ok = ok && r.status == "ok" && r.energy_ok;
    gap.push_back(r.l2_gap);
  }
  ok = ok && strictly_decreasing(gap);
  return {ok, "space-time gap " + join(gap)};
}

std::string run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"pfrs"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  if (run(static_cast<int>(argv.size()), argv.data(), out, err) != 0) throw std::runtime_error(err.str());
  return out.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Determinism, discrete adjointness, projection idempotence, manufactured solution.
Outcome infrastructure() {
  std::vector<std::string> parts;
  bool ok = true;

  const auto base = std::filesystem::temp_directory_path() / "pfrs_acceptance_determinism";
  std::string csv[2];
  for (int i = 0; i < 2; ++i) {
    const auto dir = base / std::to_string(i);
    std::filesystem::remove_all(dir);
    run_cli({"stokes-study", "--eps", "0.25,0.167", "--grid", "24", "--seed", "7", "--min-cells", "0.5", "--out",
             dir.string(), "--formats", "csv,json"});
    csv[i] = slurp(dir / "stokes_study.csv");
  }
  std::filesystem::remove_all(base);
  const bool same = !csv[0].empty() && csv[0] == csv[1];
  ok = ok && same;
  parts.push_back(std::string("csv ") + (same ? "byte-identical" : "DIFFERS"));

  const auto g = StaggeredGrid::over(DomainBox::unit(3), 24);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n;
  FaceArrays u = zero_faces(g);
  for_each_face(g, [&](int d, int i, int j, int k, std::size_t idx) {
    if (!is_wall_face(g, d, i, j, k)) u[d][idx] = n(rng);
  });
  std::vector<double> p(g.cell_count());
  for (double& x : p) x = n(rng);
  const auto div = divergence(g, u);
  double lhs = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) lhs += div[c] * p[c];
  const double rhs = -dot(u, gradient(g, p));
  const double adj = std::abs(lhs - rhs) / std::abs(lhs);
  ok = ok && adj < 1e-12;
  parts.push_back("adjointness rel " + fmt(adj));

  DiscreteField f = DiscreteField::zeros(g);
  f.u = u;
  const auto p1 = project_div_free(f);
  const auto p2 = project_div_free(p1);
  FaceArrays diff = p2.u;
  axpy(-1.0, p1.u, diff);
  const double idem = l2_norm(g, diff) / l2_norm(g, p1.u);
  ok = ok && idem < 1e-10;
  parts.push_back("idempotence rel " + fmt(idem));

  std::vector<double> err;
  for (int m : {16, 32, 64}) {
    const double h = 1.0 / m;
    err.push_back(mms_run(m, 2.0 * h * h, 0.1).l2_error);
  }
  const double o1 = std::log2(err[0] / err[1]);
  const double o2 = std::log2(err[1] / err[2]);
  ok = ok && o1 > 1.8 && o2 > 1.8;
  parts.push_back("mms errors " + join(err) + " orders " + fmt(o1) + " " + fmt(o2));

  std::string detail;
  for (const auto& s : parts) detail += (detail.empty() ? "" : "; ") + s;
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pfrs acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"drag anchor", drag_anchor},
      {"stationary homogenization trend", stokes_trend},
      {"flow-map bounds", flowmap_bounds},
      {"remainder smallness", remainder_smallness},
      {"extension/probe scalings", extension_probe},
      {"energy inequality", energy},
      {"heavy-particle drift", heavy_drift},
      {"dynamic homogenization trend", dynamic_trend},
      {"infrastructure", infrastructure},
  };
  const std::set<int> selected(only.begin(), only.end());

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt(secs) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
