#include "pfrs/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef PFRS_VERSION
#define PFRS_VERSION "0.0.0"
#endif

namespace pfrs {

using nlohmann::json;

const char* version() { return PFRS_VERSION; }

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void StudyReport::sort_rows() {
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a][0] > rows[b][0]; });
  auto permute = [&](auto& v) {
    auto copy = v;
    for (std::size_t i = 0; i < order.size(); ++i) v[i] = copy[order[i]];
  };
  permute(rows);
  permute(status);
  permute(seconds);
}

bool StudyReport::all_ok() const {
  return std::all_of(status.begin(), status.end(), [](const std::string& s) { return s == "ok"; });
}

std::string StudyReport::to_json() const {
  json j;
  j["kind"] = kind;
  j["version"] = version;
  j["config_hash"] = config_hash;
  j["created"] = created;
  j["config"] = config.empty() ? json::object() : json::parse(config);
  j["columns"] = columns;
  j["gap_column"] = gap_column;
  json rs = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rs.push_back({{"values", rows[i]}, {"status", status[i]}, {"seconds", seconds[i]}});
  }
  j["rows"] = rs;
  return j.dump(2);
}

StudyReport StudyReport::from_json(const std::string& text) {
  StudyReport r;
  try {
    const json j = json::parse(text);
    r.kind = j.at("kind").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.created = j.at("created").get<std::string>();
    r.config = j.at("config").dump();
    if (r.config == "{}") r.config.clear();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    r.gap_column = j.at("gap_column").get<std::string>();
    for (const auto& row : j.at("rows")) {
      r.rows.push_back(row.at("values").get<std::vector<double>>());
      r.status.push_back(row.at("status").get<std::string>());
      r.seconds.push_back(row.at("seconds").get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("malformed report: ") + e.what());
  }
  for (const auto& row : r.rows) {
    if (row.size() != r.columns.size()) throw Error(ErrorCode::kIoError, "report row width differs from header");
  }
  return r;
}

bool StudyReport::operator==(const StudyReport& o) const {
  return kind == o.kind && version == o.version && config_hash == o.config_hash && created == o.created &&
         config == o.config && columns == o.columns && gap_column == o.gap_column && rows == o.rows &&
         status == o.status && seconds == o.seconds;
}

StudyReport make_report(const std::vector<StokesStudyRow>& rows, const RunConfig& cfg) {
  StudyReport r;
  r.kind = "stokes";
  r.version = version();
  r.config_hash = cfg.hash();
  r.created = utc_now();
  r.config = cfg.canonical();
  r.columns = {"eps",          "n_particles",  "radius",       "grid",         "eta",
               "l2_gap",       "h1_gap",       "pairing_gap_1", "pairing_gap_2", "pairing_gap_3",
               "brinkman_l2",  "iters_perforated", "iters_brinkman"};
  r.gap_column = "l2_gap";
  for (const auto& row : rows) {
    r.rows.push_back({row.eps, static_cast<double>(row.n_particles), row.radius, static_cast<double>(row.grid),
                      row.eta, row.l2_gap, row.h1_gap, row.pairing_gaps[0], row.pairing_gaps[1],
                      row.pairing_gaps[2], row.brinkman_l2, static_cast<double>(row.iters_perforated),
                      static_cast<double>(row.iters_brinkman)});
    r.status.push_back(row.status);
    r.seconds.push_back(row.seconds);
  }
  r.sort_rows();
  return r;
}

StudyReport make_report(const std::vector<DynamicStudyRow>& rows, const RunConfig& cfg) {
  StudyReport r;
  r.kind = "dynamic";
  r.version = version();
  r.config_hash = cfg.hash();
  r.created = utc_now();
  r.config = cfg.canonical();
  r.columns = {"eps", "n_particles", "radius", "grid", "steps", "l2_gap", "final_gap", "brinkman_l2", "friction",
               "energy_ok"};
  r.gap_column = "l2_gap";
  for (const auto& row : rows) {
    r.rows.push_back({row.eps, static_cast<double>(row.n_particles), row.radius, static_cast<double>(row.grid),
                      static_cast<double>(row.steps), row.l2_gap, row.final_gap, row.brinkman_l2, row.friction,
                      row.energy_ok ? 1.0 : 0.0});
    r.status.push_back(row.status);
    r.seconds.push_back(row.seconds);
  }
  r.sort_rows();
  return r;
}

std::string report_csv(const StudyReport& r) {
  std::ostringstream os;
  os << "# pfrs " << r.version << " " << r.kind << " config_hash=" << r.config_hash << '\n';
  for (const auto& c : r.columns) os << c << ',';
  os << "status\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    for (double v : r.rows[i]) os << fmt(v) << ',';
    os << csv_escape(r.status[i]) << '\n';
  }
  return os.str();
}

std::string report_dat(const StudyReport& r) {
  const auto it = std::find(r.columns.begin(), r.columns.end(), r.gap_column);
  if (it == r.columns.end()) throw Error(ErrorCode::kInvalidArgument, "gap column missing from report");
  const std::size_t col = static_cast<std::size_t>(it - r.columns.begin());
  std::ostringstream os;
  os << "# pfrs " << r.kind << " config_hash=" << r.config_hash << '\n';
  os << "# eps " << r.gap_column << '\n';
  for (const auto& row : r.rows) os << fmt(row[0]) << ' ' << fmt(row[col]) << '\n';
  return os.str();
}

std::vector<std::string> emit_report(const StudyReport& r, const std::string& dir, const std::string& stem,
                                     const std::vector<std::string>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> paths;
  for (const auto& f : formats) {
    const std::string path = (std::filesystem::path(dir) / (stem + "." + f)).string();
    if (f == "csv") {
      write_file(path, report_csv(r));
    } else if (f == "json") {
      write_file(path, r.to_json() + "\n");
    } else if (f == "dat") {
      write_file(path, report_dat(r));
    } else {
      throw Error(ErrorCode::kUsageError, "unknown report format '" + f + "'");
    }
    paths.push_back(path);
  }
  return paths;
}

StokesStudyConfig default_stokes_study() {
  StokesStudyConfig c;
  c.eps_list = {0.25, 0.167, 0.125};
  c.regime.dim = 3;
  c.regime.alpha = 3.0;
  c.regime.radius_prefactor = 16.0;
  c.grid_n = 96;
  c.density_cell_factor = 2.5;
  c.align_density = true;
  c.min_cells = 1.5;
  c.forcing = ForcingPreset::kSwirl;
  return c;
}

DynamicStudyConfig default_dynamic_study() {
  DynamicStudyConfig c;
  c.eps_list = {0.2, 0.14, 0.1};
  c.regime.dim = 2;
  c.regime.c2d = 0.0155;
  c.regime.radius_prefactor = 0.118;
  c.grid_n = 128;
  c.T = 1.0;
  c.dt = 0.01;
  c.min_cells = 2.0;
  c.forcing = ForcingPreset::kSwirl;
  return c;
}

namespace {

ParticleConfiguration single_particle(double eps) {
  ParticleConfiguration pc;
  pc.regime.dim = 3;
  pc.regime.eps = eps;
  pc.domain = DomainBox::unit(3);
  pc.centers = {Vec3(0.5, 0.5, 0.5)};
  pc.radius = pc.regime.radius();
  return pc;
}

}  // namespace

std::vector<BoundReport> flowmap_check(const FlowmapCheckConfig& cfg) {
  std::vector<BoundReport> out;
  for (double eps : cfg.eps_list) {
    const ParticleConfiguration pc = single_particle(eps);
    const Vec3 v(std::pow(eps, cfg.exponent), 0.0, 0.0);
    const AnalyticField lambda = lambda_field(pc, constant_velocities({v}));
    std::vector<Vec3> markers;
    const double rs = 0.75 * eps;
    const int m = std::max(2, cfg.markers_per_axis);
    for (int k = 0; k < m; ++k) {
      for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
          const Vec3 off = Vec3(i, j, k) * (2.0 * rs / (m - 1)) - Vec3::Constant(rs);
          if (off.norm() < rs) markers.push_back(pc.centers[0] + off);
        }
      }
    }
    FlowOptions opts;
    opts.second_derivatives = true;
    const FlowMapState st = integrate_flow(lambda, markers, 0.0, cfg.T, cfg.dt, opts);
    out.push_back(flow_bound_report(st, eps));
  }
  return out;
}

namespace {

RemainderTerms remainder_for(int grid_n, double eps, const Vec3& velocity, double T, double dt,
                             std::size_t* marker_count) {
  const StaggeredGrid g = StaggeredGrid::over(DomainBox::unit(3), grid_n);
  const ParticleConfiguration pc = single_particle(eps);
  const AnalyticField lambda = lambda_field(pc, constant_velocities({velocity}));
  std::vector<std::size_t> cells;
  const std::vector<Vec3> markers = support_cell_markers(g, lambda, &cells);
  if (marker_count) *marker_count = markers.size();
  FlowOptions opts;
  opts.second_derivatives = true;
  const FlowMapState st = integrate_flow(lambda, markers, 0.0, T, dt, opts);
  const DiscreteField u = sample_field(g, [](const Vec3& x) -> Vec3 { return test_field(0, x); });
  const DiscreteField psi = sample_field(g, [](const Vec3& x) -> Vec3 { return test_field(1, x); });
  return remainder_eval(u, u, psi, st, st.times.size() - 1, cells);
}

}  // namespace

std::vector<RemainderCheckRow> remainder_check(const RemainderCheckConfig& cfg) {
  std::vector<RemainderCheckRow> out;
  for (double eps : cfg.eps_list) {
    RemainderCheckRow row;
    row.eps = eps;
    row.terms = remainder_for(cfg.grid_n, eps, Vec3(std::pow(eps, cfg.exponent), 0.0, 0.0), cfg.T, cfg.dt,
                              &row.markers);
    out.push_back(row);
  }
  return out;
}

RemainderTerms remainder_identity(int grid_n, double eps) {
  return remainder_for(grid_n, eps, Vec3::Zero(), 0.5, 0.05, nullptr);
}

namespace {

struct Flags {
  std::string config_path;
  std::string out_dir = "pfrs_out";
  std::string formats = "csv,json,dat";
  int threads = 0;
};

RunConfig load_or_empty(const std::string& path) { return path.empty() ? RunConfig() : RunConfig::load(path); }

template <typename T>
void override_if(CLI::Option* opt, RunConfig& cfg, const std::string& key, const T& value) {
  if (opt->count() == 0) return;
  if constexpr (std::is_same_v<T, std::string>) {
    cfg.set_string(key, value);
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    cfg.set_doubles(key, value);
  } else if constexpr (std::is_integral_v<T>) {
    cfg.set_json(key, std::to_string(value));
  } else {
    cfg.set_double(key, value);
  }
}

PlacementMode parse_mode(const std::string& s) {
  if (s == "lattice") return PlacementMode::kLattice;
  if (s == "random") return PlacementMode::kRandom;
  throw Error(ErrorCode::kUsageError, "mode must be lattice or random");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kUsageError, what);
}

void check_eps_list(const std::vector<double>& eps) {
  require(!eps.empty(), "eps list is empty");
  for (double e : eps) require(e > 0.0 && e < 0.5, "eps values must lie in (0, 0.5)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perforated-flow homogenization studies", "pfrs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  Flags fl;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", fl.config_path, "TOML or JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--out", fl.out_dir, "Output directory (file for generate)");
    sub->add_option("--formats", fl.formats, "Report formats: csv,json,dat");
    sub->add_option("--threads", fl.threads, "Worker threads (PFRS_THREADS overrides)");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "Write a particle configuration as JSON");
  double g_eps = 0.2, g_alpha = 3.0, g_kappa = 1.0, g_c2d = 1.0;
  int g_dim = 3;
  std::uint64_t g_seed = 7;
  std::string g_mode = "lattice";
  add_common(gen);
  auto* o_geps = gen->add_option("--eps", g_eps, "Inter-particle scale")->required();
  auto* o_gdim = gen->add_option("--dim", g_dim, "2 or 3");
  auto* o_gmode = gen->add_option("--mode", g_mode, "lattice or random");
  auto* o_gseed = gen->add_option("--seed", g_seed, "RNG seed");
  auto* o_galpha = gen->add_option("--alpha", g_alpha, "3D radius exponent");
  auto* o_gkappa = gen->add_option("--kappa", g_kappa, "Radius prefactor");
  auto* o_gc2d = gen->add_option("--c2d", g_c2d, "2D log-scaling constant");

  // stokes-study
  auto* ss = app.add_subcommand("stokes-study", "Perforated Stokes vs Brinkman convergence table");
  const StokesStudyConfig sdef = default_stokes_study();
  std::vector<double> s_eps = sdef.eps_list;
  double s_alpha = sdef.regime.alpha, s_kappa = sdef.regime.radius_prefactor, s_eta = sdef.eta_factor;
  double s_cell = sdef.density_cell_factor, s_amp = sdef.forcing_amplitude, s_min = sdef.min_cells;
  double s_tol = sdef.solver.tol;
  int s_grid = sdef.grid_n;
  std::uint64_t s_seed = sdef.seed;
  std::string s_mode = "lattice", s_forcing = to_string(sdef.forcing);
  add_common(ss);
  auto* o_seps = ss->add_option("--eps", s_eps, "Comma-separated eps list")->delimiter(',');
  auto* o_sseed = ss->add_option("--seed", s_seed, "RNG seed");
  auto* o_sgrid = ss->add_option("--grid", s_grid, "Cells per axis");
  auto* o_salpha = ss->add_option("--alpha", s_alpha, "Radius exponent");
  auto* o_skappa = ss->add_option("--kappa", s_kappa, "Radius prefactor");
  auto* o_smode = ss->add_option("--mode", s_mode, "lattice or random");
  auto* o_seta = ss->add_option("--eta-factor", s_eta, "Penalization eta / h^2");
  auto* o_scell = ss->add_option("--density-cell", s_cell, "Density cell side / eps");
  auto* o_sforce = ss->add_option("--forcing", s_forcing, "shear, swirl or uniform");
  auto* o_samp = ss->add_option("--amplitude", s_amp, "Forcing amplitude");
  auto* o_smin = ss->add_option("--min-cells", s_min, "Smallest radius in cells");
  auto* o_stol = ss->add_option("--tol", s_tol, "Solver tolerance");
  bool s_align = sdef.align_density;
  auto* o_salign = ss->add_option("--align-density", s_align, "Centre density cells on the lattice");

  // dynamic-study
  auto* ds = app.add_subcommand("dynamic-study", "Penalized NS vs Brinkman NS space-time gap table");
  const DynamicStudyConfig ddef = default_dynamic_study();
  std::vector<double> d_eps = ddef.eps_list;
  double d_c2d = ddef.regime.c2d, d_kappa = ddef.regime.radius_prefactor, d_T = ddef.T, d_dt = ddef.dt;
  double d_speed = ddef.speed, d_amp = ddef.forcing_amplitude, d_cell = ddef.density_cell_factor;
  double d_eta = ddef.eta_factor, d_min = ddef.min_cells;
  int d_grid = ddef.grid_n;
  std::uint64_t d_seed = ddef.seed;
  std::string d_forcing = to_string(ddef.forcing);
  add_common(ds);
  auto* o_deps = ds->add_option("--eps", d_eps, "Comma-separated eps list")->delimiter(',');
  auto* o_dseed = ds->add_option("--seed", d_seed, "RNG seed");
  auto* o_dgrid = ds->add_option("--grid", d_grid, "Cells per axis");
  auto* o_dc2d = ds->add_option("--c2d", d_c2d, "2D log-scaling constant");
  auto* o_dkappa = ds->add_option("--kappa", d_kappa, "Radius prefactor");
  auto* o_dT = ds->add_option("--T", d_T, "Final time");
  auto* o_ddt = ds->add_option("--dt", d_dt, "Time step");
  auto* o_dspeed = ds->add_option("--speed", d_speed, "Particle speed / eps^2");
  auto* o_dforce = ds->add_option("--forcing", d_forcing, "shear, swirl or uniform");
  auto* o_damp = ds->add_option("--amplitude", d_amp, "Forcing amplitude");
  auto* o_dcell = ds->add_option("--density-cell", d_cell, "Density cell side / eps");
  auto* o_deta = ds->add_option("--eta-factor", d_eta, "Penalization eta / h^2");
  auto* o_dmin = ds->add_option("--min-cells", d_min, "Smallest radius in cells");

  // flowmap-check
  auto* fm = app.add_subcommand("flowmap-check", "Flow-map bounds for a single translating particle");
  FlowmapCheckConfig fdef;
  std::vector<double> f_eps = fdef.eps_list;
  double f_exp = fdef.exponent, f_T = fdef.T, f_dt = fdef.dt;
  int f_markers = fdef.markers_per_axis;
  add_common(fm);
  auto* o_feps = fm->add_option("--eps", f_eps, "Comma-separated eps list")->delimiter(',');
  auto* o_fexp = fm->add_option("--exponent", f_exp, "Velocity eps^exponent");
  auto* o_fT = fm->add_option("--T", f_T, "Final time");
  auto* o_fdt = fm->add_option("--dt", f_dt, "RK4 step");
  auto* o_fm = fm->add_option("--markers", f_markers, "Markers per axis");

  // drag-check / drag-anchor
  DragAnchorConfig adef;
  int k_grid = adef.grid_n;
  double k_radius = adef.radius, k_eta = adef.eta_factor;
  auto* dc = app.add_subcommand("drag-check", "Penalized drag on one sphere");
  add_common(dc);
  auto* o_kgrid = dc->add_option("--grid", k_grid, "Cells per axis");
  auto* o_krad = dc->add_option("--radius", k_radius, "Sphere radius");
  auto* o_keta = dc->add_option("--eta-factor", k_eta, "Penalization eta / h^2");
  auto* da = app.add_subcommand("drag-anchor", "Drag anchor with the default 96^3 setup and pass window");
  add_common(da);

  // report
  auto* rp = app.add_subcommand("report", "Regenerate CSV and .dat files from a stored JSON report");
  std::string r_in;
  add_common(rp);
  rp->add_option("--in", r_in, "Report JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_or_empty(fl.config_path);
    const int threads = fl.threads;
    const std::vector<std::string> formats = split_list(fl.formats);

    if (gen->parsed()) {
      override_if(o_geps, cfg, "eps", g_eps);
      override_if(o_gdim, cfg, "dim", g_dim);
      override_if(o_gmode, cfg, "mode", g_mode);
      override_if(o_gseed, cfg, "seed", g_seed);
      override_if(o_galpha, cfg, "alpha", g_alpha);
      override_if(o_gkappa, cfg, "kappa", g_kappa);
      override_if(o_gc2d, cfg, "c2d", g_c2d);
      ScalingRegime reg;
      reg.dim = cfg.get_int("dim", 3);
      reg.eps = cfg.get_double("eps", 0.2);
      reg.alpha = cfg.get_double("alpha", 3.0);
      reg.radius_prefactor = cfg.get_double("kappa", 1.0);
      reg.c2d = cfg.get_double("c2d", 1.0);
      require(reg.dim == 2 || reg.dim == 3, "dim must be 2 or 3");
      reg.check();
      const auto pc = generate_configuration(DomainBox::unit(reg.dim), reg, parse_mode(cfg.get_string("mode", "lattice")),
                                             static_cast<std::uint64_t>(cfg.get_double("seed", 7)));
      std::string path = fl.out_dir == "pfrs_out" ? "configuration.json" : fl.out_dir;
      write_file(path, to_json_string(pc) + "\n");
      out << "wrote " << path << " (" << pc.count() << " particles, r = " << pc.radius << ")\n";
      return 0;
    }

    if (ss->parsed()) {
      override_if(o_seps, cfg, "eps", s_eps);
      override_if(o_sseed, cfg, "seed", s_seed);
      override_if(o_sgrid, cfg, "grid", s_grid);
      override_if(o_salpha, cfg, "alpha", s_alpha);
      override_if(o_skappa, cfg, "kappa", s_kappa);
      override_if(o_smode, cfg, "mode", s_mode);
      override_if(o_seta, cfg, "eta_factor", s_eta);
      override_if(o_scell, cfg, "density_cell", s_cell);
      override_if(o_sforce, cfg, "forcing", s_forcing);
      override_if(o_samp, cfg, "amplitude", s_amp);
      override_if(o_smin, cfg, "min_cells", s_min);
      override_if(o_stol, cfg, "solver.tol", s_tol);
      if (o_salign->count() > 0) cfg.set_json("align_density", s_align ? "true" : "false");
      cfg.set_string("subcommand", "stokes-study");
      StokesStudyConfig sc = sdef;
      sc.eps_list = cfg.get_doubles("eps", sdef.eps_list);
      sc.seed = static_cast<std::uint64_t>(cfg.get_double("seed", static_cast<double>(sdef.seed)));
      sc.grid_n = cfg.get_int("grid", sdef.grid_n);
      sc.regime.alpha = cfg.get_double("alpha", sdef.regime.alpha);
      sc.regime.radius_prefactor = cfg.get_double("kappa", sdef.regime.radius_prefactor);
      sc.mode = parse_mode(cfg.get_string("mode", "lattice"));
      sc.eta_factor = cfg.get_double("eta_factor", sdef.eta_factor);
      sc.density_cell_factor = cfg.get_double("density_cell", sdef.density_cell_factor);
      sc.forcing = parse_forcing(cfg.get_string("forcing", to_string(sdef.forcing)));
      sc.forcing_amplitude = cfg.get_double("amplitude", sdef.forcing_amplitude);
      sc.min_cells = cfg.get_double("min_cells", sdef.min_cells);
      sc.solver.tol = cfg.get_double("solver.tol", sdef.solver.tol);
      sc.align_density = cfg.get_bool("align_density", sdef.align_density);
      sc.threads = threads;
      check_eps_list(sc.eps_list);
      require(sc.grid_n >= 8 && sc.grid_n <= 512, "grid must lie in [8, 512]");
      require(sc.eta_factor > 0.0 && sc.density_cell_factor > 0.0, "eta_factor and density_cell must be positive");
      const StudyReport rep = make_report(stokes_convergence_study(sc), cfg);
      for (const auto& p : emit_report(rep, fl.out_dir, "stokes_study", formats)) out << "wrote " << p << '\n';
      out << report_csv(rep);
      return rep.all_ok() ? 0 : 1;
    }

    if (ds->parsed()) {
      override_if(o_deps, cfg, "eps", d_eps);
      override_if(o_dseed, cfg, "seed", d_seed);
      override_if(o_dgrid, cfg, "grid", d_grid);
      override_if(o_dc2d, cfg, "c2d", d_c2d);
      override_if(o_dkappa, cfg, "kappa", d_kappa);
      override_if(o_dT, cfg, "T", d_T);
      override_if(o_ddt, cfg, "dt", d_dt);
      override_if(o_dspeed, cfg, "speed", d_speed);
      override_if(o_dforce, cfg, "forcing", d_forcing);
      override_if(o_damp, cfg, "amplitude", d_amp);
      override_if(o_dcell, cfg, "density_cell", d_cell);
      override_if(o_deta, cfg, "eta_factor", d_eta);
      override_if(o_dmin, cfg, "min_cells", d_min);
      cfg.set_string("subcommand", "dynamic-study");
      DynamicStudyConfig dc_cfg = ddef;
      dc_cfg.eps_list = cfg.get_doubles("eps", ddef.eps_list);
      dc_cfg.seed = static_cast<std::uint64_t>(cfg.get_double("seed", static_cast<double>(ddef.seed)));
      dc_cfg.grid_n = cfg.get_int("grid", ddef.grid_n);
      dc_cfg.regime.c2d = cfg.get_double("c2d", ddef.regime.c2d);
      dc_cfg.regime.radius_prefactor = cfg.get_double("kappa", ddef.regime.radius_prefactor);
      dc_cfg.T = cfg.get_double("T", ddef.T);
      dc_cfg.dt = cfg.get_double("dt", ddef.dt);
      dc_cfg.speed = cfg.get_double("speed", ddef.speed);
      dc_cfg.forcing = parse_forcing(cfg.get_string("forcing", to_string(ddef.forcing)));
      dc_cfg.forcing_amplitude = cfg.get_double("amplitude", ddef.forcing_amplitude);
      dc_cfg.density_cell_factor = cfg.get_double("density_cell", ddef.density_cell_factor);
      dc_cfg.eta_factor = cfg.get_double("eta_factor", ddef.eta_factor);
      dc_cfg.min_cells = cfg.get_double("min_cells", ddef.min_cells);
      dc_cfg.threads = threads;
      check_eps_list(dc_cfg.eps_list);
      require(dc_cfg.grid_n >= 8 && dc_cfg.grid_n <= 2048, "grid must lie in [8, 2048]");
      require(dc_cfg.T > 0.0 && dc_cfg.dt > 0.0 && dc_cfg.dt <= dc_cfg.T, "need 0 < dt <= T");
      const StudyReport rep = make_report(dynamic_convergence_study(dc_cfg), cfg);
      for (const auto& p : emit_report(rep, fl.out_dir, "dynamic_study", formats)) out << "wrote " << p << '\n';
      out << report_csv(rep);
      return rep.all_ok() ? 0 : 1;
    }

    if (fm->parsed()) {
      override_if(o_feps, cfg, "eps", f_eps);
      override_if(o_fexp, cfg, "exponent", f_exp);
      override_if(o_fT, cfg, "T", f_T);
      override_if(o_fdt, cfg, "dt", f_dt);
      override_if(o_fm, cfg, "markers", f_markers);
      cfg.set_string("subcommand", "flowmap-check");
      FlowmapCheckConfig fc;
      fc.eps_list = cfg.get_doubles("eps", fdef.eps_list);
      fc.exponent = cfg.get_double("exponent", fdef.exponent);
      fc.T = cfg.get_double("T", fdef.T);
      fc.dt = cfg.get_double("dt", fdef.dt);
      fc.markers_per_axis = cfg.get_int("markers", fdef.markers_per_axis);
      check_eps_list(fc.eps_list);
      require(fc.T > 0.0 && fc.dt > 0.0, "need positive T and dt");
      const auto reports = flowmap_check(fc);
      json j;
      j["config_hash"] = cfg.hash();
      j["config"] = json::parse(cfg.canonical());
      j["reports"] = json::array();
      std::ostringstream csv;
      csv << "# pfrs flowmap config_hash=" << cfg.hash() << "\neps,v6b,v6b_over_eps,v6d,v8,v13,v14,v15,det\n";
      for (const auto& r : reports) {
        j["reports"].push_back(json::parse(r.to_json()));
        csv << fmt(r.eps) << ',' << fmt(r.v6b) << ',' << fmt(r.v6b / r.eps) << ',' << fmt(r.v6d) << ','
            << fmt(r.v8) << ',' << fmt(r.v13) << ',' << fmt(r.v14) << ',' << fmt(r.v15) << ',' << fmt(r.det) << '\n';
      }
      std::filesystem::create_directories(fl.out_dir);
      write_file((std::filesystem::path(fl.out_dir) / "flowmap_check.json").string(), j.dump(2) + "\n");
      write_file((std::filesystem::path(fl.out_dir) / "flowmap_check.csv").string(), csv.str());
      out << csv.str();
      return 0;
    }

    if (dc->parsed() || da->parsed()) {
      const bool anchor = da->parsed();
      if (!anchor) {
        override_if(o_kgrid, cfg, "grid", k_grid);
        override_if(o_krad, cfg, "radius", k_radius);
        override_if(o_keta, cfg, "eta_factor", k_eta);
      }
      cfg.set_string("subcommand", anchor ? "drag-anchor" : "drag-check");
      const int n = anchor ? adef.grid_n : cfg.get_int("grid", adef.grid_n);
      const double r = anchor ? adef.radius : cfg.get_double("radius", adef.radius);
      const double etaf = anchor ? adef.eta_factor : cfg.get_double("eta_factor", adef.eta_factor);
      require(n >= 8 && n <= 512, "grid must lie in [8, 512]");
      require(r > 0.0 && r < 0.5, "radius must lie in (0, 0.5)");
      const StaggeredGrid g = StaggeredGrid::over(DomainBox::unit(3), n);
      const DragResult d = sphere_drag(r, Vec3(1.0, 0.0, 0.0), g, {}, etaf * g.h() * g.h());
      json j;
      j["config_hash"] = cfg.hash();
      j["config"] = json::parse(cfg.canonical());
      j["radius"] = d.radius;
      j["h"] = d.h;
      j["eta"] = d.eta;
      j["force"] = {d.force[0], d.force[1], d.force[2]};
      j["stokes_drag"] = d.stokes_drag;
      j["ratio"] = d.ratio;
      j["wall_factor"] = d.wall_factor;
      j["wall_corrected_ratio"] = d.wall_corrected_ratio;
      j["iterations"] = d.stats.iterations;
      const bool pass = d.ratio >= adef.lo && d.ratio <= adef.hi;
      if (anchor) j["pass"] = pass;
      std::filesystem::create_directories(fl.out_dir);
      write_file((std::filesystem::path(fl.out_dir) / (anchor ? "drag_anchor.json" : "drag_check.json")).string(),
                 j.dump(2) + "\n");
      out << "drag ratio " << d.ratio << " (wall factor " << d.wall_factor << ", corrected "
          << d.wall_corrected_ratio << ")\n";
      return anchor && !pass ? 1 : 0;
    }

    if (rp->parsed()) {
      std::ifstream in(r_in);
      std::ostringstream ss_in;
      ss_in << in.rdbuf();
      const StudyReport rep = StudyReport::from_json(ss_in.str());
      std::vector<std::string> fmts;
      for (const auto& f : formats) {
        if (f != "json") fmts.push_back(f);
      }
      const std::string stem = rep.kind + "_study";
      for (const auto& p : emit_report(rep, fl.out_dir, stem, fmts)) out << "wrote " << p << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    if (e.code() == ErrorCode::kUsageError) {
      err << app.help();
      return 2;
    }
    return 1;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace pfrs
