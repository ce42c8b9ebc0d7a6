#pragma once

#include "pfrs/dynamic.hpp"
#include "pfrs/flowmap.hpp"
#include "pfrs/stokes.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pfrs {

const char* version();

/// Validated key/value tree of a run. Keys are dotted paths ("grid.n"); values are stored as
/// canonical JSON text so the hash does not depend on the input syntax.
class RunConfig {
 public:
  RunConfig() = default;

  /// JSON when the first non-blank character is '{', otherwise the TOML subset
  /// (tables, dotted keys, strings, numbers, booleans, flat arrays).
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  void set_json(const std::string& key, const std::string& json_value);
  void set_double(const std::string& key, double v);
  void set_string(const std::string& key, const std::string& v);
  void set_doubles(const std::string& key, const std::vector<double>& v);

  /// Sorted, compact JSON object of every key.
  std::string canonical() const;
  /// FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Table with metadata. Rows are kept sorted by the first column ("eps") descending.
struct StudyReport {
  std::string kind;
  std::string version;
  std::string config_hash;
  std::string created;
  std::string config;
  std::vector<std::string> columns;
  /// Column used for the two-column .dat series.
  std::string gap_column;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> status;
  /// Wall-clock seconds per row. JSON only, so CSV output stays byte-stable.
  std::vector<double> seconds;

  void sort_rows();
  bool all_ok() const;
  std::string to_json() const;
  static StudyReport from_json(const std::string& text);
  bool operator==(const StudyReport& o) const;
};

StudyReport make_report(const std::vector<StokesStudyRow>& rows, const RunConfig& cfg);
StudyReport make_report(const std::vector<DynamicStudyRow>& rows, const RunConfig& cfg);

std::string report_csv(const StudyReport& r);
/// Gnuplot-ready "eps gap" lines after a comment header.
std::string report_dat(const StudyReport& r);

/// Writes <dir>/<stem>.{csv,json,dat} for the requested formats and returns the paths. Throws IoError.
std::vector<std::string> emit_report(const StudyReport& r, const std::string& dir, const std::string& stem,
                                     const std::vector<std::string>& formats);

/// Study presets used by the CLI and the acceptance suite.
StokesStudyConfig default_stokes_study();
DynamicStudyConfig default_dynamic_study();

struct DragAnchorConfig {
  int grid_n = 96;
  double radius = 0.0625;
  double eta_factor = 0.1;
  double lo = 0.8;
  double hi = 1.3;
};

/// Single translating particle at the box centre with h' = eps^exponent e_1 on [0, T].
struct FlowmapCheckConfig {
  std::vector<double> eps_list{0.2, 0.1, 0.05};
  double exponent = 2.5;
  double T = 1.0;
  double dt = 0.02;
  int markers_per_axis = 9;
};

std::vector<BoundReport> flowmap_check(const FlowmapCheckConfig& cfg);

struct RemainderCheckConfig {
  std::vector<double> eps_list{0.2, 0.1, 0.05};
  double exponent = 2.5;
  int grid_n = 64;
  double T = 0.5;
  double dt = 0.05;
};

struct RemainderCheckRow {
  double eps = 0.0;
  std::size_t markers = 0;
  RemainderTerms terms;
};

/// Remainder integrals at T with u~ = v = test_field(0), psi = test_field(1) on a fixed grid.
std::vector<RemainderCheckRow> remainder_check(const RemainderCheckConfig& cfg);
/// Same fields under the identity flow (zero particle velocity).
RemainderTerms remainder_identity(int grid_n, double eps);

/// CLI entry point. Returns 0 on success, 1 on case failures, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pfrs
