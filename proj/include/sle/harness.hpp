#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sle/greens.hpp"
#include "sle/loewner.hpp"
#include "sle/minkowski.hpp"
#include "sle/stats.hpp"

namespace sle {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ensemble description shared by every experiment. The cache directory is
// optional; when set, per-trace records are persisted and interrupted runs
// resume where they stopped.
struct SimConfig {
  SleParams params;
  double dt = 1e-4;
  std::size_t steps = 40000;
  std::size_t n_traces = 1000;
  std::uint64_t master_seed = 1;
  std::string cache_dir;
};

void validate_sim_config(const SimConfig& cfg);
double total_time(const SimConfig& cfg);

// Append-only binary record store. The header pins the parameter string that
// produced the records; reopening with a different string is an error rather
// than silent reuse.
class CacheFile {
 public:
  CacheFile() = default;
  ~CacheFile();
  CacheFile(const CacheFile&) = delete;
  CacheFile& operator=(const CacheFile&) = delete;

  void open(const std::string& path, const std::string& param_string,
            std::size_t record_size);
  bool is_open() const { return f_ != nullptr; }
  std::size_t count() const { return count_; }
  std::size_t record_size() const { return record_size_; }
  void read_into(double* dst, std::size_t n_records);
  void append(const double* recs, std::size_t n_records);
  void close();

 private:
  std::FILE* f_ = nullptr;
  std::size_t record_size_ = 0;
  std::size_t count_ = 0;
  long data_offset_ = 0;
};

// One derived record per trace. eval receives the chain plus a lazy trace
// getter so cheap conformal-radius prefilters can skip trace extraction
// entirely; records are produced in trace order regardless of thread count.
struct ScanSpec {
  std::string name;
  std::string param_string;
  std::size_t record_size = 0;
  std::function<void(const LoewnerChain&,
                     const std::function<const std::vector<cplx>&()>&, double*)>
      eval;
};

// generated, when non-null, reports how many records were computed fresh (as
// opposed to read back from the cache).
std::vector<double> ensemble_scan(const SimConfig& cfg, const ScanSpec& spec,
                                  std::size_t* generated = nullptr);

struct HitRecord {
  cplx z;
  double r = 0.0;
  bool hit = false;
  long tau_index = -1;  // first trace index within e^-r, -1 when no hit
};

// Min distance from z to the trace polyline plus, per requested radius, the
// first segment index within that radius.
struct DistanceSweep {
  double min_dist = 0.0;
  std::vector<long> tau;
};

DistanceSweep distance_sweep(const std::vector<cplx>& pts, cplx z,
                             const std::vector<double>& radii);
HitRecord make_hit_record(const std::vector<cplx>& pts, cplx z, double r);

// Largest trustworthy radius exponent for this trace near z: hits at radius r
// are honest only while e^-r stays a few multiples of the local point spacing.
double r_max_for(const std::vector<cplx>& pts, cplx z, double near_radius = 1.0);

struct HitScanResult {
  std::vector<double> r_grid;
  std::size_t n = 0;
  // per trace: [min_dist, tau_0, ..., tau_{k-1}]
  std::vector<double> records;
  std::size_t hits(std::size_t radius_index) const;
  double min_dist(std::size_t trace) const;
  long tau(std::size_t trace, std::size_t radius_index) const;
};

HitScanResult hit_scan(const SimConfig& cfg, cplx z,
                       const std::vector<double>& r_grid);

// Tabular experiment output plus named scalar summaries. Wall time is kept in
// memory for logs only and never written to result files.
struct ExperimentResult {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> scalars;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;
};

void write_result_csv(const std::string& path, const ExperimentResult& res);

ExperimentResult hitting_probability(const SimConfig& cfg, cplx z,
                                     const std::vector<double>& r_grid);
ExperimentResult exponent_regression(const SimConfig& cfg, cplx z,
                                     const std::vector<double>& r_grid);
ExperimentResult boundary_exponent(const SimConfig& cfg, double x,
                                   const std::vector<double>& r_grid);
ExperimentResult moment_identity(const SimConfig& cfg,
                                 const std::vector<DyadicSquare>& squares,
                                 double r_work, double grid_h, int quad_n = 64);
ExperimentResult return_probability(const SimConfig& cfg, cplx z, double r,
                                    double u);
ExperimentResult q_covariance(const SimConfig& cfg, cplx z, cplx w,
                              const std::vector<double>& r_grid, double lambda,
                              double delta);

// Synthetic-data core of the regression driver, exposed for exactness tests:
// weighted log-probability fit with Var(log p) approximated by (1-p)/(N p).
WlsFit regression_from_counts(const std::vector<double>& r_grid,
                              const std::vector<std::size_t>& hits,
                              std::size_t n);

cplx parse_complex(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);
std::vector<DyadicSquare> parse_square_list(const std::string& text);

struct ExperimentSpec {
  std::string name;
  std::string type;
  std::map<std::string, std::string> kv;
};

struct RunConfig {
  SimConfig sim;
  std::string out_dir = "results";
  std::vector<ExperimentSpec> experiments;
};

// INI-style config. All schema violations are collected and reported together.
RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text,
                                const std::string& origin);

ExperimentResult run_one_experiment(const SimConfig& cfg,
                                    const ExperimentSpec& spec);

// Runs every experiment, writes one CSV per experiment plus a deterministic
// manifest.json into out_dir. Returns the process exit code contract:
// 0 success, 3 resolution violation (after naming the offending experiment).
int run_experiments(const RunConfig& cfg, std::ostream& log);

std::string manifest_json(const RunConfig& cfg,
                          const std::vector<ExperimentResult>& results);
std::string params_snapshot(const SimConfig& cfg);

}  // namespace sle
