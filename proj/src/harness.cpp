#include "sle/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sle/rng.hpp"

#ifndef SLE_BUILD_REV
#define SLE_BUILD_REV "unknown"
#endif

namespace sle {

namespace {

constexpr char kCacheMagic[8] = {'S', 'L', 'E', 'C', 'A', 'C', 'H', 'E'};
constexpr std::uint64_t kCacheVersion = 1;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_cplx(cplx z) {
  return "(" + fmt(z.real()) + "," + fmt(z.imag()) + ")";
}

std::string fmt_grid(const std::vector<double>& g) {
  std::string s = "[";
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) s += ",";
    s += fmt(g[i]);
  }
  return s + "]";
}

std::string sim_core_string(const SimConfig& cfg) {
  std::string s = "kappa=" + fmt(cfg.params.kappa);
  s += " dt=" + fmt(cfg.dt);
  s += " steps=" + std::to_string(cfg.steps);
  s += " seed=" + std::to_string(cfg.master_seed);
  return s;
}

double timer_now() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string hash8(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(h ^ (h >> 32)));
  return buf;
}

void require_sorted_positive(const std::vector<double>& r_grid) {
  if (r_grid.empty()) throw std::invalid_argument("empty r grid");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0) || !std::isfinite(r_grid[i]))
      throw std::invalid_argument("r grid entries must be positive and finite");
    if (i && !(r_grid[i] > r_grid[i - 1]))
      throw std::invalid_argument("r grid must be strictly increasing");
  }
}

double crad_from_state(const FlowState& fs) {
  if (fs.swallowed) return 0.0;
  double im = fs.g.imag();
  if (!(im > 0.0)) return 0.0;
  return 2.0 * im / std::exp(fs.log_deriv.real());
}

// Trace points sit at times (k+1)dt; the polyline hands segment k the
// endpoints gamma(k dt), gamma((k+1)dt) with gamma(0) = 0.
inline cplx seg_start(const std::vector<cplx>& pts, std::size_t k) {
  return k == 0 ? cplx(0.0, 0.0) : pts[k - 1];
}

struct ResolutionGuard {
  const SimConfig* cfg = nullptr;
  cplx z;
  std::vector<double> r_grid;
};

void check_grid_resolution(const SimConfig& cfg, cplx z,
                           const std::vector<double>& r_grid,
                           const std::string& what) {
  std::uint64_t s = derive_stream_seed(cfg.master_seed, 0);
  DrivingPath dp = sample_driving_n(cfg.steps, cfg.dt, s);
  LoewnerChain chain = chain_from_driving(dp, cfg.params, s);
  Trace tr = compute_trace(chain);
  double rmax = r_max_for(tr.pts, z);
  for (double r : r_grid) {
    if (r > rmax) {
      throw ResolutionError(what + ": radius exponent " + fmt(r) +
                            " exceeds the trustworthy maximum " + fmt(rmax) +
                            " for dt=" + fmt(cfg.dt) + " near z=" + fmt_cplx(z));
    }
  }
}

}  // namespace

void validate_sim_config(const SimConfig& cfg) {
  validate_params(cfg.params);
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt))
    throw std::invalid_argument("dt must be positive");
  if (cfg.steps == 0) throw std::invalid_argument("steps must be positive");
  if (cfg.n_traces == 0) throw std::invalid_argument("n_traces must be positive");
}

double total_time(const SimConfig& cfg) {
  return cfg.dt * static_cast<double>(cfg.steps);
}

CacheFile::~CacheFile() { close(); }

void CacheFile::close() {
  if (f_) {
    std::fclose(f_);
    f_ = nullptr;
  }
}

void CacheFile::open(const std::string& path, const std::string& param_string,
                     std::size_t record_size) {
  close();
  if (record_size == 0) throw std::invalid_argument("record_size must be positive");
  record_size_ = record_size;
  bool exists = std::filesystem::exists(path);
  f_ = std::fopen(path.c_str(), exists ? "r+b" : "w+b");
  if (!f_) throw std::runtime_error("cannot open cache file " + path);
  std::uint64_t plen = param_string.size();
  data_offset_ = static_cast<long>(sizeof(kCacheMagic) + 3 * sizeof(std::uint64_t) + plen);
  if (!exists) {
    std::uint64_t rs = record_size;
    bool ok = std::fwrite(kCacheMagic, 1, sizeof(kCacheMagic), f_) == sizeof(kCacheMagic) &&
              std::fwrite(&kCacheVersion, sizeof(kCacheVersion), 1, f_) == 1 &&
              std::fwrite(&rs, sizeof(rs), 1, f_) == 1 &&
              std::fwrite(&plen, sizeof(plen), 1, f_) == 1 &&
              (plen == 0 || std::fwrite(param_string.data(), 1, plen, f_) == plen);
    if (!ok || std::fflush(f_) != 0)
      throw std::runtime_error("cannot write cache header to " + path);
    count_ = 0;
    return;
  }
  char magic[8];
  std::uint64_t version = 0, rs = 0, stored_len = 0;
  bool ok = std::fread(magic, 1, 8, f_) == 8 &&
            std::fread(&version, sizeof(version), 1, f_) == 1 &&
            std::fread(&rs, sizeof(rs), 1, f_) == 1 &&
            std::fread(&stored_len, sizeof(stored_len), 1, f_) == 1;
  if (!ok || std::memcmp(magic, kCacheMagic, 8) != 0 || version != kCacheVersion)
    throw ConfigError("cache file " + path + " has an unrecognized header");
  if (rs != record_size)
    throw ConfigError("cache file " + path + " holds records of size " +
                      std::to_string(rs) + ", expected " + std::to_string(record_size));
  std::string stored(stored_len, '\0');
  if (stored_len && std::fread(stored.data(), 1, stored_len, f_) != stored_len)
    throw ConfigError("cache file " + path + " is truncated inside the header");
  if (stored != param_string)
    throw ConfigError("cache file " + path +
                      " was produced with different parameters\n  stored:   " + stored +
                      "\n  expected: " + param_string);
  std::fseek(f_, 0, SEEK_END);
  long end = std::ftell(f_);
  long bytes = end - data_offset_;
  if (bytes < 0) bytes = 0;
  count_ = static_cast<std::size_t>(bytes) / (record_size_ * sizeof(double));
}

void CacheFile::read_into(double* dst, std::size_t n_records) {
  if (!f_) throw std::logic_error("cache file is not open");
  if (n_records > count_) throw std::logic_error("cache read past stored records");
  std::fseek(f_, data_offset_, SEEK_SET);
  std::size_t want = n_records * record_size_;
  if (want && std::fread(dst, sizeof(double), want, f_) != want)
    throw std::runtime_error("cache read failed");
}

void CacheFile::append(const double* recs, std::size_t n_records) {
  if (!f_) throw std::logic_error("cache file is not open");
  std::fseek(f_, data_offset_ + static_cast<long>(count_ * record_size_ * sizeof(double)),
             SEEK_SET);
  std::size_t want = n_records * record_size_;
  if (want && std::fwrite(recs, sizeof(double), want, f_) != want)
    throw std::runtime_error("cache append failed");
  if (std::fflush(f_) != 0) throw std::runtime_error("cache flush failed");
  count_ += n_records;
}

std::vector<double> ensemble_scan(const SimConfig& cfg, const ScanSpec& spec,
                                  std::size_t* generated) {
  validate_sim_config(cfg);
  if (spec.record_size == 0 || !spec.eval)
    throw std::invalid_argument("scan spec needs a record size and an eval");
  const std::size_t R = spec.record_size;
  const std::size_t N = cfg.n_traces;
  std::vector<double> recs(N * R, 0.0);
  CacheFile cache;
  std::size_t have = 0;
  if (!cfg.cache_dir.empty()) {
    std::filesystem::create_directories(cfg.cache_dir);
    std::string full = sim_core_string(cfg) + " | " + spec.param_string;
    cache.open(cfg.cache_dir + "/" + spec.name + "_" + hash8(full) + ".bin", full, R);
    have = std::min(cache.count(), N);
    if (have) cache.read_into(recs.data(), have);
  }
  if (generated) *generated = N - have;
  const std::size_t chunk = 32;
  for (std::size_t start = have; start < N; start += chunk) {
    std::size_t stop = std::min(start + chunk, N);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long ii = static_cast<long long>(start); ii < static_cast<long long>(stop);
         ++ii) {
      std::size_t i = static_cast<std::size_t>(ii);
      std::uint64_t s = derive_stream_seed(cfg.master_seed, i);
      DrivingPath dp = sample_driving_n(cfg.steps, cfg.dt, s);
      LoewnerChain chain = chain_from_driving(dp, cfg.params, s);
      std::optional<std::vector<cplx>> pts;
      std::function<const std::vector<cplx>&()> get =
          [&]() -> const std::vector<cplx>& {
        if (!pts) pts = std::move(compute_trace(chain).pts);
        return *pts;
      };
      spec.eval(chain, get, &recs[i * R]);
    }
    if (cache.is_open()) cache.append(&recs[start * R], stop - start);
  }
  return recs;
}

DistanceSweep distance_sweep(const std::vector<cplx>& pts, cplx z,
                             const std::vector<double>& radii) {
  DistanceSweep out;
  out.tau.assign(radii.size(), -1);
  std::size_t remaining = radii.size();
  double r_unmarked = 0.0;
  for (double r : radii) r_unmarked = std::max(r_unmarked, r);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    cplx p = seg_start(pts, k);
    cplx q = pts[k];
    double lb = std::abs(p - z) - std::abs(q - p);
    if (lb >= best && (remaining == 0 || lb > r_unmarked)) continue;
    double d = segment_distance(z, p, q);
    if (d < best) best = d;
    if (remaining && d <= r_unmarked) {
      r_unmarked = 0.0;
      for (std::size_t j = 0; j < radii.size(); ++j) {
        if (out.tau[j] < 0) {
          if (d <= radii[j]) {
            out.tau[j] = static_cast<long>(k);
            --remaining;
          } else {
            r_unmarked = std::max(r_unmarked, radii[j]);
          }
        }
      }
    }
  }
  out.min_dist = best;
  return out;
}

HitRecord make_hit_record(const std::vector<cplx>& pts, cplx z, double r) {
  DistanceSweep sw = distance_sweep(pts, z, {std::exp(-r)});
  HitRecord rec;
  rec.z = z;
  rec.r = r;
  rec.hit = sw.tau[0] >= 0;
  rec.tau_index = sw.tau[0];
  return rec;
}

double r_max_for(const std::vector<cplx>& pts, cplx z, double near_radius) {
  if (pts.size() < 2) return 0.0;
  std::vector<double> sp;
  sp.reserve(pts.size());
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (std::abs(pts[k] - z) <= near_radius)
      sp.push_back(std::abs(pts[k] - pts[k - 1]));
  }
  if (sp.size() < 32) {
    sp.clear();
    for (std::size_t k = 1; k < pts.size(); ++k)
      sp.push_back(std::abs(pts[k] - pts[k - 1]));
  }
  std::size_t mid = sp.size() / 2;
  std::nth_element(sp.begin(), sp.begin() + mid, sp.end());
  double median = sp[mid];
  if (!(median > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log(5.0 * median);
}

std::size_t HitScanResult::hits(std::size_t radius_index) const {
  std::size_t R = 1 + r_grid.size();
  std::size_t h = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (records[i * R + 1 + radius_index] >= 0.0) ++h;
  return h;
}

double HitScanResult::min_dist(std::size_t trace) const {
  return records[trace * (1 + r_grid.size())];
}

long HitScanResult::tau(std::size_t trace, std::size_t radius_index) const {
  return static_cast<long>(records[trace * (1 + r_grid.size()) + 1 + radius_index]);
}

HitScanResult hit_scan(const SimConfig& cfg, cplx z,
                       const std::vector<double>& r_grid) {
  require_sorted_positive(r_grid);
  std::vector<double> eps(r_grid.size());
  for (std::size_t j = 0; j < r_grid.size(); ++j) eps[j] = std::exp(-r_grid[j]);
  double skip_above = 4.0 * eps.front() * (1.0 + 1e-9);
  ScanSpec spec;
  spec.name = "hit_" + fmt(z.real()) + "_" + fmt(z.imag());
  spec.param_string = "hit z=" + fmt_cplx(z) + " r=" + fmt_grid(r_grid);
  spec.record_size = 1 + r_grid.size();
  spec.eval = [&, z, eps, skip_above](const LoewnerChain& chain,
                                      const std::function<const std::vector<cplx>&()>& get,
                                      double* rec) {
    FlowState fs = flow_point(chain, z);
    double crad = crad_from_state(fs);
    if (!fs.swallowed && crad > skip_above) {
      // dist(z, curve) >= crad/4, already beyond every radius in the grid
      rec[0] = 0.25 * crad;
      for (std::size_t j = 0; j < eps.size(); ++j) rec[1 + j] = -1.0;
      return;
    }
    const std::vector<cplx>& pts = get();
    DistanceSweep sw = distance_sweep(pts, z, eps);
    rec[0] = sw.min_dist;
    for (std::size_t j = 0; j < eps.size(); ++j)
      rec[1 + j] = static_cast<double>(sw.tau[j]);
  };
  std::size_t generated = 0;
  HitScanResult out;
  out.r_grid = r_grid;
  out.n = cfg.n_traces;
  out.records = ensemble_scan(cfg, spec, &generated);
  if (generated > 0) check_grid_resolution(cfg, z, r_grid, "hit scan");
  return out;
}

void write_result_csv(const std::string& path, const ExperimentResult& res) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (std::size_t c = 0; c < res.columns.size(); ++c)
    std::fprintf(f, "%s%s", c ? "," : "", res.columns[c].c_str());
  std::fprintf(f, "\n");
  for (const auto& row : res.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      std::fprintf(f, "%s%.17g", c ? "," : "", row[c]);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

ExperimentResult hitting_probability(const SimConfig& cfg, cplx z,
                                     const std::vector<double>& r_grid) {
  double t0 = timer_now();
  HitScanResult scan = hit_scan(cfg, z, r_grid);
  ExperimentResult res;
  res.name = "hitting";
  res.columns = {"r", "hits", "n", "p_hat", "wilson_lo", "wilson_hi", "scaled"};
  double d = cfg.params.dim();
  bool monotone = true;
  std::size_t prev = 0;
  for (std::size_t j = 0; j < r_grid.size(); ++j) {
    std::size_t h = scan.hits(j);
    if (j && h > prev) monotone = false;
    prev = h;
    Interval w = wilson_interval(h, scan.n);
    double scaled = std::exp(r_grid[j] * (2.0 - d)) * w.estimate;
    res.rows.push_back({r_grid[j], static_cast<double>(h),
                        static_cast<double>(scan.n), w.estimate, w.lo, w.hi, scaled});
  }
  res.scalars["monotone"] = monotone ? 1.0 : 0.0;
  res.scalars["n"] = static_cast<double>(scan.n);
  if (!monotone)
    res.notes.push_back("hit counts are not monotone in r; this cannot happen "
                        "and indicates a records bug");
  res.wall_seconds = timer_now() - t0;
  return res;
}

WlsFit regression_from_counts(const std::vector<double>& r_grid,
                              const std::vector<std::size_t>& hits,
                              std::size_t n) {
  if (hits.size() != r_grid.size())
    throw std::invalid_argument("hits and r grid differ in length");
  std::vector<double> x, y, w;
  for (std::size_t j = 0; j < r_grid.size(); ++j) {
    if (hits[j] == 0)
      throw std::invalid_argument("regression requires at least one hit per radius");
    double p = static_cast<double>(hits[j]) / static_cast<double>(n);
    if (hits[j] == n) p = (static_cast<double>(n) - 0.5) / static_cast<double>(n);
    x.push_back(r_grid[j]);
    y.push_back(std::log(p));
    w.push_back(static_cast<double>(n) * p / (1.0 - p));
  }
  return weighted_least_squares(x, y, w);
}

ExperimentResult exponent_regression(const SimConfig& cfg, cplx z,
                                     const std::vector<double>& r_grid) {
  if (r_grid.size() < 3)
    throw std::invalid_argument("exponent regression needs at least 3 radii");
  double t0 = timer_now();
  HitScanResult scan = hit_scan(cfg, z, r_grid);
  std::vector<std::size_t> hits(r_grid.size());
  for (std::size_t j = 0; j < r_grid.size(); ++j) {
    hits[j] = scan.hits(j);
    if (hits[j] < 50)
      throw std::runtime_error("exponent regression: only " + std::to_string(hits[j]) +
                               " hits at r=" + fmt(r_grid[j]) +
                               "; at least 50 per radius are required");
  }
  WlsFit fit = regression_from_counts(r_grid, hits, scan.n);
  GreenModel shape{cfg.params, GreenModel::Form::crad, 1.0};
  double sigma = green_halfplane(z, shape);
  ExperimentResult res;
  res.name = "regression";
  res.columns = {"r", "hits", "n", "log_p", "fitted"};
  for (std::size_t j = 0; j < r_grid.size(); ++j) {
    double p = static_cast<double>(hits[j]) / static_cast<double>(scan.n);
    res.rows.push_back({r_grid[j], static_cast<double>(hits[j]),
                        static_cast<double>(scan.n), std::log(p),
                        fit.intercept + fit.slope * r_grid[j]});
  }
  res.scalars["slope"] = fit.slope;
  res.scalars["se_slope"] = fit.se_slope;
  res.scalars["intercept"] = fit.intercept;
  res.scalars["se_intercept"] = fit.se_intercept;
  res.scalars["target_slope"] = cfg.params.dim() - 2.0;
  res.scalars["c_hat"] = std::exp(fit.intercept) / sigma;
  res.wall_seconds = timer_now() - t0;
  return res;
}

ExperimentResult boundary_exponent(const SimConfig& cfg, double x,
                                   const std::vector<double>& r_grid) {
  if (!(std::abs(x) > 0.0))
    throw std::invalid_argument("boundary point must be away from the origin");
  double t0 = timer_now();
  HitScanResult scan = hit_scan(cfg, cplx(x, 0.0), r_grid);
  ExperimentResult res;
  res.name = "boundary";
  res.columns = {"r", "hits", "n", "p_hat"};
  std::vector<std::size_t> hits(r_grid.size());
  bool enough = true;
  for (std::size_t j = 0; j < r_grid.size(); ++j) {
    hits[j] = scan.hits(j);
    if (hits[j] < 50) enough = false;
    res.rows.push_back({r_grid[j], static_cast<double>(hits[j]),
                        static_cast<double>(scan.n),
                        static_cast<double>(hits[j]) / static_cast<double>(scan.n)});
  }
  double bound = -(4.0 * cfg.params.a() - 1.0) + 0.15;
  res.scalars["decay_bound"] = bound;
  if (!enough || r_grid.size() < 2) {
    res.scalars["inconclusive"] = 1.0;
    res.notes.push_back("fewer than 50 hits at some radius; boundary decay "
                        "cannot be resolved at this ensemble size");
  } else {
    WlsFit fit = regression_from_counts(r_grid, hits, scan.n);
    res.scalars["inconclusive"] = 0.0;
    res.scalars["slope"] = fit.slope;
    res.scalars["se_slope"] = fit.se_slope;
    res.scalars["slope_ok"] = fit.slope <= bound ? 1.0 : 0.0;
  }
  res.wall_seconds = timer_now() - t0;
  return res;
}

ExperimentResult moment_identity(const SimConfig& cfg,
                                 const std::vector<DyadicSquare>& squares,
                                 double r_work, double grid_h, int quad_n) {
  if (cfg.n_traces < 1000)
    throw std::invalid_argument("moment identity needs at least 1000 traces");
  if (squares.empty()) throw std::invalid_argument("no squares given");
  check_resolution(r_work, grid_h);
  double t0 = timer_now();
  double rho = std::exp(-r_work);
  double d = cfg.params.dim();
  std::string sq_desc;
  for (const auto& s : squares)
    sq_desc += std::to_string(s.n) + ":" + std::to_string(s.j) + ":" +
               std::to_string(s.k) + ";";
  ScanSpec spec;
  spec.name = "moment";
  spec.param_string = "moment squares=" + sq_desc + " r=" + fmt(r_work) +
                      " h=" + fmt(grid_h);
  spec.record_size = squares.size();
  spec.eval = [&, rho, d](const LoewnerChain& chain,
                          const std::function<const std::vector<cplx>&()>& get,
                          double* rec) {
    bool all_far = true;
    for (const auto& s : squares) {
      Window b = s.box();
      cplx center(0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
      double reach = 0.5 * s.side() * std::sqrt(2.0) + rho;
      FlowState fs = flow_point(chain, center);
      double crad = crad_from_state(fs);
      if (fs.swallowed || 0.25 * crad <= reach * (1.0 + 1e-9)) {
        all_far = false;
        break;
      }
    }
    if (all_far) {
      for (std::size_t q = 0; q < squares.size(); ++q) rec[q] = 0.0;
      return;
    }
    std::vector<double> mu = occupation_measure(get(), squares, r_work, grid_h, d);
    for (std::size_t q = 0; q < squares.size(); ++q) rec[q] = mu[q];
  };
  std::vector<double> recs = ensemble_scan(cfg, spec);
  GreenModel shape{cfg.params, GreenModel::Form::crad, 1.0};
  ExperimentResult res;
  res.name = "moment";
  res.columns = {"sq_n", "sq_j", "sq_k", "mu_hat", "se", "integral", "ratio",
                 "included"};
  double mass_sum = 0.0, integral_sum = 0.0;
  std::size_t included = 0;
  std::vector<double> vals(cfg.n_traces);
  for (std::size_t q = 0; q < squares.size(); ++q) {
    for (std::size_t i = 0; i < cfg.n_traces; ++i)
      vals[i] = recs[i * squares.size() + q];
    double mean = 0.0, sd = 0.0;
    mean_sd(vals, mean, sd);
    double se = sd / std::sqrt(static_cast<double>(cfg.n_traces));
    double integral = green_integral(std::vector<DyadicSquare>{squares[q]}, shape, quad_n);
    double ratio = mean / integral;
    // squares the ensemble barely touches say nothing about the constant
    bool include = mean > 5.0 * se && se > 0.0;
    if (include) {
      mass_sum += mean;
      integral_sum += integral;
      ++included;
    }
    res.rows.push_back({static_cast<double>(squares[q].n),
                        static_cast<double>(squares[q].j),
                        static_cast<double>(squares[q].k), mean, se, integral,
                        ratio, include ? 1.0 : 0.0});
  }
  res.scalars["n_included"] = static_cast<double>(included);
  if (included)
    res.scalars["pooled_c_hat"] = mass_sum / integral_sum;
  else
    res.notes.push_back("no square passed the minimum-mass filter");
  res.wall_seconds = timer_now() - t0;
  return res;
}

ExperimentResult return_probability(const SimConfig& cfg, cplx z, double r,
                                    double u) {
  if (!(u > 0.0) || !(u < 1.0))
    throw std::invalid_argument("exit fraction u must lie in (0, 1)");
  if (!(r > 0.0)) throw std::invalid_argument("r must be positive");
  double t0 = timer_now();
  double eps = std::exp(-r);
  double eps_out = std::exp(-u * r);
  ScanSpec spec;
  spec.name = "return_" + fmt(z.real()) + "_" + fmt(z.imag());
  spec.param_string =
      "return z=" + fmt_cplx(z) + " r=" + fmt(r) + " u=" + fmt(u);
  spec.record_size = 2;
  spec.eval = [&, z, eps, eps_out](const LoewnerChain& chain,
                                   const std::function<const std::vector<cplx>&()>& get,
                                   double* rec) {
    rec[0] = rec[1] = 0.0;
    FlowState fs = flow_point(chain, z);
    double crad = crad_from_state(fs);
    if (!fs.swallowed && 0.25 * crad > eps * (1.0 + 1e-9)) return;
    const std::vector<cplx>& pts = get();
    int phase = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      double dk = segment_distance(z, seg_start(pts, k), pts[k]);
      if (phase == 0) {
        if (dk <= eps) phase = 1;
      } else if (phase == 1) {
        if (dk >= eps_out) phase = 2;
      } else {
        if (dk <= eps) {
          phase = 3;
          break;
        }
      }
    }
    rec[0] = phase >= 2 ? 1.0 : 0.0;
    rec[1] = phase >= 3 ? 1.0 : 0.0;
  };
  std::size_t generated = 0;
  std::vector<double> recs = ensemble_scan(cfg, spec, &generated);
  if (generated > 0) check_grid_resolution(cfg, z, {r}, "return probability");
  std::size_t n_cond = 0, n_ret = 0;
  for (std::size_t i = 0; i < cfg.n_traces; ++i) {
    if (recs[2 * i] > 0.5) ++n_cond;
    if (recs[2 * i + 1] > 0.5) ++n_ret;
  }
  ExperimentResult res;
  res.name = "return";
  res.columns = {"r", "u", "n", "n_cond", "n_return", "p_return", "wilson_lo",
                 "wilson_hi"};
  res.scalars["n_cond"] = static_cast<double>(n_cond);
  if (n_cond < 100) {
    res.scalars["inconclusive"] = 1.0;
    res.rows.push_back({r, u, static_cast<double>(cfg.n_traces),
                        static_cast<double>(n_cond), static_cast<double>(n_ret),
                        0.0, 0.0, 1.0});
    res.notes.push_back("only " + std::to_string(n_cond) +
                        " traces satisfy the conditioning event; at least 100 "
                        "are needed for a meaningful estimate");
  } else {
    Interval w = wilson_interval(n_ret, n_cond);
    res.scalars["inconclusive"] = 0.0;
    res.scalars["p_return"] = w.estimate;
    res.rows.push_back({r, u, static_cast<double>(cfg.n_traces),
                        static_cast<double>(n_cond), static_cast<double>(n_ret),
                        w.estimate, w.lo, w.hi});
  }
  res.wall_seconds = timer_now() - t0;
  return res;
}

ExperimentResult q_covariance(const SimConfig& cfg, cplx z, cplx w,
                              const std::vector<double>& r_grid, double lambda,
                              double delta) {
  require_sorted_positive(r_grid);
  double d = cfg.params.dim();
  // validates lambda and delta ranges up front
  q_increment_from_distance(1.0, r_grid.front(), lambda, delta, d);
  double t0 = timer_now();
  double reach = std::exp(lambda - r_grid.front());
  ScanSpec spec;
  spec.name = "qcov";
  spec.param_string = "qcov z=" + fmt_cplx(z) + " w=" + fmt_cplx(w) +
                      " r=" + fmt_grid(r_grid);
  spec.record_size = 2;
  spec.eval = [&, z, w, reach](const LoewnerChain& chain,
                               const std::function<const std::vector<cplx>&()>& get,
                               double* rec) {
    FlowState fz = flow_point(chain, z);
    FlowState fw = flow_point(chain, w);
    double cz = crad_from_state(fz);
    double cw = crad_from_state(fw);
    bool far_z = !fz.swallowed && 0.25 * cz > reach * (1.0 + 1e-9);
    bool far_w = !fw.swallowed && 0.25 * cw > reach * (1.0 + 1e-9);
    if (far_z || far_w) {
      // lower bounds suffice: the far factor kills every product in the grid
      rec[0] = 0.25 * cz;
      rec[1] = 0.25 * cw;
      if (fz.swallowed) rec[0] = 0.0;
      if (fw.swallowed) rec[1] = 0.0;
      return;
    }
    const std::vector<cplx>& pts = get();
    rec[0] = distance_sweep(pts, z, {}).min_dist;
    rec[1] = distance_sweep(pts, w, {}).min_dist;
  };
  std::size_t generated = 0;
  std::vector<double> recs = ensemble_scan(cfg, spec, &generated);
  if (generated > 0) check_grid_resolution(cfg, z, r_grid, "q covariance");
  std::size_t N = cfg.n_traces;
  std::size_t K = r_grid.size();
  std::vector<std::vector<double>> prod(K, std::vector<double>(N));
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t i = 0; i < N; ++i) {
      double qz = q_increment_from_distance(recs[2 * i], r_grid[j], lambda, delta, d);
      double qw = q_increment_from_distance(recs[2 * i + 1], r_grid[j], lambda, delta, d);
      prod[j][i] = qz * qw;
    }
  }
  ExperimentResult res;
  res.name = "qcov";
  res.columns = {"r", "mean_product", "se", "n"};
  std::vector<double> means(K);
  for (std::size_t j = 0; j < K; ++j) {
    double mean = 0.0, sd = 0.0;
    mean_sd(prod[j], mean, sd);
    means[j] = mean;
    res.rows.push_back({r_grid[j], mean, sd / std::sqrt(static_cast<double>(N)),
                        static_cast<double>(N)});
  }
  std::size_t pairs_ok = 0;
  double z90 = normal_quantile(0.90);
  for (std::size_t j = 0; j + 1 < K; ++j) {
    std::vector<double> diff(N);
    for (std::size_t i = 0; i < N; ++i) diff[i] = prod[j + 1][i] - prod[j][i];
    double md = 0.0, sdd = 0.0;
    mean_sd(diff, md, sdd);
    double se = sdd / std::sqrt(static_cast<double>(N));
    if (md <= z90 * se) ++pairs_ok;
  }
  double bound = q_bound_constant(lambda, delta, d);
  res.scalars["pairs_total"] = static_cast<double>(K - 1);
  res.scalars["pairs_nonincreasing"] = static_cast<double>(pairs_ok);
  res.scalars["monotone_ok"] = pairs_ok == K - 1 ? 1.0 : 0.0;
  res.scalars["spearman"] = K >= 2 ? spearman_rho(r_grid, means) : 0.0;
  res.scalars["product_bound"] = bound * bound;
  res.wall_seconds = timer_now() - t0;
  return res;
}

cplx parse_complex(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw ConfigError("empty complex literal");
  auto bad = [&]() {
    return ConfigError("cannot parse complex number from '" + text + "'");
  };
  auto parse_real = [&](const std::string& tok) {
    if (tok.empty()) throw bad();
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw bad();
    return v;
  };
  std::size_t split = std::string::npos;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E')
      split = i;
  }
  auto imag_value = [&](std::string tok) {
    if (tok.empty() || tok.back() != 'i') throw bad();
    tok.pop_back();
    if (tok.empty() || tok == "+") return 1.0;
    if (tok == "-") return -1.0;
    return parse_real(tok);
  };
  if (split == std::string::npos) {
    if (s.back() == 'i') return cplx(0.0, imag_value(s));
    return cplx(parse_real(s), 0.0);
  }
  if (s.back() != 'i') {
    // forms like 1e-3 with the sign inside the exponent already excluded;
    // a trailing real part after a split is not a complex literal
    if (s.find('i') != std::string::npos) throw bad();
    return cplx(parse_real(s), 0.0);
  }
  return cplx(parse_real(s.substr(0, split)), imag_value(s.substr(split)));
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::string t;
    for (char c : tok)
      if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
      throw ConfigError("cannot parse number '" + tok + "' in list '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty number list '" + text + "'");
  return out;
}

std::vector<DyadicSquare> parse_square_list(const std::string& text) {
  std::vector<DyadicSquare> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ';')) {
    std::string t;
    for (char c : tok)
      if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t.empty()) continue;
    DyadicSquare sq;
    if (std::sscanf(t.c_str(), "%d:%ld:%ld", &sq.n, &sq.j, &sq.k) != 3)
      throw ConfigError("cannot parse square '" + tok +
                        "'; expected n:j:k with integers");
    out.push_back(sq);
  }
  if (out.empty()) throw ConfigError("empty square list '" + text + "'");
  return out;
}

namespace {

struct KvChecker {
  const ExperimentSpec& spec;
  std::vector<std::string>& issues;
  std::vector<std::string> seen;

  const std::string* get(const std::string& key, bool required) {
    seen.push_back(key);
    auto it = spec.kv.find(key);
    if (it == spec.kv.end()) {
      if (required)
        issues.push_back("experiment '" + spec.name + "': missing key '" + key + "'");
      return nullptr;
    }
    return &it->second;
  }

  template <class F>
  void parse(const std::string& key, bool required, F&& f) {
    const std::string* v = get(key, required);
    if (!v) return;
    try {
      f(*v);
    } catch (const std::exception& e) {
      issues.push_back("experiment '" + spec.name + "', key '" + key + "': " + e.what());
    }
  }

  void finish() {
    for (const auto& [k, v] : spec.kv) {
      (void)v;
      if (std::find(seen.begin(), seen.end(), k) == seen.end())
        issues.push_back("experiment '" + spec.name + "': unknown key '" + k + "'");
    }
  }
};

void check_experiment(const ExperimentSpec& spec, std::vector<std::string>& issues) {
  static const std::vector<std::string> kTypes = {"hitting", "regression", "boundary",
                                                  "moment", "return", "qcov"};
  if (std::find(kTypes.begin(), kTypes.end(), spec.type) == kTypes.end()) {
    std::string all;
    for (const auto& t : kTypes) all += (all.empty() ? "" : ", ") + t;
    issues.push_back("experiment '" + spec.name + "': unknown type '" + spec.type +
                     "' (expected one of " + all + ")");
    return;
  }
  KvChecker c{spec, issues, {}};
  auto want_complex = [&](const std::string& key) {
    c.parse(key, true, [](const std::string& v) { parse_complex(v); });
  };
  auto want_grid = [&](const std::string& key) {
    c.parse(key, true, [](const std::string& v) {
      require_sorted_positive(parse_double_list(v));
    });
  };
  auto want_positive = [&](const std::string& key, bool required) {
    c.parse(key, required, [](const std::string& v) {
      std::vector<double> one = parse_double_list(v);
      if (one.size() != 1 || !(one[0] > 0.0))
        throw ConfigError("expected one positive number");
    });
  };
  if (spec.type == "hitting" || spec.type == "regression") {
    want_complex("z");
    want_grid("r_grid");
  } else if (spec.type == "boundary") {
    want_positive("x", true);
    want_grid("r_grid");
  } else if (spec.type == "moment") {
    c.parse("squares", true, [](const std::string& v) { parse_square_list(v); });
    want_positive("r_work", true);
    want_positive("grid_h", true);
    want_positive("quad_n", false);
  } else if (spec.type == "return") {
    want_complex("z");
    want_positive("r", true);
    c.parse("u", true, [](const std::string& v) {
      std::vector<double> one = parse_double_list(v);
      if (one.size() != 1 || !(one[0] > 0.0) || !(one[0] < 1.0))
        throw ConfigError("expected one number in (0, 1)");
    });
  } else if (spec.type == "qcov") {
    want_complex("z");
    want_complex("w");
    want_grid("r_grid");
    want_positive("lambda", true);
    want_positive("delta", true);
  }
  c.finish();
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::vector<std::string> issues;
  std::string section;
  std::string exp_name;
  std::map<std::string, std::string> params_kv, ensemble_kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    std::string where = origin + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') {
        issues.push_back(where + ": unterminated section header");
        section.clear();
        continue;
      }
      std::string name = trim(t.substr(1, t.size() - 2));
      if (name == "params" || name == "ensemble") {
        section = name;
      } else if (name.rfind("experiment", 0) == 0) {
        exp_name = trim(name.substr(10));
        if (exp_name.empty()) {
          issues.push_back(where + ": experiment section needs a name");
          section.clear();
          continue;
        }
        for (const auto& e : cfg.experiments)
          if (e.name == exp_name)
            issues.push_back(where + ": duplicate experiment name '" + exp_name + "'");
        cfg.experiments.push_back({exp_name, "", {}});
        section = "experiment";
      } else {
        issues.push_back(where + ": unknown section '" + name + "'");
        section.clear();
      }
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      issues.push_back(where + ": expected key = value");
      continue;
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      issues.push_back(where + ": empty key");
      continue;
    }
    if (section == "params") {
      params_kv[key] = value;
    } else if (section == "ensemble") {
      ensemble_kv[key] = value;
    } else if (section == "experiment") {
      if (key == "type")
        cfg.experiments.back().type = value;
      else
        cfg.experiments.back().kv[key] = value;
    } else {
      issues.push_back(where + ": key outside any section");
    }
  }

  auto take_number = [&](std::map<std::string, std::string>& kv, const std::string& sec,
                         const std::string& key, bool required, auto&& apply) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      if (required) issues.push_back("[" + sec + "]: missing key '" + key + "'");
      return;
    }
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end != it->second.c_str() + it->second.size() || it->second.empty()) {
      issues.push_back("[" + sec + "]: cannot parse '" + key + " = " + it->second + "'");
    } else {
      apply(v);
    }
    kv.erase(it);
  };

  take_number(params_kv, "params", "kappa", true, [&](double v) {
    if (!(v > 0.0) || !(v <= 8.0))
      issues.push_back("[params]: kappa must lie in (0, 8]");
    else
      cfg.sim.params.kappa = v;
  });
  take_number(params_kv, "params", "dt", true, [&](double v) {
    if (!(v > 0.0))
      issues.push_back("[params]: dt must be positive");
    else
      cfg.sim.dt = v;
  });
  take_number(params_kv, "params", "steps", true, [&](double v) {
    if (!(v >= 1.0) || v != std::floor(v))
      issues.push_back("[params]: steps must be a positive integer");
    else
      cfg.sim.steps = static_cast<std::size_t>(v);
  });
  for (const auto& [k, v] : params_kv) {
    (void)v;
    issues.push_back("[params]: unknown key '" + k + "'");
  }

  take_number(ensemble_kv, "ensemble", "n_traces", true, [&](double v) {
    if (!(v >= 1.0) || v != std::floor(v))
      issues.push_back("[ensemble]: n_traces must be a positive integer");
    else
      cfg.sim.n_traces = static_cast<std::size_t>(v);
  });
  take_number(ensemble_kv, "ensemble", "master_seed", true, [&](double v) {
    if (!(v >= 0.0) || v != std::floor(v))
      issues.push_back("[ensemble]: master_seed must be a nonnegative integer");
    else
      cfg.sim.master_seed = static_cast<std::uint64_t>(v);
  });
  if (auto it = ensemble_kv.find("cache_dir"); it != ensemble_kv.end()) {
    cfg.sim.cache_dir = it->second;
    ensemble_kv.erase(it);
  }
  if (auto it = ensemble_kv.find("out_dir"); it != ensemble_kv.end()) {
    cfg.out_dir = it->second;
    ensemble_kv.erase(it);
  }
  for (const auto& [k, v] : ensemble_kv) {
    (void)v;
    issues.push_back("[ensemble]: unknown key '" + k + "'");
  }

  if (cfg.experiments.empty())
    issues.push_back(origin + ": no experiment sections found");
  for (const auto& e : cfg.experiments) {
    if (e.type.empty())
      issues.push_back("experiment '" + e.name + "': missing 'type'");
    else
      check_experiment(e, issues);
  }

  if (!issues.empty()) {
    std::string msg = "configuration errors in " + origin + ":";
    for (const auto& i : issues) msg += "\n  - " + i;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str(), path);
}

ExperimentResult run_one_experiment(const SimConfig& cfg,
                                    const ExperimentSpec& spec) {
  auto val = [&](const std::string& key) { return spec.kv.at(key); };
  ExperimentResult res;
  if (spec.type == "hitting") {
    res = hitting_probability(cfg, parse_complex(val("z")),
                              parse_double_list(val("r_grid")));
  } else if (spec.type == "regression") {
    res = exponent_regression(cfg, parse_complex(val("z")),
                              parse_double_list(val("r_grid")));
  } else if (spec.type == "boundary") {
    res = boundary_exponent(cfg, parse_double_list(val("x"))[0],
                            parse_double_list(val("r_grid")));
  } else if (spec.type == "moment") {
    int quad_n = 64;
    if (auto it = spec.kv.find("quad_n"); it != spec.kv.end())
      quad_n = static_cast<int>(parse_double_list(it->second)[0]);
    res = moment_identity(cfg, parse_square_list(val("squares")),
                          parse_double_list(val("r_work"))[0],
                          parse_double_list(val("grid_h"))[0], quad_n);
  } else if (spec.type == "return") {
    res = return_probability(cfg, parse_complex(val("z")),
                             parse_double_list(val("r"))[0],
                             parse_double_list(val("u"))[0]);
  } else if (spec.type == "qcov") {
    res = q_covariance(cfg, parse_complex(val("z")), parse_complex(val("w")),
                       parse_double_list(val("r_grid")),
                       parse_double_list(val("lambda"))[0],
                       parse_double_list(val("delta"))[0]);
  } else {
    throw ConfigError("experiment '" + spec.name + "': unknown type '" + spec.type + "'");
  }
  res.name = spec.name;
  return res;
}

std::string params_snapshot(const SimConfig& cfg) {
  std::string s = "params: kappa=" + fmt(cfg.params.kappa);
  s += " a=" + fmt(cfg.params.a());
  s += " d=" + fmt(cfg.params.dim());
  s += " dt=" + fmt(cfg.dt);
  s += " steps=" + std::to_string(cfg.steps);
  s += " T=" + fmt(total_time(cfg));
  s += " n_traces=" + std::to_string(cfg.n_traces);
  s += " master_seed=" + std::to_string(cfg.master_seed);
  return s;
}

std::string manifest_json(const RunConfig& cfg,
                          const std::vector<ExperimentResult>& results) {
  nlohmann::ordered_json m;
  m["build"] = SLE_BUILD_REV;
  m["params"]["kappa"] = cfg.sim.params.kappa;
  m["params"]["a"] = cfg.sim.params.a();
  m["params"]["d"] = cfg.sim.params.dim();
  m["params"]["dt"] = cfg.sim.dt;
  m["params"]["steps"] = cfg.sim.steps;
  m["params"]["total_time"] = total_time(cfg.sim);
  m["ensemble"]["n_traces"] = cfg.sim.n_traces;
  m["ensemble"]["master_seed"] = cfg.sim.master_seed;
  m["ensemble"]["cache_dir"] = cfg.sim.cache_dir;
  m["experiments"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    nlohmann::ordered_json e;
    e["name"] = results[i].name;
    e["type"] = i < cfg.experiments.size() ? cfg.experiments[i].type : "";
    nlohmann::ordered_json settings;
    if (i < cfg.experiments.size())
      for (const auto& [k, v] : cfg.experiments[i].kv) settings[k] = v;
    e["settings"] = settings;
    e["csv"] = results[i].name + ".csv";
    nlohmann::ordered_json scalars;
    for (const auto& [k, v] : results[i].scalars) scalars[k] = v;
    e["scalars"] = scalars;
    e["notes"] = results[i].notes;
    m["experiments"].push_back(e);
  }
  return m.dump(2) + "\n";
}

int run_experiments(const RunConfig& cfg, std::ostream& log) {
  validate_sim_config(cfg.sim);
  std::filesystem::create_directories(cfg.out_dir);
  log << params_snapshot(cfg.sim) << "\n";
  std::vector<ExperimentResult> results;
  for (const auto& spec : cfg.experiments) {
    try {
      ExperimentResult res = run_one_experiment(cfg.sim, spec);
      log << "experiment " << spec.name << " (" << spec.type << ") finished in "
          << res.wall_seconds << " s";
      for (const auto& [k, v] : res.scalars) log << "  " << k << "=" << v;
      log << "\n";
      for (const auto& note : res.notes) log << "  note: " << note << "\n";
      write_result_csv(cfg.out_dir + "/" + res.name + ".csv", res);
      results.push_back(std::move(res));
    } catch (const ResolutionError& e) {
      log << "experiment " << spec.name
          << " rejected by the resolution rule: " << e.what() << "\n";
      return 3;
    }
  }
  std::ofstream mf(cfg.out_dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot write manifest in " + cfg.out_dir);
  mf << manifest_json(cfg, results);
  return 0;
}

}  // namespace sle
