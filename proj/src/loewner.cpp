#include "sle/loewner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sle/rng.hpp"
#include "sle/trace_eval.hpp"

namespace sle {

void validate_params(const SleParams& p) {
  if (!(p.kappa > 0.0) || !(p.kappa <= 8.0))
    throw std::invalid_argument("kappa must lie in (0, 8]");
}

DrivingPath sample_driving(double T, double dt, std::uint64_t seed) {
  if (!(T > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("sample_driving: T and dt must be positive");
  std::size_t n = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  if (n == 0) n = 1;
  return sample_driving_n(n, dt, seed);
}

DrivingPath sample_driving_n(std::size_t steps, double dt, std::uint64_t seed) {
  if (steps == 0 || !(dt > 0.0))
    throw std::invalid_argument("sample_driving_n: steps and dt must be positive");
  std::size_t n = steps;
  DrivingPath path;
  path.dt = dt;
  path.u.resize(n + 1);
  path.u[0] = 0.0;
  GaussianRng rng(seed);
  double sd = std::sqrt(dt);
  for (std::size_t k = 1; k <= n; ++k) path.u[k] = path.u[k - 1] + sd * rng.normal();
  return path;
}

LoewnerChain chain_from_driving(const DrivingPath& path, const SleParams& p,
                                std::uint64_t seed) {
  validate_params(p);
  if (path.u.size() < 2) throw std::invalid_argument("driving path has no steps");
  LoewnerChain chain;
  chain.a = p.a();
  chain.dt = path.dt;
  chain.kappa = p.kappa;
  chain.seed = seed;
  chain.u.assign(path.u.begin() + 1, path.u.end());
  return chain;
}

Trace compute_trace(const LoewnerChain& chain, TraceMode mode) {
  Trace tr;
  tr.dt = chain.dt;
  tr.kappa = chain.kappa;
  tr.seed = chain.seed;
  std::size_t n = chain.size();
  tr.pts.resize(n);
  if (n == 0) return tr;

  if (mode == TraceMode::serial) {
    double lift = std::sqrt(2.0 * chain.a * chain.dt);
    for (std::size_t k = 0; k < n; ++k) {
      cplx w(chain.u[k], lift);
      for (std::size_t j = k; j-- > 0;)
        w = inverse_slit_step(w, chain.dt, chain.u[j], chain.a);
      tr.pts[k] = w;
    }
  } else {
    compute_trace_blocked(chain, tr.pts);
  }
  return tr;
}

namespace {

double swallow_eps(cplx z0) {
  return 1e-9 * std::max(1.0, std::abs(z0));
}

}  // namespace

FlowState flow_point(const LoewnerChain& chain, cplx z0) {
  FlowState st;
  st.g = z0;
  double eps = swallow_eps(z0);
  double q = 2.0 * chain.a * chain.dt;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    double u = chain.u[k];
    cplx w = st.g - u;
    if (w.imag() <= 0.0 && w.real() * w.real() < q) {
      st.swallowed = true;
      st.swallowed_at = chain.dt * static_cast<double>(k + 1);
      return st;
    }
    cplx dg;
    st.g = slit_step_with_deriv(st.g, chain.dt, u, chain.a, &dg);
    st.log_deriv += std::log(dg);
    st.t = chain.dt * static_cast<double>(k + 1);
    if (std::abs(st.g - cplx(u, 0.0)) < eps) {
      st.swallowed = true;
      st.swallowed_at = st.t;
      return st;
    }
  }
  return st;
}

std::vector<FlowSample> flow_profile(const LoewnerChain& chain, cplx z0) {
  std::vector<FlowSample> out;
  out.reserve(chain.size());
  cplx g = z0;
  double logd = 0.0;
  double eps = swallow_eps(z0);
  double q = 2.0 * chain.a * chain.dt;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    double u = chain.u[k];
    cplx w = g - u;
    if (w.imag() <= 0.0 && w.real() * w.real() < q) break;
    cplx dg;
    g = slit_step_with_deriv(g, chain.dt, u, chain.a, &dg);
    if (std::abs(g - cplx(u, 0.0)) < eps) break;
    logd += std::log(std::abs(dg));
    FlowSample s;
    s.g = g;
    s.log_deriv_abs = logd;
    s.crad = 2.0 * g.imag() / std::exp(logd);
    out.push_back(s);
  }
  return out;
}

CapacityDiagnostic capacity_diagnostic(const LoewnerChain& chain, double R) {
  cplx z(0.0, R);
  cplx g = z;
  for (std::size_t k = 0; k < chain.size(); ++k)
    g = slit_step(g, chain.dt, chain.u[k], chain.a);
  double at = chain.a * chain.total_time();
  cplx expected = z + at / z;
  double umax = 0.0;
  for (double u : chain.u) umax = std::max(umax, std::abs(u));
  CapacityDiagnostic d;
  d.deviation = std::abs(g - expected);
  d.bound = (2.0 * at * (umax + std::sqrt(at)) + at * at) / (R * R);
  d.ok = d.deviation <= d.bound;
  return d;
}

namespace {

void write_sidecar(const std::string& path, double kappa, std::uint64_t seed,
                   std::size_t n, double dt) {
  nlohmann::json j;
  j["kappa"] = kappa;
  j["seed"] = seed;
  j["N"] = n;
  j["dt"] = dt;
  std::ofstream f(path + ".json");
  if (!f) throw std::runtime_error("cannot write " + path + ".json");
  f << j.dump(2) << "\n";
}

nlohmann::json read_sidecar(const std::string& path) {
  std::ifstream f(path + ".json");
  if (!f) throw std::runtime_error("missing sidecar " + path + ".json");
  nlohmann::json j;
  f >> j;
  return j;
}

}  // namespace

void write_trace_csv(const Trace& tr, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "t,re,im\n");
  for (std::size_t k = 0; k < tr.pts.size(); ++k)
    std::fprintf(f, "%.17g,%.17g,%.17g\n", tr.dt * static_cast<double>(k + 1),
                 tr.pts[k].real(), tr.pts[k].imag());
  std::fclose(f);
  write_sidecar(path, tr.kappa, tr.seed, tr.pts.size(), tr.dt);
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty trace file " + path);
  Trace tr;
  double t = 0.0;
  while (std::getline(f, line)) {
    double re, im;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &t, &re, &im) != 3)
      throw std::runtime_error("bad trace row in " + path + ": " + line);
    tr.pts.emplace_back(re, im);
  }
  if (tr.pts.size() > 1)
    tr.dt = t / static_cast<double>(tr.pts.size());
  try {
    auto j = read_sidecar(path);
    tr.kappa = j.value("kappa", tr.kappa);
    tr.seed = j.value("seed", std::uint64_t{0});
    tr.dt = j.value("dt", tr.dt);
  } catch (const std::runtime_error&) {
    // sidecar optional on read; dt recovered from the time column
  }
  return tr;
}

void write_chain_csv(const LoewnerChain& chain, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "dt,u\n");
  for (std::size_t k = 0; k < chain.size(); ++k)
    std::fprintf(f, "%.17g,%.17g\n", chain.dt, chain.u[k]);
  std::fclose(f);
  write_sidecar(path, chain.kappa, chain.seed, chain.size(), chain.dt);
}

LoewnerChain read_chain_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty chain file " + path);
  LoewnerChain chain;
  while (std::getline(f, line)) {
    double dt, u;
    if (std::sscanf(line.c_str(), "%lg,%lg", &dt, &u) != 2)
      throw std::runtime_error("bad chain row in " + path + ": " + line);
    chain.dt = dt;
    chain.u.push_back(u);
  }
  auto j = read_sidecar(path);
  chain.kappa = j.at("kappa").get<double>();
  chain.seed = j.value("seed", std::uint64_t{0});
  chain.a = 2.0 / chain.kappa;
  return chain;
}

}  // namespace sle
