#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "sle/greens.hpp"
#include "sle/harness.hpp"
#include "sle/loewner.hpp"
#include "sle/minkowski.hpp"
#include "sle/natural_param.hpp"
#include "sle/radial.hpp"
#include "sle/rng.hpp"
#include "sle/stats.hpp"

#ifndef SLE_BUILD_REV
#define SLE_BUILD_REV "unknown"
#endif

namespace {

using sle::cplx;

constexpr int kExitUsage = 2;
constexpr int kExitResolution = 3;
constexpr int kExitIo = 4;

void require_input(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw std::ios_base::failure("input file does not exist: " + path);
}

void require_writable(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path() && !std::filesystem::exists(p.parent_path()))
    throw std::ios_base::failure("output directory does not exist: " +
                                 p.parent_path().string());
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw std::ios_base::failure("cannot open for writing: " + path);
  std::fclose(f);
}

void print_params(const sle::SleParams& p) {
  std::printf("params: kappa=%.17g a=%.17g d=%.17g\n", p.kappa, p.a(), p.dim());
}

std::vector<double> make_r_grid(double r_min, double r_max, double r_step) {
  if (!(r_step > 0.0)) throw CLI::ValidationError("--r-step must be positive");
  if (!(r_max >= r_min)) throw CLI::ValidationError("--r-max must be >= --r-min");
  std::vector<double> grid;
  for (double r = r_min; r <= r_max + 1e-12; r += r_step) grid.push_back(r);
  return grid;
}

struct ScaleCtx {
  double b = 1.0;
};

cplx scale_map(cplx z, const void* ctx) {
  return static_cast<const ScaleCtx*>(ctx)->b * z;
}

double scale_deriv(cplx, const void* ctx) {
  return static_cast<const ScaleCtx*>(ctx)->b;
}

int run_simulate(double kappa, std::size_t steps, double dt, std::uint64_t seed,
                 const std::string& out) {
  require_writable(out);
  sle::SleParams p{kappa};
  sle::validate_params(p);
  print_params(p);
  std::printf("params: dt=%.17g steps=%zu seed=%llu\n", dt, steps,
              static_cast<unsigned long long>(seed));
  sle::DrivingPath path = sle::sample_driving_n(steps, dt, seed);
  sle::LoewnerChain chain = sle::chain_from_driving(path, p, seed);
  sle::write_chain_csv(chain, out);
  std::printf("wrote %s (%zu steps, total time %.17g)\n", out.c_str(), chain.size(),
              chain.total_time());
  return 0;
}

int run_trace(const std::string& chain_path, double kappa, std::size_t steps,
              double dt, std::uint64_t seed, const std::string& mode,
              const std::string& out) {
  require_writable(out);
  sle::LoewnerChain chain;
  if (!chain_path.empty()) {
    require_input(chain_path);
    chain = sle::read_chain_csv(chain_path);
  } else {
    sle::SleParams p{kappa};
    sle::validate_params(p);
    chain = sle::chain_from_driving(sle::sample_driving_n(steps, dt, seed), p, seed);
  }
  sle::SleParams p{chain.kappa};
  print_params(p);
  std::printf("params: dt=%.17g steps=%zu seed=%llu mode=%s\n", chain.dt,
              chain.size(), static_cast<unsigned long long>(chain.seed), mode.c_str());
  sle::TraceMode tm =
      mode == "serial" ? sle::TraceMode::serial : sle::TraceMode::blocked;
  sle::Trace tr = sle::compute_trace(chain, tm);
  sle::write_trace_csv(tr, out);
  std::printf("wrote %s (%zu points)\n", out.c_str(), tr.pts.size());
  return 0;
}

int run_content(const std::string& trace_path, double r_min, double r_max,
                double r_step, double grid_h, double margin, double lambda,
                const std::string& z_text, const std::string& out) {
  require_input(trace_path);
  if (!out.empty()) require_writable(out);
  sle::Trace tr = sle::read_trace_csv(trace_path);
  sle::SleParams p{tr.kappa};
  print_params(p);
  double h = grid_h > 0.0 ? grid_h : std::exp(-r_max) / 8.0;
  std::printf("params: r=[%.17g,%.17g] step=%.17g grid_h=%.17g margin=%.17g\n",
              r_min, r_max, r_step, h, margin);
  sle::check_resolution(r_max, h);
  sle::Shape shape = sle::shape_from_trace(tr.pts);
  sle::Window win = sle::trace_window(tr.pts, margin);
  std::vector<double> grid = make_r_grid(r_min, r_max, r_step);
  sle::ContentProfile profile = sle::content_profile(shape, grid, win, h, p.dim());
  if (!out.empty()) {
    sle::write_content_profile_csv(out, profile);
    std::printf("wrote %s (%zu radii)\n", out.c_str(), profile.r_grid.size());
  } else {
    for (std::size_t i = 0; i < profile.r_grid.size(); ++i)
      std::printf("%.17g,%.17g\n", profile.r_grid[i], profile.values[i]);
  }
  if (!z_text.empty()) {
    cplx z = sle::parse_complex(z_text);
    sle::SmoothedSample s = sle::smoothed_content(z, shape, r_max, lambda, p.dim());
    std::printf("smoothed z=%.17g%+.17gi r=%.17g lambda=%.17g value=%.17g\n",
                z.real(), z.imag(), s.r, s.lambda, s.value);
  }
  return 0;
}

int run_green_eval(double kappa, const std::string& z_text, const std::string& form,
                   double c_hat, bool shape_only, bool disk,
                   const std::string& w1_text, const std::string& w2_text) {
  sle::GreenModel model{sle::SleParams{kappa},
                        form == "crad" ? sle::GreenModel::Form::crad
                                       : sle::GreenModel::Form::im,
                        shape_only ? 1.0 : c_hat};
  sle::validate_params(model.params);
  print_params(model.params);
  std::printf("params: form=%s c_hat=%.17g\n", form.c_str(), model.c_hat);
  cplx z = sle::parse_complex(z_text);
  double value;
  if (disk) {
    value = sle::green_disk(z, sle::parse_complex(w1_text),
                            sle::parse_complex(w2_text), model);
  } else {
    value = sle::green_halfplane(z, model);
  }
  std::printf("%.12g\n", value);
  return 0;
}

int run_green_integrate(double kappa, const std::string& window_text,
                        const std::string& squares_text, const std::string& form,
                        double c_hat, int quad_n) {
  sle::GreenModel model{sle::SleParams{kappa},
                        form == "crad" ? sle::GreenModel::Form::crad
                                       : sle::GreenModel::Form::im,
                        c_hat};
  sle::validate_params(model.params);
  print_params(model.params);
  std::printf("params: form=%s c_hat=%.17g quad_n=%d\n", form.c_str(), model.c_hat,
              quad_n);
  double value;
  if (!window_text.empty()) {
    std::vector<double> v = sle::parse_double_list(window_text);
    if (v.size() != 4)
      throw CLI::ValidationError("--window expects x0,x1,y0,y1");
    value = sle::green_integral(sle::Window{v[0], v[1], v[2], v[3]}, model, quad_n);
  } else if (!squares_text.empty()) {
    value = sle::green_integral(sle::parse_square_list(squares_text), model, quad_n);
  } else {
    throw CLI::ValidationError("green integrate needs --window or --squares");
  }
  std::printf("%.12g\n", value);
  return 0;
}

int run_green_comb(double kappa, int terms, int base) {
  sle::SleParams p{kappa};
  sle::validate_params(p);
  print_params(p);
  std::printf("params: terms=%d base=%d\n", terms, base);
  sle::GreenModel model{p, sle::GreenModel::Form::crad, 1.0};
  sle::CombDomain comb = sle::CombDomain::power_law(terms);
  double s_base = sle::comb_partial_sum(comb, base, model);
  double s_full = sle::comb_partial_sum(comb, terms, model);
  std::printf("S(%d)=%.12g\nS(%d)=%.12g\nratio=%.12g\n", base, s_base, terms, s_full,
              s_full / s_base);
  return 0;
}

int run_radial_bessel(double kappa, double theta0, double t_max, double dt_hat,
                      std::uint64_t seed, const std::string& mode,
                      const std::string& out) {
  require_writable(out);
  sle::SleParams p{kappa};
  sle::validate_params(p);
  print_params(p);
  std::printf("params: theta0=%.17g t_max=%.17g dt_hat=%.17g seed=%llu mode=%s\n",
              theta0, t_max, dt_hat, static_cast<unsigned long long>(seed),
              mode.c_str());
  sle::DriftMode dm = mode == "two-sided" ? sle::DriftMode::two_sided
                                          : sle::DriftMode::chordal;
  sle::RadialPath rp = sle::simulate_to_absorption_or(t_max, theta0, dm, dt_hat,
                                                      seed, p);
  sle::write_radial_path_csv(out, rp);
  if (rp.absorbed)
    std::printf("absorbed at t_hat=%.17g\n", rp.absorption_t_hat);
  else
    std::printf("survived to t_hat=%.17g\n", t_max);
  return 0;
}

int run_radial_stationary(double kappa, std::size_t samples, double dt_hat,
                          double spacing, double burn_in, double theta0,
                          std::uint64_t seed, const std::string& out) {
  if (!out.empty()) require_writable(out);
  sle::SleParams p{kappa};
  sle::validate_params(p);
  print_params(p);
  std::printf(
      "params: samples=%zu dt_hat=%.17g spacing=%.17g burn_in=%.17g seed=%llu\n",
      samples, dt_hat, spacing, burn_in, static_cast<unsigned long long>(seed));
  sle::StationaryDensity density = sle::stationary_density(p);
  std::printf("normalizer=%.12g exponent=%.12g\n", density.normalizer,
              density.exponent);
  std::vector<double> draws;
  draws.reserve(samples);
  sle::GaussianRng rng(seed);
  sle::AngleState st{theta0, 0.0, true};
  long stride = std::max(1l, std::lround(spacing / dt_hat));
  long burn = std::max(0l, std::lround(burn_in / dt_hat));
  long k = 0;
  while (draws.size() < samples) {
    st = sle::step_angle(st, dt_hat, sle::DriftMode::two_sided, rng.normal(), p);
    if (!st.alive) {
      st = sle::AngleState{theta0, st.t_hat, true};
      k = 0;
      continue;
    }
    ++k;
    if (k >= burn && (k - burn) % stride == 0) draws.push_back(st.theta);
  }
  double ks = sle::ks_statistic(draws, [&](double x) { return density.cdf(x); });
  std::printf("ks=%.12g\n", ks);
  if (!out.empty()) {
    std::FILE* f = std::fopen(out.c_str(), "w");
    std::fprintf(f, "theta\n");
    for (double v : draws) std::fprintf(f, "%.17g\n", v);
    std::fclose(f);
    std::printf("wrote %s (%zu samples)\n", out.c_str(), draws.size());
  }
  return 0;
}

int run_radial_coupling(double kappa, double theta_a, double theta_b, double dt_hat,
                        double horizon, std::size_t paths, std::uint64_t seed,
                        const std::string& out) {
  if (!out.empty()) require_writable(out);
  sle::SleParams p{kappa};
  sle::validate_params(p);
  print_params(p);
  std::printf(
      "params: theta_a=%.17g theta_b=%.17g dt_hat=%.17g horizon=%.17g paths=%zu "
      "seed=%llu\n",
      theta_a, theta_b, dt_hat, horizon, paths,
      static_cast<unsigned long long>(seed));
  sle::CouplingResult cr =
      sle::coupling_experiment(theta_a, theta_b, dt_hat, horizon, paths, seed, p);
  std::printf("pairs=%zu discarded=%zu final_uncoupled=%.12g\n", cr.pairs,
              cr.discarded, cr.uncoupled_fraction.back());
  if (!out.empty())
    sle::write_summary_csv(out, cr.t_hat, cr.uncoupled_fraction,
                           std::vector<double>(cr.t_hat.size(), 0.0), cr.pairs);
  return 0;
}

int run_radial_martingale(double kappa, double theta0, const std::string& grid_text,
                          std::size_t paths, double dt_hat, std::uint64_t seed,
                          const std::string& out) {
  if (!out.empty()) require_writable(out);
  sle::SleParams p{kappa};
  sle::validate_params(p);
  print_params(p);
  std::printf("params: theta0=%.17g paths=%zu dt_hat=%.17g seed=%llu\n", theta0,
              paths, dt_hat, static_cast<unsigned long long>(seed));
  std::vector<double> grid = sle::parse_double_list(grid_text);
  sle::MartingaleDiagnostic md =
      sle::martingale_diagnostic(p, theta0, grid, paths, dt_hat, seed);
  for (std::size_t i = 0; i < md.t_hat.size(); ++i) {
    double dev = md.stderr_[i] > 0.0
                     ? std::abs(md.mean[i] - md.mean[0]) / md.stderr_[i]
                     : 0.0;
    std::printf("t_hat=%.6g mean=%.12g stderr=%.12g dev_sigma=%.3g\n", md.t_hat[i],
                md.mean[i], md.stderr_[i], dev);
  }
  if (!out.empty())
    sle::write_summary_csv(out, md.t_hat, md.mean, md.stderr_, md.paths);
  return 0;
}

int run_natural_clock(const std::string& trace_path, double r_work, double grid_h,
                      bool extrapolate, const std::string& out) {
  require_input(trace_path);
  require_writable(out);
  sle::Trace tr = sle::read_trace_csv(trace_path);
  sle::SleParams p{tr.kappa};
  print_params(p);
  double h = grid_h > 0.0 ? grid_h : std::exp(-r_work) / 8.0;
  std::printf("params: r_work=%.17g grid_h=%.17g extrapolate=%d\n", r_work, h,
              extrapolate ? 1 : 0);
  sle::NaturalClock clock = extrapolate
                                ? sle::build_clock_extrapolated(tr, r_work, h)
                                : sle::build_clock(tr, r_work, h);
  sle::write_clock_csv(out, clock);
  std::printf("wrote %s (total content %.12g)\n", out.c_str(), clock.theta.back());
  return 0;
}

int run_natural_sigma(const std::string& trace_path, double r_work, double grid_h,
                      const std::string& theta_text, std::size_t n_out,
                      const std::string& out) {
  require_input(trace_path);
  if (!out.empty()) require_writable(out);
  sle::Trace tr = sle::read_trace_csv(trace_path);
  sle::SleParams p{tr.kappa};
  print_params(p);
  double h = grid_h > 0.0 ? grid_h : std::exp(-r_work) / 8.0;
  std::printf("params: r_work=%.17g grid_h=%.17g\n", r_work, h);
  sle::NaturalClock clock = sle::build_clock(tr, r_work, h);
  if (!theta_text.empty()) {
    for (double th : sle::parse_double_list(theta_text))
      std::printf("sigma(%.12g)=%.12g\n", th, sle::sigma_inverse(clock, th));
  }
  if (!out.empty()) {
    sle::NaturalTrace nt = sle::reparametrize_trace(tr, clock, n_out);
    sle::write_natural_trace_csv(out, nt);
    std::printf("wrote %s (%zu points)\n", out.c_str(), nt.pts.size());
  }
  return 0;
}

int run_natural_transfer(const std::string& trace_path, double r_work, double grid_h,
                         double s, double t, double scale, std::size_t n_out) {
  require_input(trace_path);
  sle::Trace tr = sle::read_trace_csv(trace_path);
  sle::SleParams p{tr.kappa};
  print_params(p);
  double h = grid_h > 0.0 ? grid_h : std::exp(-r_work) / 8.0;
  std::printf("params: r_work=%.17g grid_h=%.17g s=%.17g t=%.17g scale=%.17g\n",
              r_work, h, s, t, scale);
  sle::NaturalClock clock = sle::build_clock(tr, r_work, h);
  sle::NaturalTrace nt = sle::reparametrize_trace(tr, clock, n_out);
  ScaleCtx ctx{scale};
  sle::ConformalMap F{scale_map, scale_deriv, &ctx};
  double transferred = sle::domain_transfer_time(nt, F, s, t);
  double expected = std::pow(scale, p.dim()) * (t - s);
  std::printf("transfer=%.12g scale^d*(t-s)=%.12g rel_gap=%.3g\n", transferred,
              expected, std::abs(transferred - expected) / std::max(expected, 1e-300));
  return 0;
}

int run_experiment_cmd(const std::string& config_path) {
  require_input(config_path);
  sle::RunConfig cfg = sle::parse_run_config(config_path);
  return sle::run_experiments(cfg, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and estimation toolkit for chordal SLE: traces, "
               "Minkowski content, Green's functions, radial Bessel processes "
               "and the natural parametrization"};
  app.set_version_flag("--version", std::string("sle ") + SLE_BUILD_REV);
  int threads = 0;
  app.add_option("--threads", threads, "Cap worker threads (0 = all cores)");
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Sample a driving path and write the chain");
  double kappa = 8.0 / 3.0, dt = 1e-4;
  std::size_t steps = 40000;
  std::uint64_t seed = 1;
  std::string out, chain_path, mode = "blocked";
  sim->add_option("--kappa", kappa, "SLE parameter in (0, 8]")->required();
  sim->add_option("--steps", steps, "Number of time steps")->required();
  sim->add_option("--dt", dt, "Capacity time step")->required();
  sim->add_option("--seed", seed, "RNG seed")->required();
  sim->add_option("--out", out, "Output chain CSV")->required();

  auto* trc = app.add_subcommand("trace", "Evaluate the trace of a chain");
  double t_kappa = 8.0 / 3.0, t_dt = 1e-4;
  std::size_t t_steps = 40000;
  std::uint64_t t_seed = 1;
  std::string t_out;
  trc->add_option("--chain", chain_path, "Chain CSV produced by simulate");
  trc->add_option("--kappa", t_kappa, "SLE parameter when sampling fresh");
  trc->add_option("--steps", t_steps, "Steps when sampling fresh");
  trc->add_option("--dt", t_dt, "Time step when sampling fresh");
  trc->add_option("--seed", t_seed, "Seed when sampling fresh");
  trc->add_option("--mode", mode, "serial or blocked")
      ->check(CLI::IsMember({"serial", "blocked"}));
  trc->add_option("--out", t_out, "Output trace CSV")->required();

  auto* cnt = app.add_subcommand("content", "Minkowski content profile of a trace");
  std::string c_trace, c_out, c_z;
  double r_min = 1.0, r_max = 2.0, r_step = 0.1, c_grid_h = 0.0, c_margin = 0.5;
  double c_lambda = 0.1;
  cnt->add_option("--trace", c_trace, "Trace CSV")->required();
  cnt->add_option("--r-min", r_min, "Smallest radius exponent")->required();
  cnt->add_option("--r-max", r_max, "Largest radius exponent");
  cnt->add_option("--r-step", r_step, "Grid spacing in r");
  cnt->add_option("--grid-h", c_grid_h, "Lattice spacing (default e^-r_max/8)");
  cnt->add_option("--window", c_margin, "Window margin around the trace");
  cnt->add_option("--lambda", c_lambda, "Smoothing width for --z");
  cnt->add_option("--z", c_z, "Also print the smoothed sample at this point");
  cnt->add_option("--out", c_out, "Output profile CSV");

  auto* grn = app.add_subcommand("green", "Green's function evaluations");
  grn->require_subcommand(1);
  auto* gev = grn->add_subcommand("eval", "Point evaluation in H or D");
  double g_kappa = 2.0, g_chat = 1.0;
  std::string g_z, g_form = "im", g_w1 = "-1", g_w2 = "1";
  bool g_shape = false, g_disk = false;
  gev->add_option("--kappa", g_kappa, "SLE parameter")->required();
  gev->add_option("--z", g_z, "Evaluation point a+bi")->required();
  gev->add_option("--form", g_form, "crad or im normalization")
      ->check(CLI::IsMember({"crad", "im"}));
  gev->add_option("--c-hat", g_chat, "Multiplicative constant");
  gev->add_flag("--shape-only", g_shape, "Force c_hat = 1");
  gev->add_flag("--disk", g_disk, "Evaluate in the unit disk");
  gev->add_option("--w1", g_w1, "First disk boundary point");
  gev->add_option("--w2", g_w2, "Second disk boundary point");
  auto* gin = grn->add_subcommand("integrate", "Integrate over a window or squares");
  double gi_kappa = 2.0, gi_chat = 1.0;
  int gi_quad = 64;
  std::string gi_window, gi_squares, gi_form = "im";
  gin->add_option("--kappa", gi_kappa, "SLE parameter")->required();
  gin->add_option("--window", gi_window, "x0,x1,y0,y1");
  gin->add_option("--squares", gi_squares, "Dyadic squares n:j:k;...");
  gin->add_option("--form", gi_form, "crad or im normalization")
      ->check(CLI::IsMember({"crad", "im"}));
  gin->add_option("--c-hat", gi_chat, "Multiplicative constant");
  gin->add_option("--quad-n", gi_quad, "Quadrature points per axis");
  auto* gcb = grn->add_subcommand("comb", "Comb domain partial sums");
  double gc_kappa = 2.0;
  int gc_terms = 10000, gc_base = 100;
  gcb->add_option("--kappa", gc_kappa, "SLE parameter fixing d");
  gcb->add_option("--terms", gc_terms, "Teeth in the comb");
  gcb->add_option("--base", gc_base, "Baseline partial sum index");

  auto* rad = app.add_subcommand("radial", "Radial Bessel angle processes");
  rad->require_subcommand(1);
  auto* rbe = rad->add_subcommand("bessel", "Single path of the angle SDE");
  double rb_kappa = 2.0, rb_theta0 = 1.5707963267948966, rb_tmax = 1.0,
         rb_dt = 1e-4;
  std::uint64_t rb_seed = 1;
  std::string rb_mode = "chordal", rb_out;
  rbe->add_option("--kappa", rb_kappa, "SLE parameter")->required();
  rbe->add_option("--theta0", rb_theta0, "Initial angle in (0, pi)");
  rbe->add_option("--t-max", rb_tmax, "Hatted time horizon")->required();
  rbe->add_option("--dt-hat", rb_dt, "Hatted time step");
  rbe->add_option("--seed", rb_seed, "RNG seed");
  rbe->add_option("--mode", rb_mode, "chordal or two-sided drift")
      ->check(CLI::IsMember({"chordal", "two-sided"}));
  rbe->add_option("--out", rb_out, "Output path CSV")->required();
  auto* rst = rad->add_subcommand("stationary", "Long-run samples vs the stationary law");
  double rs_kappa = 2.0, rs_dt = 1e-4, rs_spacing = 0.15, rs_burn = 1.0,
         rs_theta0 = 1.5707963267948966;
  std::size_t rs_samples = 100000;
  std::uint64_t rs_seed = 1;
  std::string rs_out;
  rst->add_option("--kappa", rs_kappa, "SLE parameter")->required();
  rst->add_option("--samples", rs_samples, "Post burn-in sample count");
  rst->add_option("--dt-hat", rs_dt, "Hatted time step");
  rst->add_option("--spacing", rs_spacing, "Hatted time between samples");
  rst->add_option("--burn-in", rs_burn, "Hatted burn-in time");
  rst->add_option("--theta0", rs_theta0, "Initial angle");
  rst->add_option("--seed", rs_seed, "RNG seed");
  rst->add_option("--out", rs_out, "Optional sample CSV");
  auto* rco = rad->add_subcommand("coupling", "Reflection coupling of two angles");
  double rc_kappa = 2.0, rc_a = 0.7853981633974483, rc_b = 2.356194490192345,
         rc_dt = 1e-3, rc_hor = 8.0;
  std::size_t rc_paths = 2000;
  std::uint64_t rc_seed = 1;
  std::string rc_out;
  rco->add_option("--kappa", rc_kappa, "SLE parameter")->required();
  rco->add_option("--theta-a", rc_a, "First initial angle");
  rco->add_option("--theta-b", rc_b, "Second initial angle");
  rco->add_option("--dt-hat", rc_dt, "Hatted time step");
  rco->add_option("--horizon", rc_hor, "Hatted time horizon");
  rco->add_option("--paths", rc_paths, "Number of path pairs");
  rco->add_option("--seed", rc_seed, "RNG seed");
  rco->add_option("--out", rc_out, "Optional summary CSV");
  auto* rma = rad->add_subcommand("martingale", "Mean of the killed martingale");
  double rm_kappa = 2.0, rm_theta0 = 1.5707963267948966, rm_dt = 2e-4;
  std::size_t rm_paths = 10000;
  std::uint64_t rm_seed = 1;
  std::string rm_grid = "0,0.25,0.5,1.0", rm_out;
  rma->add_option("--kappa", rm_kappa, "SLE parameter")->required();
  rma->add_option("--theta0", rm_theta0, "Initial angle");
  rma->add_option("--t-grid", rm_grid, "Hatted observation times");
  rma->add_option("--paths", rm_paths, "Number of paths");
  rma->add_option("--dt-hat", rm_dt, "Hatted time step");
  rma->add_option("--seed", rm_seed, "RNG seed");
  rma->add_option("--out", rm_out, "Optional summary CSV");

  auto* nat = app.add_subcommand("natural", "Natural parametrization tools");
  nat->require_subcommand(1);
  auto* ncl = nat->add_subcommand("clock", "Occupation clock of a trace");
  std::string nc_trace, nc_out;
  double nc_r = 2.5, nc_h = 0.0;
  bool nc_ext = false;
  ncl->add_option("--trace", nc_trace, "Trace CSV")->required();
  ncl->add_option("--r-work", nc_r, "Working radius exponent");
  ncl->add_option("--grid-h", nc_h, "Lattice spacing (default e^-r/8)");
  ncl->add_flag("--extrapolate", nc_ext, "Two-scale extrapolated clock");
  ncl->add_option("--out", nc_out, "Output clock CSV")->required();
  auto* nsg = nat->add_subcommand("sigma", "Inverse clock and reparametrized trace");
  std::string ns_trace, ns_thetas, ns_out;
  double ns_r = 2.5, ns_h = 0.0;
  std::size_t ns_nout = 2000;
  nsg->add_option("--trace", ns_trace, "Trace CSV")->required();
  nsg->add_option("--r-work", ns_r, "Working radius exponent");
  nsg->add_option("--grid-h", ns_h, "Lattice spacing (default e^-r/8)");
  nsg->add_option("--theta", ns_thetas, "Comma list of natural times to invert");
  nsg->add_option("--n-out", ns_nout, "Points in the reparametrized trace");
  nsg->add_option("--out", ns_out, "Natural trace CSV");
  auto* ntr = nat->add_subcommand("transfer", "Transfer time under a scaling map");
  std::string nt_trace;
  double nt_r = 2.5, nt_h = 0.0, nt_s = 0.0, nt_t = 0.0, nt_scale = 2.0;
  std::size_t nt_nout = 2000;
  ntr->add_option("--trace", nt_trace, "Trace CSV")->required();
  ntr->add_option("--r-work", nt_r, "Working radius exponent");
  ntr->add_option("--grid-h", nt_h, "Lattice spacing (default e^-r/8)");
  ntr->add_option("--s", nt_s, "Natural time start")->required();
  ntr->add_option("--t", nt_t, "Natural time end")->required();
  ntr->add_option("--scale", nt_scale, "Scaling factor b of F(z) = b z");
  ntr->add_option("--n-out", nt_nout, "Interpolation nodes");

  auto* exp = app.add_subcommand("experiment", "Run a config-driven experiment batch");
  std::string e_config;
  exp->add_option("--config", e_config, "INI config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (sim->parsed()) return run_simulate(kappa, steps, dt, seed, out);
    if (trc->parsed())
      return run_trace(chain_path, t_kappa, t_steps, t_dt, t_seed, mode, t_out);
    if (cnt->parsed())
      return run_content(c_trace, r_min, r_max, r_step, c_grid_h, c_margin,
                         c_lambda, c_z, c_out);
    if (grn->parsed()) {
      if (gev->parsed())
        return run_green_eval(g_kappa, g_z, g_form, g_chat, g_shape, g_disk, g_w1,
                              g_w2);
      if (gin->parsed())
        return run_green_integrate(gi_kappa, gi_window, gi_squares, gi_form,
                                   gi_chat, gi_quad);
      if (gcb->parsed()) return run_green_comb(gc_kappa, gc_terms, gc_base);
    }
    if (rad->parsed()) {
      if (rbe->parsed())
        return run_radial_bessel(rb_kappa, rb_theta0, rb_tmax, rb_dt, rb_seed,
                                 rb_mode, rb_out);
      if (rst->parsed())
        return run_radial_stationary(rs_kappa, rs_samples, rs_dt, rs_spacing,
                                     rs_burn, rs_theta0, rs_seed, rs_out);
      if (rco->parsed())
        return run_radial_coupling(rc_kappa, rc_a, rc_b, rc_dt, rc_hor, rc_paths,
                                   rc_seed, rc_out);
      if (rma->parsed())
        return run_radial_martingale(rm_kappa, rm_theta0, rm_grid, rm_paths, rm_dt,
                                     rm_seed, rm_out);
    }
    if (nat->parsed()) {
      if (ncl->parsed())
        return run_natural_clock(nc_trace, nc_r, nc_h, nc_ext, nc_out);
      if (nsg->parsed())
        return run_natural_sigma(ns_trace, ns_r, ns_h, ns_thetas, ns_nout, ns_out);
      if (ntr->parsed())
        return run_natural_transfer(nt_trace, nt_r, nt_h, nt_s, nt_t, nt_scale,
                                    nt_nout);
    }
    if (exp->parsed()) return run_experiment_cmd(e_config);
  } catch (const sle::ResolutionError& e) {
    std::fprintf(stderr, "resolution error: %s\n", e.what());
    return kExitResolution;
  } catch (const sle::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUsage;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::ios_base::failure& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
