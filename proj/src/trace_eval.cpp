#include "sle/trace_eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sle {

namespace {

constexpr long kLeafSize = 16;
constexpr int kTerms = 56;
constexpr int kSamples = 64;
constexpr double kPi = 3.14159265358979323846;

// The branch interval of a block's composed inverse map covers the driving
// range plus a margin of order sqrt(hcap).  The estimate here is deliberately
// tight; every node is verified at build time against direct composition on
// its trusted circle and dropped outright when the estimate was optimistic.
double validity_radius(double spread, double hcap) {
  return 1.7 * (spread + 1.3 * std::sqrt(hcap));
}

inline cplx inv_map(double u, double q, cplx w) {
  double x = w.real() - u;
  double y = w.imag();
  double zr = x * x - y * y - q;
  double zi = 2.0 * x * y;
  double m = std::sqrt(zr * zr + zi * zi);
  double sr, si;
  if (zr >= 0.0) {
    sr = std::sqrt(0.5 * (m + zr));
    si = (sr == 0.0) ? 0.0 : zi / (2.0 * sr);
  } else {
    double t = std::sqrt(0.5 * (m - zr));
    sr = (t == 0.0) ? 0.0 : std::abs(zi) / (2.0 * t);
    si = (zi >= 0.0) ? t : -t;
  }
  if (si < 0.0) {
    sr = -sr;
    si = -si;
  } else if (si == 0.0 && x < 0.0 && sr > 0.0) {
    sr = -sr;
  }
  return cplx(u + sr, si);
}

// Horner length by squared distance ratio; far applications need few terms.
inline int terms_for(double dist2, double vr2) {
  double q = dist2 / vr2;
  if (q >= 16.0) return 22;
  if (q >= 6.25) return 34;
  if (q >= 3.6) return 46;
  return kTerms;
}

struct Meta {
  double c = 0.0;
  double vr2 = std::numeric_limits<double>::infinity();
};

class SuffixTree {
 public:
  void build(double a, double dt, const std::vector<double>& u, TraceEvalStats* stats);

  // applies inverse steps hi, hi-1, ..., lo to w; max_level limits which
  // block series may be used (-1 means direct maps only)
  cplx apply_span(cplx w, long lo, long hi, int max_level,
                  TraceEvalStats* st = nullptr) const;

  cplx tip(long p, double lift, TraceEvalStats* st) const {
    cplx w((*u_)[p], lift);
    return apply_span(w, 0, p - 1, static_cast<int>(meta_.size()) - 1, st);
  }

 private:
  cplx apply_series(int level, long idx, cplx w, double dist2, double vr2) const {
    const double* cf = &coef_[level][idx * kTerms];
    double dr = w.real() - meta_[level][idx].c;
    double di = w.imag();
    double zr = dr / dist2;
    double zi = -di / dist2;
    int mt = terms_for(dist2, vr2);
    double ar = cf[mt - 1];
    double ai = 0.0;
    for (int m = mt - 2; m >= 0; --m) {
      double t = ar * zr - ai * zi + cf[m];
      ai = ar * zi + ai * zr;
      ar = t;
    }
    return cplx(w.real() + ar * zr - ai * zi, w.imag() + ar * zi + ai * zr);
  }

  void build_node(int level, long idx, long lo, long hi);

  double a_ = 0.0, dt_ = 0.0, q_ = 0.0;
  const std::vector<double>* u_ = nullptr;
  std::vector<std::vector<Meta>> meta_;
  std::vector<std::vector<double>> coef_;
  std::uint64_t rejected_ = 0;
};

cplx SuffixTree::apply_span(cplx w, long lo, long hi, int max_level,
                            TraceEvalStats* st) const {
  long e = hi;
  int top = std::min<int>(max_level, static_cast<int>(meta_.size()) - 1);
  int lhint = 0;
  while (e >= lo) {
    bool applied = false;
    int align = std::countr_zero(static_cast<unsigned long>(e + 1)) - 4;
    int lstart = std::min({top, align, lhint + 1});
    for (int l = lstart; l >= 0; --l) {
      long bs = kLeafSize << l;
      long start = e + 1 - bs;
      if (start < lo) continue;
      long idx = (e + 1) / bs - 1;
      const Meta& md = meta_[l][idx];
      double dx = w.real() - md.c;
      double dy = w.imag();
      double dist2 = dx * dx + dy * dy;
      if (dist2 < md.vr2) continue;
      w = apply_series(l, idx, w, dist2, md.vr2);
      if (st) ++st->series_applies;
      e = start - 1;
      lhint = l;
      applied = true;
      break;
    }
    if (!applied) {
      w = inv_map((*u_)[e], q_, w);
      if (st) ++st->direct_maps;
      --e;
      lhint = 0;
    }
  }
  return w;
}

void SuffixTree::build_node(int level, long idx, long lo, long hi) {
  const std::vector<double>& u = *u_;
  double umin = u[lo], umax = u[lo];
  for (long j = lo + 1; j <= hi; ++j) {
    umin = std::min(umin, u[j]);
    umax = std::max(umax, u[j]);
  }
  double c = 0.5 * (umin + umax);
  double spread = 0.5 * (umax - umin);
  double hcap = a_ * dt_ * static_cast<double>(hi - lo + 1);
  double vr = validity_radius(spread, hcap);
  double vr2 = vr * vr;

  double* cf = &coef_[level][idx * kTerms];
  double acc[kTerms] = {0.0};
  for (int l = 0; l < kSamples; ++l) {
    double th = kPi * (l + 0.5) / kSamples;
    cplx rot(std::cos(th), std::sin(th));
    cplx wl = cplx(c, 0.0) + vr * rot;
    cplx d = apply_span(wl, lo, hi, level - 1) - wl;
    cplx p = rot;  // e^{i m th} for m = 1
    for (int m = 0; m < kTerms; ++m) {
      acc[m] += d.real() * p.real() - d.imag() * p.imag();
      p *= rot;
    }
  }
  double rm = vr / kSamples;
  for (int m = 0; m < kTerms; ++m) {
    cf[m] = acc[m] * rm;
    rm *= vr;
  }

  Meta& md = meta_[level][idx];
  md.c = c;

  // verify the series just outside the trusted radius against the already
  // verified finer levels (direct maps at the leaves); keep vr2 infinite if
  // the radius estimate was optimistic
  for (double th : {0.18, 0.85, 1.55, 2.30, 2.95}) {
    cplx wt = cplx(c, 0.0) + 1.02 * vr * cplx(std::cos(th), std::sin(th));
    cplx exact = apply_span(wt, lo, hi, level - 1);
    cplx approx = apply_series(level, idx, wt, std::norm(wt - cplx(c, 0.0)), vr2);
    if (std::abs(exact - approx) > 3e-13 * std::max(1.0, std::abs(exact))) {
      ++rejected_;
      return;  // md.vr2 stays infinite, the node is never used
    }
  }
  md.vr2 = vr2;
}

void SuffixTree::build(double a, double dt, const std::vector<double>& u,
                       TraceEvalStats* stats) {
  a_ = a;
  dt_ = dt;
  q_ = 2.0 * a * dt;
  u_ = &u;
  long n = static_cast<long>(u.size());
  meta_.clear();
  coef_.clear();
  rejected_ = 0;
  for (long bs = kLeafSize; bs <= n; bs <<= 1) {
    meta_.emplace_back(n / bs);
    coef_.emplace_back(static_cast<std::size_t>(n / bs) * kTerms);
  }
  for (std::size_t l = 0; l < meta_.size(); ++l) {
    long bs = kLeafSize << l;
    for (std::size_t b = 0; b < meta_[l].size(); ++b) {
      long lo = static_cast<long>(b) * bs;
      build_node(static_cast<int>(l), static_cast<long>(b), lo, lo + bs - 1);
    }
    if (stats) stats->nodes_built += meta_[l].size();
  }
  if (stats) stats->nodes_rejected += rejected_;
}

}  // namespace

void compute_trace_blocked(const LoewnerChain& chain, std::vector<cplx>& out,
                           TraceEvalStats* stats) {
  long n = static_cast<long>(chain.size());
  out.resize(chain.size());
  if (n == 0) return;
  double lift = std::sqrt(2.0 * chain.a * chain.dt);

  if (n < 2 * kLeafSize) {
    for (long k = 0; k < n; ++k) {
      cplx w(chain.u[k], lift);
      for (long j = k - 1; j >= 0; --j)
        w = inv_map(chain.u[j], 2.0 * chain.a * chain.dt, w);
      out[k] = w;
    }
    return;
  }

  SuffixTree tree;
  tree.build(chain.a, chain.dt, chain.u, stats);

#pragma omp parallel
  {
    TraceEvalStats local;
#pragma omp for schedule(dynamic, 128)
    for (long k = 0; k < n; ++k)
      out[k] = tree.tip(k, lift, stats ? &local : nullptr);
    if (stats) {
#pragma omp critical
      {
        stats->direct_maps += local.direct_maps;
        stats->series_applies += local.series_applies;
      }
    }
  }
}

}  // namespace sle
