#pragma once
// Averaging for eps-indexed scalar families R(eps) on (0, eps_max]:
//
//   A(eta) = (1/eta) * integral_0^eta R(eps) deps
//
// evaluated either after the substitution theta = (1/eps)^p, which turns a
// bounded oscillation of known period into a walk over half-period panels
// with an analytically closable tail, or directly in eps.  On top of the
// single-eta evaluators sit ladder studies: Cauchy detection of a limit,
// liminf/limsup windows over the small-eta tail, RMS means, rescaling
// studies in p, and averaging of discrete sweep records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qflab/common.hpp"
#include "qflab/quadrature.hpp"

namespace qflab {

// Declares R(eps) = f((1/eps)^p) with f periodic of the given period.
// Panels are anchored on the half-period lattice phase + k*period/2; kinks
// or extrema sitting on that lattice (|cos| and friends) are never stepped
// over.  Anchors merely have to be consistent: a kink in the interior of a
// panel is picked up by the adaptive rule, just more slowly.
struct OscillationHint {
  double p = 1.0;
  double theta_period = 0.0;
  double phase = 0.0;
};

// A scalar family eps -> R(eps), optionally with a declared uniform bound
// |R| <= B and an oscillation hint.  Evaluation outside (0, eps_max] or a
// sample exceeding a declared bound is a contract violation and throws.
class GeneralizedNumber {
 public:
  GeneralizedNumber(std::string label, std::function<double(double)> r,
                    double eps_max = 1.0)
      : label_(std::move(label)), r_(std::move(r)), eps_max_(eps_max) {
    if (!(eps_max_ > 0.0))
      throw std::invalid_argument("GeneralizedNumber: eps_max must be positive");
  }

  GeneralizedNumber& with_bound(double b) {
    if (!(b >= 0.0))
      throw std::invalid_argument("GeneralizedNumber: bound must be >= 0");
    bound_ = b;
    return *this;
  }

  GeneralizedNumber& with_hint(OscillationHint h) {
    if (!(h.p > 0.0) || !(h.theta_period > 0.0))
      throw std::invalid_argument("GeneralizedNumber: hint needs p > 0 and period > 0");
    hint_ = h;
    return *this;
  }

  double operator()(double eps) const {
    if (!(eps > 0.0) || eps > eps_max_ * (1.0 + 1e-12))
      throw std::invalid_argument(label_ + ": eps outside (0, eps_max]");
    double v = r_(eps);
    if (bound_ && std::abs(v) > *bound_ * (1.0 + 1e-9) + 1e-300)
      throw std::invalid_argument(label_ + ": sample exceeds declared bound");
    return v;
  }

  const std::string& label() const { return label_; }
  double eps_max() const { return eps_max_; }
  const std::optional<double>& bound() const { return bound_; }
  const std::optional<OscillationHint>& hint() const { return hint_; }

 private:
  std::string label_;
  std::function<double(double)> r_;
  double eps_max_;
  std::optional<double> bound_;
  std::optional<OscillationHint> hint_;
};

// Record of a ladder study.  limit is present only when the ladder values
// settled; liminf/limsup always bracket the small-eta behaviour.  seed is
// present only for randomized averaging.  diagnostics carries engine
// counters (panel counts, stop points, estimated periods, ...).
struct AverageReport {
  std::string label;
  std::vector<double> eta_ladder;
  std::vector<double> a_values;
  std::optional<double> limit;
  double liminf = 0.0;
  double limsup = 0.0;
  std::optional<std::uint64_t> seed;
  std::map<std::string, double> diagnostics;
};

namespace detail {

struct EngineResult {
  double a = 0.0;
  double err = 0.0;       // a-posteriori error estimate on A(eta)
  double evals = 0.0;     // panel / block count, not individual f calls
  double theta_stop = 0.0;
  double fbar = 0.0;
};

// The substituted walk starts at theta = eta^-p, which outruns the double
// grid for large p long before eta is exhausted.  Each sample costs one
// theta -> eps -> theta round trip, so the phase noise seen by a periodic
// family is about (p + 2) ulps of theta; once that is no longer tiny
// against a half period, panel values drift systematically.
inline bool lattice_resolvable(double theta0, double half, double p) {
  double noise = (p + 2.0) * 1.1e-16 * theta0;
  return noise <= half * 1e-3;
}

// One lattice panel.  A panel whose kinks sit on its endpoints is smooth
// inside, where the fixed 15-point rule is already exact to roundoff; the
// 7-point rule acts as a cheap witness.  Disagreement means the lattice
// missed a kink (estimated phase, drifting period) and the panel escalates
// to the adaptive rule.
template <class F>
double panel_integral(const F& f, double a, double b) {
  double v15 = gauss15(f, a, b);
  double v7 = gauss7(f, a, b);
  if (std::abs(v15 - v7) <= 1e-10 * (std::abs(v15) + 1e-300)) return v15;
  return integrate_adaptive(f, a, b, 1e-8, 10).value;
}

// Half-period panel walk of I = (1/p) int_Theta^inf f(theta) theta^(-1-1/p)
// dtheta with Theta = eta^(-p).  The mean fbar over the first whole periods
// closes the tail as fbar * theta^(-1/p); the residue integrates a near
// zero-mean periodic function against a monotone weight, so its
// antiderivative is bounded by period * max|f - fbar| and the closure error
// by that times the weight at the stop point.  The residual size is taken
// from quarter-point probes (with margin), capped by the declared bound
// when one is available.
inline EngineResult theta_panel_walk(const std::function<double(double)>& f,
                                     double eta, double tol,
                                     const OscillationHint& h,
                                     std::optional<double> declared_bound,
                                     std::size_t max_panels = std::size_t{1} << 20) {
  const double p = h.p;
  const double theta0 = std::pow(1.0 / eta, p);
  const double half = h.theta_period / 2.0;
  if (!lattice_resolvable(theta0, half, p))
    throw std::domain_error(
        "A(eta): the theta lattice is below double resolution at this eta and p");
  auto wf = [&](double th) {
    return f(th) * std::pow(th, -1.0 - 1.0 / p) / p;
  };

  double j0 = std::ceil((theta0 - h.phase) / half);
  double a = h.phase + j0 * half;
  double walked = 0.0;
  if (a > theta0 * (1.0 + 1e-15))
    walked += integrate_adaptive(wf, theta0, a, 1e-12, 8).value;

  double fint = 0.0;          // integral of f over the first two whole periods
  std::vector<double> probes; // f samples collected before fbar is known
  double dev = 0.0;           // observed max |f - fbar|
  bool have_fbar = false;
  double fbar = 0.0;
  EngineResult out;

  for (std::size_t j = 0; j < max_panels; ++j) {
    double b = a + half;
    walked += panel_integral(wf, a, b);
    double s0 = f(a + 0.25 * half), s1 = f(a + 0.75 * half);
    if (!have_fbar) {
      probes.push_back(s0);
      probes.push_back(s1);
      fint += panel_integral(f, a, b);
      if (j == 3) {
        fbar = fint / (2.0 * h.theta_period);
        have_fbar = true;
        for (double q : probes) dev = std::max(dev, std::abs(q - fbar));
      }
    } else {
      dev = std::max({dev, std::abs(s0 - fbar), std::abs(s1 - fbar)});
    }
    a = b;
    if (have_fbar && (j % 2u) == 1u) {
      double resid = dev * 1.5;
      if (declared_bound)
        resid = std::min(resid, *declared_bound + std::abs(fbar));
      double tail = fbar * std::pow(a, -1.0 / p);
      double err = h.theta_period * resid * std::pow(a, -1.0 - 1.0 / p) / p / eta;
      out.a = (walked + tail) / eta;
      out.err = err;
      out.evals = double(j + 1);
      out.theta_stop = a;
      out.fbar = fbar;
      if (err <= tol / 2.0) return out;
    }
  }
  throw budget_error("A(" + std::to_string(eta) + "): panel budget exhausted",
                     out.a, out.err);
}

// Same walk carried out in eps: panels between consecutive images
// eps_k = (phase + k*half)^(-1/p) descending from eta, with the remaining
// mass below the stop point closed as fbar * eps_stop.
inline EngineResult eps_panel_walk(const std::function<double(double)>& r,
                                   double eta, double tol,
                                   const OscillationHint& h,
                                   std::optional<double> declared_bound,
                                   std::size_t max_panels = std::size_t{1} << 20) {
  const double p = h.p;
  const double half = h.theta_period / 2.0;
  auto theta_of = [&](double eps) { return std::pow(1.0 / eps, p); };
  auto eps_of = [&](double th) { return std::pow(th, -1.0 / p); };

  double th = theta_of(eta);
  if (!lattice_resolvable(th, half, p))
    throw std::domain_error(
        "A(eta): the theta lattice is below double resolution at this eta and p");
  double j0 = std::ceil((th - h.phase) / half);
  double lattice = h.phase + j0 * half;
  double hi = eta;
  double walked = 0.0;
  if (lattice > th * (1.0 + 1e-15)) {
    double lo = eps_of(lattice);
    walked += integrate_adaptive(r, lo, hi, 1e-12, 8).value;
    hi = lo;
  }

  double fint = 0.0;
  std::vector<double> probes;
  double dev = 0.0;
  bool have_fbar = false;
  double fbar = 0.0;
  EngineResult out;

  for (std::size_t j = 0; j < max_panels; ++j) {
    lattice += half;
    double lo = eps_of(lattice);
    walked += panel_integral(r, lo, hi);
    double s0 = r(eps_of(lattice - 0.75 * half));
    double s1 = r(eps_of(lattice - 0.25 * half));
    if (!have_fbar) {
      probes.push_back(s0);
      probes.push_back(s1);
      fint += panel_integral(
          [&](double t) { return r(eps_of(t)); }, lattice - half, lattice);
      if (j == 3) {
        fbar = fint / (2.0 * h.theta_period);
        have_fbar = true;
        for (double q : probes) dev = std::max(dev, std::abs(q - fbar));
      }
    } else {
      dev = std::max({dev, std::abs(s0 - fbar), std::abs(s1 - fbar)});
    }
    hi = lo;
    if (have_fbar && (j % 2u) == 1u) {
      double resid = dev * 1.5;
      if (declared_bound)
        resid = std::min(resid, *declared_bound + std::abs(fbar));
      double tail = fbar * hi;
      double err = h.theta_period * resid * std::pow(lattice, -1.0 - 1.0 / p) / p / eta;
      out.a = (walked + tail) / eta;
      out.err = err;
      out.evals = double(j + 1);
      out.theta_stop = lattice;
      out.fbar = fbar;
      if (err <= tol / 2.0) return out;
    }
  }
  throw budget_error("A(" + std::to_string(eta) + "): panel budget exhausted",
                     out.a, out.err);
}

// Dyadic block walk without any period information.  In u = 1/eps the mean
// is I = int_U^inf R(1/u) u^-2 du; blocks [U 2^k, U 2^(k+1)] are integrated
// adaptively and the tail is closed by the running block mean.  The error
// takes the worst drift among the last three pairs of block means (two
// consecutive means of a slow chirp can collide by accident) and, when a
// bound is declared, is capped by B * 2^-(k+1).  A block whose quadrature
// estimate stays large relative to its value was not resolved (too many
// oscillations for the depth budget); from then on the accumulated
// quadrature estimates are carried in the error.  Without a bound the walk
// must see the block means settle; otherwise the family is rejected.
inline EngineResult dyadic_u_walk(const std::function<double(double)>& r,
                                  double eta, double tol,
                                  std::optional<double> declared_bound,
                                  int max_blocks = 48) {
  const double big_u = 1.0 / eta;
  auto g = [&](double u) { return r(1.0 / u) / (u * u); };
  double walked = 0.0;
  std::vector<double> means;
  bool resolved = true;
  EngineResult out;

  double quad_acc = 0.0;
  for (int k = 0; k < max_blocks; ++k) {
    double a = big_u * std::pow(2.0, double(k));
    double b = 2.0 * a;
    QuadResult blk = integrate_adaptive(g, a, b, 1e-13, 13);
    walked += blk.value;
    quad_acc += blk.error;
    if (blk.error > 1e-6 * (std::abs(blk.value) + 1e-300)) resolved = false;
    double measure = 1.0 / a - 1.0 / b;
    double mean = blk.value / measure;
    double drop = std::pow(2.0, -double(k + 1));
    means.push_back(mean);
    if (means.size() >= 4) {
      double drift = 0.0;
      for (std::size_t i = means.size() - 3; i < means.size(); ++i)
        drift = std::max(drift, std::abs(means[i] - means[i - 1]));
      double err = drift * drop * 2.0;
      if (declared_bound) err = std::min(err, *declared_bound * drop);
      if (!resolved) err += quad_acc * big_u;
      double tail = mean / b;
      out.a = (walked + tail) * big_u;
      out.err = err;
      out.evals = double(k + 1);
      out.theta_stop = b;
      out.fbar = mean;
      if (err <= tol / 2.0) return out;
    }
  }
  if (!declared_bound)
    throw std::invalid_argument(
        "cesaro_average: no declared bound and the dyadic tail does not close");
  throw budget_error("A(" + std::to_string(eta) + "): dyadic budget exhausted",
                     out.a, out.err);
}

// eps-space counterpart of the dyadic walk: blocks [eta 2^-(k+1), eta 2^-k].
inline EngineResult dyadic_eps_walk(const std::function<double(double)>& r,
                                    double eta, double tol,
                                    std::optional<double> declared_bound,
                                    int max_blocks = 48) {
  double walked = 0.0;
  std::vector<double> means;
  bool resolved = true;
  EngineResult out;

  double quad_acc = 0.0;
  for (int k = 0; k < max_blocks; ++k) {
    double b = eta * std::pow(2.0, -double(k));
    double a = b / 2.0;
    QuadResult blk = integrate_adaptive(r, a, b, 1e-13, 13);
    walked += blk.value;
    quad_acc += blk.error;
    if (blk.error > 1e-6 * (std::abs(blk.value) + 1e-300)) resolved = false;
    double mean = blk.value / (b - a);
    double drop = std::pow(2.0, -double(k + 1));
    means.push_back(mean);
    if (means.size() >= 4) {
      double drift = 0.0;
      for (std::size_t i = means.size() - 3; i < means.size(); ++i)
        drift = std::max(drift, std::abs(means[i] - means[i - 1]));
      double err = drift * drop * 2.0;
      if (declared_bound) err = std::min(err, *declared_bound * drop);
      if (!resolved) err += quad_acc / eta;
      double tail = mean * a;
      out.a = (walked + tail) / eta;
      out.err = err;
      out.evals = double(k + 1);
      out.theta_stop = 1.0 / a;
      out.fbar = mean;
      if (err <= tol / 2.0) return out;
    }
  }
  if (!declared_bound)
    throw std::invalid_argument(
        "cesaro_average: no declared bound and the dyadic tail does not close");
  throw budget_error("A(" + std::to_string(eta) + "): dyadic budget exhausted",
                     out.a, out.err);
}

// Heuristic period detection in u = 1/eps.  Scans a few windows [U, U+W];
// a window showing >= 24 midline crossings with near-uniform spacing pins
// p = 1 and the period.  Chirped or aperiodic signals fail the spacing
// test and fall through to the dyadic engines.
inline std::optional<OscillationHint> estimate_period(
    const std::function<double(double)>& r, double eta) {
  const double big_u = 1.0 / eta;
  const int n = 8192;
  for (double wfac : {1.0 / 64.0, 1.0 / 16.0, 1.0 / 4.0, 1.0, 4.0}) {
    double w = big_u * wfac;
    std::vector<double> v(n + 1);
    double vmin = 1e300, vmax = -1e300;
    for (int i = 0; i <= n; ++i) {
      v[i] = r(1.0 / (big_u + i * w / n));
      vmin = std::min(vmin, v[i]);
      vmax = std::max(vmax, v[i]);
    }
    double mid = 0.5 * (vmin + vmax);
    if (vmax - vmin < 1e-12 * std::max(1.0, std::abs(mid))) return std::nullopt;
    std::vector<double> cross;
    for (int i = 0; i < n; ++i) {
      double d0 = v[i] - mid, d1 = v[i + 1] - mid;
      if ((d0 <= 0.0 && d1 > 0.0) || (d0 >= 0.0 && d1 < 0.0)) {
        double frac = d0 / (d0 - d1);
        cross.push_back(big_u + (i + frac) * w / n);
      }
    }
    if (cross.size() < 26) continue;
    // consecutive crossings of an asymmetric wave alternate in spacing;
    // crossings two apart are one whole period apart regardless
    std::vector<double> periods;
    for (std::size_t i = 0; i + 2 < cross.size(); i += 2)
      periods.push_back(cross[i + 2] - cross[i]);
    std::size_t m = periods.size();
    double sum = 0.0, sum2 = 0.0;
    for (double s : periods) {
      sum += s;
      sum2 += s * s;
    }
    double mean = sum / double(m);
    double var = std::max(0.0, sum2 / double(m) - mean * mean);
    if (std::sqrt(var) > 0.04 * mean) continue;
    if (w / n > mean / 8.0) continue;
    // chirps can show a tight spread over a narrow window; a steady drift
    // between the half-window means gives them away
    double sum_lo = 0.0, sum_hi = 0.0;
    std::size_t half_m = m / 2;
    for (std::size_t i = 0; i < half_m; ++i) sum_lo += periods[i];
    for (std::size_t i = half_m; i < m; ++i) sum_hi += periods[i];
    double mean_lo = sum_lo / double(half_m);
    double mean_hi = sum_hi / double(m - half_m);
    if (std::abs(mean_hi - mean_lo) > 0.002 * mean) continue;
    OscillationHint h;
    h.p = 1.0;
    h.theta_period = mean;
    h.phase = std::fmod(cross.front(), mean / 2.0);
    return h;
  }
  return std::nullopt;
}

inline std::optional<OscillationHint> resolve_hint(const GeneralizedNumber& gn,
                                                   double eta) {
  if (gn.hint()) return gn.hint();
  return estimate_period([&](double e) { return gn(e); }, eta);
}

}  // namespace detail

// A(eta) evaluated after substituting theta = (1/eps)^p when a period is
// declared or detected, falling back to dyadic blocks in u = 1/eps.
inline double cesaro_average_substituted(const GeneralizedNumber& gn, double eta,
                                         double tol = 1e-6,
                                         detail::EngineResult* info = nullptr,
                                         std::size_t panel_budget = std::size_t{1} << 20) {
  if (!(eta > 0.0) || eta > gn.eps_max() * (1.0 + 1e-12))
    throw std::invalid_argument(gn.label() + ": eta outside (0, eps_max]");
  auto hint = detail::resolve_hint(gn, eta);
  detail::EngineResult res;
  if (hint) {
    auto f = [&](double th) { return gn(std::pow(th, -1.0 / hint->p)); };
    res = detail::theta_panel_walk(f, eta, tol, *hint, gn.bound(), panel_budget);
  } else {
    res = detail::dyadic_u_walk([&](double e) { return gn(e); }, eta, tol,
                                gn.bound());
  }
  if (info) *info = res;
  return res.a;
}

// A(eta) evaluated in eps itself, on the image of the same half-period
// lattice when a period is available, else on dyadic eps blocks.
inline double cesaro_average_direct(const GeneralizedNumber& gn, double eta,
                                    double tol = 1e-6,
                                    detail::EngineResult* info = nullptr,
                                    std::size_t panel_budget = std::size_t{1} << 20) {
  if (!(eta > 0.0) || eta > gn.eps_max() * (1.0 + 1e-12))
    throw std::invalid_argument(gn.label() + ": eta outside (0, eps_max]");
  auto hint = detail::resolve_hint(gn, eta);
  detail::EngineResult res;
  if (hint) {
    res = detail::eps_panel_walk([&](double e) { return gn(e); }, eta, tol,
                                 *hint, gn.bound(), panel_budget);
  } else {
    res = detail::dyadic_eps_walk([&](double e) { return gn(e); }, eta, tol,
                                  gn.bound());
  }
  if (info) *info = res;
  return res.a;
}

inline double cesaro_average(const GeneralizedNumber& gn, double eta,
                             double tol = 1e-6) {
  return cesaro_average_substituted(gn, eta, tol);
}

// sqrt of the mean of R^2 over (0, eta].  Requires R >= 0; a genuinely
// negative sample (beyond roundoff) rejects the family.
inline double rms_average(const GeneralizedNumber& gn, double eta,
                          double tol = 1e-6) {
  double floor = -1e-13 * std::max(1.0, gn.bound().value_or(1.0));
  GeneralizedNumber sq(
      gn.label() + "^2",
      [&gn, floor](double e) {
        double v = gn(e);
        if (v < floor)
          throw std::invalid_argument(gn.label() +
                                      ": negative sample in rms_average");
        return v * v;
      },
      gn.eps_max());
  if (gn.bound()) sq.with_bound(*gn.bound() * *gn.bound());
  if (gn.hint()) {
    OscillationHint h = *gn.hint();
    h.theta_period /= 2.0;  // squaring halves the period of a |cos|-type wave
    sq.with_hint(h);
  }
  double m = cesaro_average_substituted(sq, eta, tol);
  return std::sqrt(std::max(0.0, m));
}

// Builds the default geometric eta ladder eta0 * factor^j.
inline std::vector<double> eta_ladder(double eta0 = 0.5, int count = 10,
                                      double factor = 0.5) {
  if (!(eta0 > 0.0) || count < 1 || !(factor > 0.0) || !(factor < 1.0))
    throw std::invalid_argument("eta_ladder: need eta0 > 0, count >= 1, factor in (0,1)");
  std::vector<double> v(count);
  double e = eta0;
  for (int i = 0; i < count; ++i, e *= factor) v[i] = e;
  return v;
}

// Walks A(eta) down the ladder.  When the last four values agree pairwise
// within 3*tol the family is declared settled and the limit is extrapolated
// (Aitken when the increment ratio is stable, else the last value).  The
// liminf/limsup window is taken over a dense refinement of the last two
// decades of the ladder, widened to contain the limit when one is present.
inline AverageReport associated_value(const GeneralizedNumber& gn,
                                      const std::vector<double>& ladder,
                                      double tol = 1e-6) {
  if (ladder.size() < 6)
    throw std::invalid_argument("associated_value: ladder needs >= 6 rungs");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0) || ladder[i] > gn.eps_max() * (1.0 + 1e-12))
      throw std::invalid_argument("associated_value: rung outside (0, eps_max]");
    if (i > 0 && !(ladder[i] < ladder[i - 1]))
      throw std::invalid_argument("associated_value: ladder must decrease strictly");
  }

  AverageReport rep;
  rep.label = gn.label();
  rep.eta_ladder = ladder;
  rep.a_values.resize(ladder.size());
  indexed_for(ladder.size(), [&](std::size_t i) {
    rep.a_values[i] = cesaro_average_substituted(gn, ladder[i], tol);
  });

  const std::size_t n = ladder.size();
  double spread = 0.0;
  for (std::size_t i = n - 4; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      spread = std::max(spread, std::abs(rep.a_values[i] - rep.a_values[j]));
  rep.diagnostics["cauchy_spread"] = spread;

  if (spread <= 3.0 * tol) {
    double d1 = rep.a_values[n - 2] - rep.a_values[n - 3];
    double d2 = rep.a_values[n - 1] - rep.a_values[n - 2];
    double lim = rep.a_values[n - 1];
    if (std::abs(d2) > 0.0 && std::abs(d1) > std::abs(d2) * (1.0 + 1e-6)) {
      double q = d2 / d1;
      if (std::abs(q) < 0.95) lim = rep.a_values[n - 1] + d2 * q / (1.0 - q);
    }
    rep.limit = lim;
  }

  // dense window over the last two decades of the ladder; window precision
  // is an order below the limit tolerance, so the scan may run looser
  double lo = ladder.back();
  double hi = std::min(ladder.front(), lo * 100.0);
  int dense_n = 64;
  std::vector<double> dense(dense_n);
  double wtol = std::max(tol * 10.0, 1e-3);
  indexed_for(std::size_t(dense_n), [&](std::size_t i) {
    double t = double(i) / double(dense_n - 1);
    double e = lo * std::pow(hi / lo, t);
    dense[i] = cesaro_average_substituted(gn, e, wtol);
  });
  double inf = dense[0], sup = dense[0];
  for (double v : dense) {
    inf = std::min(inf, v);
    sup = std::max(sup, v);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (ladder[i] <= hi * (1.0 + 1e-12)) {
      inf = std::min(inf, rep.a_values[i]);
      sup = std::max(sup, rep.a_values[i]);
    }
  if (rep.limit) {
    inf = std::min(inf, *rep.limit);
    sup = std::max(sup, *rep.limit);
  }
  rep.liminf = inf;
  rep.limsup = sup;
  rep.diagnostics["dense_points"] = double(dense_n);
  rep.diagnostics["window_eta_hi"] = hi;
  return rep;
}

struct PRescalingStudy {
  std::vector<AverageReport> reports;
  double spread = 0.0;
};

// Runs associated_value on R_p(eps) = f((1/eps)^p) for each p.  When f has
// a declared period the engines are hinted; the spread compares the per-p
// limits (window midpoints when a limit is absent).  Ladder rungs whose
// substituted start point eta^-p falls below double resolution against the
// period are dropped for that p; larger p settles in far fewer rungs anyway.
inline PRescalingStudy p_rescaling_study(const std::function<double(double)>& f,
                                         std::optional<double> f_period,
                                         const std::vector<double>& p_list,
                                         const std::vector<double>& ladder,
                                         double tol = 1e-6,
                                         std::optional<double> f_bound = std::nullopt) {
  if (p_list.empty())
    throw std::invalid_argument("p_rescaling_study: empty p list");
  PRescalingStudy study;
  double lo = 1e300, hi = -1e300;
  for (double p : p_list) {
    if (!(p > 0.0))
      throw std::invalid_argument("p_rescaling_study: p must be positive");
    std::vector<double> rungs = ladder;
    if (f_period) {
      rungs.clear();
      for (double eta : ladder)
        if (detail::lattice_resolvable(std::pow(1.0 / eta, p), *f_period / 2.0, p))
          rungs.push_back(eta);
      if (rungs.size() < 6)
        throw std::invalid_argument(
            "p_rescaling_study: ladder too deep for p; fewer than 6 resolvable rungs");
    }
    GeneralizedNumber gn("p=" + std::to_string(p),
                         [f, p](double e) { return f(std::pow(1.0 / e, p)); },
                         rungs.front());
    if (f_bound) gn.with_bound(*f_bound);
    if (f_period) gn.with_hint(OscillationHint{p, *f_period, 0.0});
    AverageReport rep = associated_value(gn, rungs, tol);
    double center = rep.limit ? *rep.limit : 0.5 * (rep.liminf + rep.limsup);
    if (!rep.limit) rep.diagnostics["spread_uses_window_mid"] = 1.0;
    lo = std::min(lo, center);
    hi = std::max(hi, center);
    study.reports.push_back(std::move(rep));
  }
  study.spread = hi - lo;
  return study;
}

enum class SweepMode { trapezoid, random_subsample };

// Averages a discrete sweep record {(eps_i, R_i)}.  trapezoid builds the
// piecewise-linear A(eta) ladder analytically from prefix sums, closing the
// mass below the smallest eps with the running mean of the smallest decade;
// random_subsample draws a seeded subsample of the small-eps region and
// reports its mean.  Both report the raw min/max of the small-eps samples
// as the window.
inline AverageReport sweep_average(std::vector<std::pair<double, double>> samples,
                                   SweepMode mode = SweepMode::trapezoid,
                                   std::uint64_t seed = 0,
                                   double tol = 1e-3,
                                   std::string label = "sweep") {
  if (samples.size() < 8)
    throw std::invalid_argument("sweep_average: need at least 8 samples");
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    if (!(samples[i + 1].first > samples[i].first))
      throw std::invalid_argument("sweep_average: duplicate eps in sweep");
  if (!(samples.front().first > 0.0))
    throw std::invalid_argument("sweep_average: eps must be positive");

  const std::size_t n = samples.size();
  const double e0 = samples.front().first;

  // small-eps region: the smallest two decades of the record, at least 8 pts
  double region_hi = e0 * 100.0;
  std::size_t region_n = 0;
  while (region_n < n && samples[region_n].first <= region_hi) ++region_n;
  if (region_n < 8) {
    region_n = std::min(n, std::size_t(8));
    region_hi = samples[region_n - 1].first;
  }

  AverageReport rep;
  rep.label = std::move(label);
  double rmin = 1e300, rmax = -1e300;
  for (std::size_t i = 0; i < region_n; ++i) {
    rmin = std::min(rmin, samples[i].second);
    rmax = std::max(rmax, samples[i].second);
  }
  rep.liminf = rmin;
  rep.limsup = rmax;
  rep.diagnostics["region_points"] = double(region_n);
  rep.diagnostics["region_eta_hi"] = region_hi;

  if (mode == SweepMode::random_subsample) {
    std::mt19937_64 rng(seed);
    std::size_t m = std::min(std::max<std::size_t>(8, region_n / 2),
                             std::min<std::size_t>(region_n, 4096));
    std::vector<std::size_t> idx(region_n);
    for (std::size_t i = 0; i < region_n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, region_n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i : idx) {
      double v = samples[i].second;
      rep.eta_ladder.push_back(samples[i].first);
      rep.a_values.push_back(v);
      sum += v;
      sum2 += v * v;
    }
    double mean = sum / double(m);
    double var = std::max(0.0, sum2 / double(m) - mean * mean);
    rep.limit = mean;
    rep.liminf = std::min(rep.liminf, mean);
    rep.limsup = std::max(rep.limsup, mean);
    rep.seed = seed;
    rep.diagnostics["subsample_points"] = double(m);
    rep.diagnostics["subsample_stddev"] = std::sqrt(var);
    return rep;
  }

  // analytic prefix trapezoid integrals T_i = int_{e0}^{e_i} PL(R)
  std::vector<double> prefix(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    double de = samples[i].first - samples[i - 1].first;
    prefix[i] = prefix[i - 1] +
                0.5 * (samples[i].second + samples[i - 1].second) * de;
  }
  double head_sum = 0.0;
  std::size_t head_n = 0;
  for (std::size_t i = 0; i < n && samples[i].first <= e0 * 10.0; ++i) {
    head_sum += samples[i].second;
    ++head_n;
  }
  double head_mean = head_sum / double(std::max<std::size_t>(1, head_n));
  double below = head_mean * e0;  // running-mean closure of (0, e0)

  auto prefix_at = [&](double eta) {
    auto it = std::lower_bound(
        samples.begin(), samples.end(), eta,
        [](const std::pair<double, double>& s, double v) { return s.first < v; });
    std::size_t i = std::size_t(it - samples.begin());
    if (i == 0) return 0.0;
    if (i >= n) return prefix[n - 1];
    double ea = samples[i - 1].first, eb = samples[i].first;
    double va = samples[i - 1].second, vb = samples[i].second;
    double t = (eta - ea) / (eb - ea);
    double veta = va + t * (vb - va);
    return prefix[i - 1] + 0.5 * (va + veta) * (eta - ea);
  };

  const int rungs = 12;
  double top = samples.back().first;
  double bot = std::min(top, e0 * 8.0);
  for (int j = 0; j < rungs; ++j) {
    double t = double(j) / double(rungs - 1);
    double eta = top * std::pow(bot / top, t);
    rep.eta_ladder.push_back(eta);
    rep.a_values.push_back((below + prefix_at(eta)) / eta);
  }

  double spread = 0.0;
  for (std::size_t i = rep.a_values.size() - 4; i < rep.a_values.size(); ++i)
    for (std::size_t j = i + 1; j < rep.a_values.size(); ++j)
      spread = std::max(spread, std::abs(rep.a_values[i] - rep.a_values[j]));
  rep.diagnostics["cauchy_spread"] = spread;
  if (spread <= 3.0 * tol) {
    rep.limit = rep.a_values.back();
    rep.liminf = std::min(rep.liminf, *rep.limit);
    rep.limsup = std::max(rep.limsup, *rep.limit);
  }
  return rep;
}

}  // namespace qflab
