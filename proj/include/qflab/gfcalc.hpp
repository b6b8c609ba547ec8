#pragma once

// Scalar generalized-function calculus at the representative level: smoothed
// jump functions, convolution embeddings of distributions, pointwise products
// and decay verdicts, all parameterized by the regularization scale eps.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "qflab/common.hpp"
#include "qflab/profiles.hpp"
#include "qflab/quadrature.hpp"
#include "qflab/representative.hpp"

namespace qflab {

// ---------------------------------------------------------------------------
// Smoothed jump function H_eps(x) = h(x / eps).

class SmoothedHeaviside {
 public:
  SmoothedHeaviside(TransitionProfile h, double eps)
      : h_(std::move(h)), eps_(eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("smoothed jump: eps <= 0");
  }

  double value(double x) const { return h_.value(x / eps_); }
  double derivative(double x) const { return h_.derivative(x / eps_) / eps_; }
  double eps() const { return eps_; }
  const TransitionProfile& profile() const { return h_; }

  // The full eps-family; the stored eps only provides the default scale.
  Representative to_representative(double eps_max = 1.0) const {
    TransitionProfile h = h_;
    Representative r(
        "H[" + h.label() + "]",
        [h](double eps, double x) { return h.value(x / eps); }, eps_max);
    r.with_derivative(1, [h](double eps, double x) {
      return h.derivative(x / eps) / eps;
    });
    return r;
  }

 private:
  TransitionProfile h_;
  double eps_;
};

// ---------------------------------------------------------------------------
// Jump-function power pairings.
//
// integral over R of (H^n1 - H^n2) H' dx  with H = h(x/eps). The substitution
// y = x/eps removes eps exactly; the result is quadrature over a +-10 window
// in y plus exact antiderivative tails, so polynomial-tailed profiles are
// handled as accurately as exponential ones.

namespace detail {
inline double power_antiderivative(double u, int n1, int n2) {
  return std::pow(u, n1 + 1) / (n1 + 1) - std::pow(u, n2 + 1) / (n2 + 1);
}
}  // namespace detail

inline double heaviside_jump_integral(const TransitionProfile& h, double eps,
                                      int n1, int n2, double window = 10.0) {
  if (!(eps > 0.0)) throw std::invalid_argument("jump integral: eps <= 0");
  if (n1 < 0 || n2 < 0) throw std::invalid_argument("jump integral: negative power");
  if (n1 == n2) return 0.0;
  auto f = [&](double y) {
    double v = h.value(y);
    return (std::pow(v, n1) - std::pow(v, n2)) * h.derivative(y);
  };
  double body = integrate_adaptive(f, -window, window, 1e-13).value;
  double tail_right = detail::power_antiderivative(1.0, n1, n2) -
                      detail::power_antiderivative(h.value(window), n1, n2);
  double tail_left = detail::power_antiderivative(h.value(-window), n1, n2) -
                     detail::power_antiderivative(0.0, n1, n2);
  return body + tail_left + tail_right;
}

// ---------------------------------------------------------------------------
// Position-space synthesis of the mollifier.
//
// phi(z) = (1/pi) int_0^outer Fphi(v) cos(v z) dv, so that phi_eps(y) =
// phi(y/eps)/eps has Fourier profile Fphi(eps k). phi decays faster than any
// power but is expensive to evaluate, so a cubic-Hermite table per profile is
// built once and shared. Beyond the table range phi is treated as zero; the
// range is wide enough that the dropped mass stays below 1e-8
// for every stock profile (the gauss_step kernel decays slowest).

namespace detail {

struct MollifierTable {
  double z_max = 400.0;
  double dz = 0.05;
  std::vector<double> val;   // phi(i * dz)
  std::vector<double> der;   // phi'(i * dz)

  double eval(double z) const {
    double az = std::abs(z);
    if (az >= z_max) return 0.0;
    double t = az / dz;
    auto i = static_cast<std::size_t>(t);
    if (i + 1 >= val.size()) return 0.0;
    double s = t - static_cast<double>(i);
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    double h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s);
    double h11 = s * s * (s - 1);
    return h00 * val[i] + h10 * dz * der[i] + h01 * val[i + 1] +
           h11 * dz * der[i + 1];
  }
};

inline double synth_phi(const PlateauBump& p, double z) {
  double b = p.outer();
  int panels = std::max(8, static_cast<int>(std::ceil(b * std::abs(z) / 3.0)));
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    double lo = b * i / panels, hi = b * (i + 1) / panels;
    sum += gauss15([&](double v) { return p.value(v) * std::cos(v * z); }, lo, hi);
  }
  return sum / (4.0 * std::atan(1.0));
}

inline double synth_phi_deriv(const PlateauBump& p, double z) {
  double b = p.outer();
  int panels = std::max(8, static_cast<int>(std::ceil(b * std::abs(z) / 3.0)));
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    double lo = b * i / panels, hi = b * (i + 1) / panels;
    sum += gauss15([&](double v) { return -v * p.value(v) * std::sin(v * z); },
                   lo, hi);
  }
  return sum / (4.0 * std::atan(1.0));
}

inline std::shared_ptr<const MollifierTable> mollifier_table(const Mollifier& m) {
  using Key = std::tuple<int, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const MollifierTable>> cache;
  Key key{static_cast<int>(m.profile().family()), m.inner(), m.outer()};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto table = std::make_shared<MollifierTable>();
  auto n = static_cast<std::size_t>(table->z_max / table->dz) + 1;
  table->val.resize(n);
  table->der.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = static_cast<double>(i) * table->dz;
    table->val[i] = synth_phi(m.profile(), z);
    table->der[i] = synth_phi_deriv(m.profile(), z);
  }
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = cache.emplace(key, std::move(table));
  return it->second;
}

}  // namespace detail

// phi_eps(y): the position-space mollifier at scale eps.
inline double mollifier_position(const Mollifier& m, double eps, double y) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollifier_position: eps <= 0");
  return detail::mollifier_table(m)->eval(y / eps) / eps;
}

// Cumulative mollifier mass: (H * phi_eps)(x) = 1/2 + (1/pi) int_0^outer
// Fphi(v) sin(v x / eps) / v dv. Evaluated by oscillation-aware panels; this
// is the convolution-built smoothed jump used for cross-checks.
inline double mollifier_cumulative(const Mollifier& m, double eps, double x) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollifier_cumulative: eps <= 0");
  double b = m.outer();
  double z = x / eps;
  int panels = std::max(8, static_cast<int>(std::ceil(b * std::abs(z) / 3.0)));
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    double lo = b * i / panels, hi = b * (i + 1) / panels;
    sum += gauss15(
        [&](double v) {
          return v == 0.0 ? m.value(0.0) * z : m.value(v) * std::sin(v * z) / v;
        },
        lo, hi);
  }
  return 0.5 + sum / (4.0 * std::atan(1.0));
}

// ---------------------------------------------------------------------------
// Embedding of distributions as representative families by convolution with
// phi_eps.

enum class DistributionToken { dirac_delta, heaviside };

namespace detail {
inline void check_embed_grid(const Mollifier& phi, double eps,
                             const SampleGrid& grid) {
  grid.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("embed: eps <= 0");
  if (grid.spacing() > eps / phi.outer())
    throw resolution_error(
        "embed: grid spacing " + std::to_string(grid.spacing()) +
        " cannot resolve scale eps/outer = " + std::to_string(eps / phi.outer()));
}
}  // namespace detail

// Token overload: exact shortcuts for the two singular objects.
inline Representative embed_distribution(DistributionToken token,
                                         const Mollifier& phi, double eps,
                                         const SampleGrid& grid) {
  detail::check_embed_grid(phi, eps, grid);
  if (token == DistributionToken::dirac_delta) {
    Mollifier m = phi;
    Representative r(
        "delta*phi[" + m.label() + "]",
        [m](double e, double x) { return mollifier_position(m, e, x); });
    r.with_grid(grid);
    return r;
  }
  Mollifier m = phi;
  Representative r(
      "theta*phi[" + m.label() + "]",
      [m](double e, double x) { return mollifier_cumulative(m, e, x); });
  r.with_grid(grid);
  return r;
}

namespace detail {

template <class F>
double convolve_at(const MollifierTable& table, const F& f, double eps,
                   double x) {
  double radius = table.z_max * eps;
  double panel = std::max(3.0 * eps, radius / 4096.0);
  auto n = static_cast<int>(std::ceil(2.0 * radius / panel));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double lo = -radius + 2.0 * radius * i / n;
    double hi = -radius + 2.0 * radius * (i + 1) / n;
    sum += integrate_adaptive(
               [&](double s) { return table.eval(s / eps) / eps * f(x - s); },
               lo, hi, 1e-9, 3)
               .value;
  }
  return sum;
}

}  // namespace detail

// General locally integrable f: (f * phi_eps) sampled once per eps on the
// grid (kernel-oscillation panels under the hood), then read back through a
// cubic interpolant. The grid guard keeps the spacing at or below eps/outer,
// which the interpolant needs.
inline Representative embed_distribution(std::function<double(double)> f,
                                         std::string f_label,
                                         const Mollifier& phi, double eps,
                                         const SampleGrid& grid) {
  detail::check_embed_grid(phi, eps, grid);
  Mollifier m = phi;
  auto table = detail::mollifier_table(m);

  struct Cache {
    std::mutex mu;
    std::map<double, std::vector<double>> per_eps;
  };
  auto cache = std::make_shared<Cache>();

  auto eval = [m, table, f, grid, cache](double e, double x) {
    if (x < grid.lo || x > grid.hi)
      return detail::convolve_at(*table, f, e, x);
    std::lock_guard<std::mutex> lock(cache->mu);
    auto it = cache->per_eps.find(e);
    if (it == cache->per_eps.end()) {
      std::vector<double> samples(grid.points);
      for (int i = 0; i < grid.points; ++i)
        samples[i] = detail::convolve_at(*table, f, e, grid.at(i));
      it = cache->per_eps.emplace(e, std::move(samples)).first;
    }
    const auto& s = it->second;
    double t = (x - grid.lo) / grid.spacing();
    auto i = static_cast<long>(t);
    if (i < 1) i = 1;
    if (i > grid.points - 3) i = grid.points - 3;
    double u = t - static_cast<double>(i);
    // Catmull-Rom through the four surrounding samples
    double p0 = s[i - 1], p1 = s[i], p2 = s[i + 1], p3 = s[i + 2];
    return p1 + 0.5 * u * (p2 - p0 +
                           u * (2 * p0 - 5 * p1 + 4 * p2 - p3 +
                                u * (3 * (p1 - p2) + p3 - p0)));
  };
  Representative r("(" + f_label + ")*phi[" + m.label() + "]", eval);
  r.with_grid(grid);
  return r;
}

// ---------------------------------------------------------------------------
// Decay verdicts: is the family infinitesimal in the pairing sense?

struct InfinitesimalReport {
  struct PerTest {
    std::string test_label;
    double slope = 0.0;          // fitted d log|pairing| / d log eps
    double last_pairing = 0.0;   // at the smallest eps
    bool decays = false;
  };
  bool verdict = false;
  double slope_threshold = 0.8;
  std::vector<PerTest> tests;
};

// Pairs r against each test function along the eps ladder and fits the
// log-log slope. Verdict is true when every pairing decays with slope at
// least the threshold (pairings already at the floor count as decayed).
inline InfinitesimalReport is_infinitesimal(
    const Representative& r, const std::vector<TestFunction>& tests,
    const std::vector<double>& ladder, double slope_threshold = 0.8) {
  if (ladder.size() < 4)
    throw std::invalid_argument("is_infinitesimal: ladder needs >= 4 points");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (!(ladder[i] < ladder[i - 1]) || !(ladder[i] > 0.0))
      throw std::invalid_argument("is_infinitesimal: ladder must decrease");
  if (tests.empty())
    throw std::invalid_argument("is_infinitesimal: no test functions");

  constexpr double kFloor = 1e-14;
  InfinitesimalReport report;
  report.slope_threshold = slope_threshold;
  for (const auto& psi : tests) {
    InfinitesimalReport::PerTest row;
    row.test_label = psi.label;
    std::vector<double> lx, ly;
    double scale = 0.0;
    std::vector<double> values(ladder.size());
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      values[k] = pairing(r, psi, ladder[k]);
      scale = std::max(scale, std::abs(values[k]));
    }
    row.last_pairing = values.back();
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      double av = std::abs(values[k]);
      if (av > kFloor * std::max(1.0, scale)) {
        lx.push_back(std::log(ladder[k]));
        ly.push_back(std::log(av));
      }
    }
    if (lx.size() < ladder.size() / 2) {
      // essentially zero all along the ladder
      row.slope = std::numeric_limits<double>::infinity();
      row.decays = true;
    } else {
      double n = static_cast<double>(lx.size());
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
      }
      row.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      row.decays = row.slope >= slope_threshold;
    }
    report.tests.push_back(std::move(row));
  }
  report.verdict = std::all_of(report.tests.begin(), report.tests.end(),
                               [](const auto& t) { return t.decays; });
  return report;
}

// Default geometric ladder 2^-2 .. 2^-10.
inline std::vector<double> default_eps_ladder(int first = 2, int last = 10) {
  std::vector<double> out;
  for (int k = first; k <= last; ++k) out.push_back(std::ldexp(1.0, -k));
  return out;
}

}  // namespace qflab
