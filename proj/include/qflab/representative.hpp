#pragma once

// Scalar regularization families: objects R(eps, x) defined for all
// eps in (0, eps_max], carrying optional analytic x-derivative rules and an
// optional sampling window. These are the working currency of gfcalc.hpp.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qflab/common.hpp"
#include "qflab/quadrature.hpp"

namespace qflab {

// Uniform sample window. Used both as an export grid and as a resolution
// guard for convolution-built families.
struct SampleGrid {
  double lo = -1.0;
  double hi = 1.0;
  int points = 257;

  double spacing() const { return (hi - lo) / (points - 1); }
  double at(int i) const { return lo + i * spacing(); }

  void validate() const {
    if (!(hi > lo) || points < 2)
      throw std::invalid_argument("sample grid needs hi > lo and >= 2 points");
  }
  bool operator==(const SampleGrid& o) const {
    return lo == o.lo && hi == o.hi && points == o.points;
  }
};

class Representative {
 public:
  using Eval = std::function<double(double eps, double x)>;

  Representative() = default;
  Representative(std::string label, Eval eval, double eps_max = 1.0)
      : label_(std::move(label)), eval_(std::move(eval)), eps_max_(eps_max) {
    if (!(eps_max_ > 0.0))
      throw std::invalid_argument("representative needs eps_max > 0");
  }

  double operator()(double eps, double x) const {
    check_eps(eps);
    return eval_(eps, x);
  }

  // Analytic x-derivatives, orders 1 and 2, when declared.
  Representative& with_derivative(int order, Eval rule) {
    if (order == 1)
      dx1_ = std::move(rule);
    else if (order == 2)
      dx2_ = std::move(rule);
    else
      throw std::invalid_argument("derivative rules go up to order 2");
    return *this;
  }

  bool has_derivative(int order) const {
    return order == 1 ? bool(dx1_) : order == 2 ? bool(dx2_) : false;
  }

  double derivative(int order, double eps, double x) const {
    check_eps(eps);
    if (order == 1 && dx1_) return dx1_(eps, x);
    if (order == 2 && dx2_) return dx2_(eps, x);
    throw std::invalid_argument("no derivative rule of order " +
                                std::to_string(order));
  }

  Representative& with_grid(SampleGrid g) {
    g.validate();
    grid_ = g;
    return *this;
  }
  const std::optional<SampleGrid>& grid() const { return grid_; }

  const std::string& label() const { return label_; }
  double eps_max() const { return eps_max_; }

  static Representative constant(double c) {
    return Representative("const(" + std::to_string(c) + ")",
                          [c](double, double) { return c; });
  }

 private:
  void check_eps(double eps) const {
    if (!(eps > 0.0) || eps > eps_max_)
      throw std::invalid_argument("eps outside (0, eps_max]");
  }

  std::string label_;
  Eval eval_;
  double eps_max_ = 1.0;
  Eval dx1_, dx2_;
  std::optional<SampleGrid> grid_;
};

// Pointwise product. Families sampled on different windows cannot be
// multiplied; a shared window (or two windowless families) is required.
inline Representative product(const Representative& r1,
                              const Representative& r2) {
  if (r1.grid() && r2.grid() && !(*r1.grid() == *r2.grid()))
    throw mismatch_error("representative product: sample windows differ");
  double eps_max = std::min(r1.eps_max(), r2.eps_max());
  Representative out(
      r1.label() + "*" + r2.label(),
      [r1, r2](double eps, double x) { return r1(eps, x) * r2(eps, x); },
      eps_max);
  if (r1.grid())
    out.with_grid(*r1.grid());
  else if (r2.grid())
    out.with_grid(*r2.grid());
  return out;
}

// Smooth test function with an explicit support window; pairings integrate
// over that window.
struct TestFunction {
  std::string label;
  std::function<double(double)> f;
  double lo = -1.0;
  double hi = 1.0;

  static TestFunction gaussian(double center, double width) {
    return {"gauss(" + std::to_string(center) + "," + std::to_string(width) + ")",
            [center, width](double x) {
              double t = (x - center) / width;
              return std::exp(-t * t);
            },
            center - 8.0 * width, center + 8.0 * width};
  }

  // Compactly supported C-infinity bump on (center-width, center+width).
  static TestFunction bump(double center, double width) {
    return {"bump(" + std::to_string(center) + "," + std::to_string(width) + ")",
            [center, width](double x) {
              double t = (x - center) / width;
              double s = 1.0 - t * t;
              return s > 0.0 ? std::exp(1.0 - 1.0 / s) : 0.0;
            },
            center - width, center + width};
  }

  static TestFunction plateau(double lo, double hi) {
    return {"plateau", [](double) { return 1.0; }, lo, hi};
  }
};

// integral of r(eps, .) against psi over psi's window (clipped to the
// representative's own window when it has one). The window is pre-split at a
// golden-section point: bisection-based adaptivity loses spikes that sit
// exactly on a panel boundary, and rational feature locations (0 in
// particular) hit dyadic midpoints of symmetric windows.
inline double pairing(const Representative& r, const TestFunction& psi,
                      double eps, double tol = 1e-10) {
  double lo = psi.lo, hi = psi.hi;
  if (r.grid()) {
    lo = std::max(lo, r.grid()->lo);
    hi = std::min(hi, r.grid()->hi);
  }
  if (!(hi > lo)) return 0.0;
  auto f = [&](double x) { return r(eps, x) * psi.f(x); };
  // Representatives concentrate structure of width ~eps near the origin;
  // a blind bisection can step over it, so anchor panels on a geometric
  // ladder around zero before going adaptive inside each panel.
  std::vector<double> brk{lo, hi};
  double span = std::max(std::abs(lo), std::abs(hi));
  if (lo < 0.0 && hi > 0.0) brk.push_back(0.0);
  for (double t = eps; t < span && std::isfinite(t); t *= 2.0) {
    if (-t > lo && -t < hi) brk.push_back(-t);
    if (t > lo && t < hi) brk.push_back(t);
  }
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < brk.size(); ++i)
    acc += integrate_adaptive(f, brk[i], brk[i + 1], tol).value;
  return acc;
}

}  // namespace qflab
