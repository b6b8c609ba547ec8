#pragma once

// Thin wrappers around Boost.Math quadrature, plus panel drivers used by the
// oscillatory-average engines.

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

namespace qflab {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;       // estimate
  std::size_t evals = 0;    // approximate integrand evaluations
};

// Adaptive Gauss-Kronrod on [a, b].  The integral is transplanted to [0, 1]
// first: the boost driver leaves its internal error estimate in the unit
// frame while the tolerance test scales with the interval, so narrow
// intervals otherwise recurse to the full tree and report inflated errors.
template <class F>
QuadResult integrate_adaptive(const F& f, double a, double b,
                              double tol = 1e-12, unsigned max_depth = 15) {
  QuadResult r;
  std::size_t count = 0;
  const double w = b - a;
  auto unit = [&](double t) {
    ++count;
    return f(a + t * w) * w;
  };
  double err = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      unit, 0.0, 1.0, max_depth, tol, &err);
  r.error = err;
  r.evals = count;
  return r;
}

// Fixed-order Gauss-Legendre on [a, b]; no error estimate. Order 7 is exact
// through degree 13, ample for one smooth half-oscillation.
template <class F>
double gauss7(const F& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 7>::integrate(f, a, b);
}

template <class F>
double gauss15(const F& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 15>::integrate(f, a, b);
}

// Composite fixed-order rule over consecutive panels [x_i, x_{i+1}].
template <class F>
double gauss7_panels(const F& f, const std::vector<double>& breaks) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    sum += gauss7(f, breaks[i], breaks[i + 1]);
  return sum;
}

}  // namespace qflab
