// Regularized free scalar field on the truncated Fock space.
//
// A RegularizedField fixes a mollifier profile and a scale eps and evaluates
// the field and its conjugate momentum at a spacetime point as dense
// FieldOperators.  Mode amplitudes carry the factor Fphi(eps |k_j|), the
// Fourier side of smoothing the sharp field with the scaled profile, so no
// position-space convolution error enters.  Derivatives act analytically as
// per-mode factors (ik0 for time, -|k|^2 for the Laplacian), which keeps the
// dispersion identity exact mode by mode.
//
// The equal-time commutator of field and momentum is a scalar on the safe
// sector; RegularizedDelta holds the kernel that scalar traces out as the
// separation varies.  When eps is small enough that every retained mode sits
// on the mollifier plateau, the kernel degenerates to the Dirichlet kernel of
// the grid (see sharp_epsilon).

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qflab/common.hpp"
#include "qflab/fock.hpp"
#include "qflab/profiles.hpp"

namespace qflab {

namespace detail {

inline void check_position(const ModeGrid& grid, const std::vector<double>& x,
                           const char* what) {
  if (x.size() != std::size_t(grid.dim()))
    throw mismatch_error(std::string(what) +
                         ": position dimension does not match the grid");
}

inline double mode_norm(const ModeGrid& grid, std::size_t mode) {
  double s = 0.0;
  for (int a = 0; a < grid.dim(); ++a) {
    double ka = grid.k(mode, a);
    s += ka * ka;
  }
  return std::sqrt(s);
}

}  // namespace detail

// Kernel rho_eps(y) = L^{-d} sum_j Fphi(eps |k_j|)^2 cos(k_j . y): the scalar
// the equal-time field/momentum commutator produces in place of a sharp
// delta.  Even in y; with all mode weights equal to one it is the Dirichlet
// kernel of the grid, and its box integral is Fphi(0)^2 regardless of eps.
class RegularizedDelta {
 public:
  RegularizedDelta(const ModeGrid& grid, Mollifier mol, double eps)
      : grid_(grid), mol_(std::move(mol)), eps_(eps) {
    if (!(eps > 0.0))
      throw std::invalid_argument("RegularizedDelta: eps must be positive");
    w2_.resize(grid_.mode_count());
    for (std::size_t j = 0; j < grid_.mode_count(); ++j) {
      double f = mol_.value(eps_ * detail::mode_norm(grid_, j));
      w2_[j] = f * f;
    }
  }

  const ModeGrid& grid() const { return grid_; }
  const Mollifier& mollifier() const { return mol_; }
  double eps() const { return eps_; }

  double value(const std::vector<double>& y) const {
    detail::check_position(grid_, y, "RegularizedDelta");
    double s = 0.0;
    for (std::size_t j = 0; j < grid_.mode_count(); ++j) {
      double ph = 0.0;
      for (int a = 0; a < grid_.dim(); ++a) ph += grid_.k(j, a) * y[std::size_t(a)];
      s += w2_[j] * std::cos(ph);
    }
    return s * std::pow(grid_.box_length(), -grid_.dim());
  }

  double value(double y) const { return value(std::vector<double>{y}); }

 private:
  ModeGrid grid_;
  Mollifier mol_;
  double eps_;
  std::vector<double> w2_;
};

inline double rho(const RegularizedDelta& rd, const std::vector<double>& y) {
  return rd.value(y);
}

inline double rho(const RegularizedDelta& rd, double y) { return rd.value(y); }

// Field evaluator: basis, mollifier and scale are fixed up front and the
// per-mode amplitude table is precomputed, so evaluating at (x, t) is a pure
// function with no mutable state.  base(j) is arranged so that the raising
// coefficient produced through create() comes out as
// (2 L^d k0_j)^{-1/2} Fphi(eps |k_j|).
class RegularizedField {
 public:
  RegularizedField(const FockBasis& basis, Mollifier mol, double eps)
      : basis_(&basis), mol_(std::move(mol)), eps_(eps) {
    if (!(eps > 0.0))
      throw std::invalid_argument("RegularizedField: eps must be positive");
    const ModeGrid& g = basis.grid();
    const double vol = std::pow(g.box_length(), g.dim());
    const double sw = std::sqrt(g.weight());
    weight_.resize(g.mode_count());
    base_.resize(g.mode_count());
    for (std::size_t j = 0; j < g.mode_count(); ++j) {
      weight_[j] = mol_.value(eps_ * detail::mode_norm(g, j));
      base_[j] = weight_[j] / (std::sqrt(2.0 * vol * g.k0(j)) * sw);
    }
  }

  const FockBasis& basis() const { return *basis_; }
  const ModeGrid& grid() const { return basis_->grid(); }
  const Mollifier& mollifier() const { return mol_; }
  double eps() const { return eps_; }

  // Fphi(eps |k_j|), the amplitude filter on mode j.
  double mode_weight(std::size_t mode) const { return weight_[mode]; }
  double base(std::size_t mode) const { return base_[mode]; }

  RegularizedDelta delta() const {
    return RegularizedDelta(grid(), mol_, eps_);
  }

 private:
  const FockBasis* basis_;
  Mollifier mol_;
  double eps_;
  std::vector<double> weight_;
  std::vector<double> base_;
};

namespace detail {

// psi_j = base_j * factor(j) * exp(i (k0_j t - k_j . x)).  Every field-like
// operator here is create(psi) + annihilate(conj(psi)), which is Hermitian by
// construction for any factor.
template <class Factor>
Eigen::VectorXcd smearing_profile(const RegularizedField& rf,
                                  const std::vector<double>& x, double t,
                                  Factor&& factor) {
  const ModeGrid& g = rf.grid();
  Eigen::VectorXcd psi(long(g.mode_count()));
  for (std::size_t j = 0; j < g.mode_count(); ++j) {
    double phase = g.k0(j) * t;
    for (int a = 0; a < g.dim(); ++a) phase -= g.k(j, a) * x[std::size_t(a)];
    psi[long(j)] = rf.base(j) * std::exp(std::complex<double>(0.0, phase)) *
                   std::complex<double>(factor(j));
  }
  return psi;
}

template <class Factor>
FieldOperator mode_sum_operator(const RegularizedField& rf,
                                const std::vector<double>& x, double t,
                                Factor&& factor) {
  Eigen::VectorXcd psi =
      smearing_profile(rf, x, t, std::forward<Factor>(factor));
  return create(rf.basis(), psi) + annihilate(rf.basis(), psi.conjugate());
}

}  // namespace detail

inline FieldOperator free_field(const RegularizedField& rf,
                                const std::vector<double>& x, double t) {
  detail::check_position(rf.grid(), x, "free_field");
  return detail::mode_sum_operator(rf, x, t, [](std::size_t) { return 1.0; });
}

inline FieldOperator free_field(const RegularizedField& rf, double x, double t) {
  return free_field(rf, std::vector<double>{x}, t);
}

// Analytic time derivative of the field: each mode picks up i k0_j.
inline FieldOperator conjugate_momentum(const RegularizedField& rf,
                                        const std::vector<double>& x, double t) {
  detail::check_position(rf.grid(), x, "conjugate_momentum");
  const ModeGrid& g = rf.grid();
  return detail::mode_sum_operator(rf, x, t, [&g](std::size_t j) {
    return std::complex<double>(0.0, g.k0(j));
  });
}

inline FieldOperator conjugate_momentum(const RegularizedField& rf, double x,
                                        double t) {
  return conjugate_momentum(rf, std::vector<double>{x}, t);
}

// Analytic spatial derivative along one axis: per-mode factor -i k_a.
inline FieldOperator field_gradient(const RegularizedField& rf,
                                    const std::vector<double>& x, double t,
                                    int axis) {
  detail::check_position(rf.grid(), x, "field_gradient");
  const ModeGrid& g = rf.grid();
  if (axis < 0 || axis >= g.dim())
    throw std::invalid_argument("field_gradient: axis out of range");
  return detail::mode_sum_operator(rf, x, t, [&g, axis](std::size_t j) {
    return std::complex<double>(0.0, -g.k(j, axis));
  });
}

// Analytic Laplacian: per-mode factor -|k|^2.
inline FieldOperator field_laplacian(const RegularizedField& rf,
                                     const std::vector<double>& x, double t) {
  detail::check_position(rf.grid(), x, "field_laplacian");
  const ModeGrid& g = rf.grid();
  return detail::mode_sum_operator(rf, x, t, [&g](std::size_t j) {
    double k2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) k2 += g.k(j, a) * g.k(j, a);
    return -k2;
  });
}

// (d^2/dt^2 - Laplacian + m^2) applied to the field with all derivatives
// analytic, i.e. the per-mode factor m^2 + |k|^2 - k0^2.  Since k0 is defined
// as sqrt(|k|^2 + m^2) the factor vanishes to rounding, mode by mode.
inline FieldOperator dispersion_defect(const RegularizedField& rf,
                                       const std::vector<double>& x, double t) {
  detail::check_position(rf.grid(), x, "dispersion_defect");
  const ModeGrid& g = rf.grid();
  return detail::mode_sum_operator(rf, x, t, [&g](std::size_t j) {
    double f = g.mass() * g.mass() - g.k0(j) * g.k0(j);
    for (int a = 0; a < g.dim(); ++a) f += g.k(j, a) * g.k(j, a);
    return f;
  });
}

inline FieldOperator dispersion_defect(const RegularizedField& rf, double x,
                                       double t) {
  return dispersion_defect(rf, std::vector<double>{x}, t);
}

// Largest eps at which every retained mode still sits on the mollifier
// plateau, so Fphi(eps |k_j|) == 1 across the grid and the regularization is
// invisible.  A grid with only the zero mode is sharp at every scale.
inline double sharp_epsilon(const ModeGrid& grid, const Mollifier& mol) {
  double kmax = 0.0;
  for (std::size_t j = 0; j < grid.mode_count(); ++j)
    kmax = std::max(kmax, detail::mode_norm(grid, j));
  if (kmax == 0.0) return std::numeric_limits<double>::infinity();
  return mol.inner() / kmax;
}

// Equal-time commutator audit at separation x - x'.  scalar is the (vacuum,
// vacuum) entry of [field(x), momentum(x')]; target is i^{-1} times what the
// commutator should be, namely rho_eps(x - x'); defect measures
// [field, momentum] - i rho Id on columns whose occupation total leaves room
// for the two ladder steps the product needs.  field_field and
// momentum_momentum check that the like-for-like commutators vanish there.
struct CcrReport {
  std::complex<double> scalar;
  double target = 0.0;
  double defect = 0.0;
  double field_field = 0.0;
  double momentum_momentum = 0.0;
  std::size_t safe_states = 0;
};

inline CcrReport ccr_check(const RegularizedField& rf,
                           const std::vector<double>& x,
                           const std::vector<double>& xp, double t) {
  detail::check_position(rf.grid(), x, "ccr_check");
  detail::check_position(rf.grid(), xp, "ccr_check");
  const FockBasis& basis = rf.basis();

  FieldOperator phi_x = free_field(rf, x, t);
  FieldOperator phi_xp = free_field(rf, xp, t);
  FieldOperator pi_x = conjugate_momentum(rf, x, t);
  FieldOperator pi_xp = conjugate_momentum(rf, xp, t);

  std::vector<double> diff(x.size());
  for (std::size_t a = 0; a < x.size(); ++a) diff[a] = x[a] - xp[a];

  CcrReport rep;
  rep.safe_states = basis.safe_size(2);
  rep.target = rf.delta().value(diff);

  FieldOperator comm = commutator(phi_x, pi_xp);
  rep.scalar = comm.matrix()(0, 0);
  FieldOperator dev = comm - std::complex<double>(0.0, rep.target) *
                                 FieldOperator::identity(basis);
  rep.defect = dev.max_abs(rep.safe_states);
  rep.field_field = commutator(phi_x, phi_xp).max_abs(rep.safe_states);
  rep.momentum_momentum = commutator(pi_x, pi_xp).max_abs(rep.safe_states);
  return rep;
}

inline CcrReport ccr_check(const RegularizedField& rf, double x, double xp,
                           double t) {
  return ccr_check(rf, std::vector<double>{x}, std::vector<double>{xp}, t);
}

}  // namespace qflab
