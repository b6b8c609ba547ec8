// Transition amplitudes of the regularized scattering operator and their
// behaviour along the co-scaled refinement ladder: single amplitudes, sweeps
// over (rung, mollifier) pairs, association of a sweep by averaging, and the
// perturbative partial sums for cross-checking at small coupling.
//
// States are described by grid-independent recipes (one-particle wave
// packets in physical momentum) and realized on whatever basis the current
// rung provides, so a sweep compares like with like while the grid refines.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qflab/averaging.hpp"
#include "qflab/common.hpp"
#include "qflab/dynamics.hpp"
#include "qflab/field.hpp"
#include "qflab/fock.hpp"
#include "qflab/profiles.hpp"

namespace qflab {

// One-particle Gaussian wave packet centered at a physical momentum.  The
// amplitude on mode k is exp(-|k - center|^2 / (2 width^2)) times a plane
// phase exp(i k . shift); realization normalizes on the target basis, so
// the same recipe is comparable across grids of different reach.
struct StateRecipe {
  std::vector<double> center;
  double width = 0.0;
  std::vector<double> shift;
  std::string label;

  void validate(int dim) const {
    if (!(width > 0.0))
      throw std::invalid_argument("StateRecipe: width must be positive");
    if (int(center.size()) != dim)
      throw mismatch_error("StateRecipe: center dimension mismatch");
    if (!shift.empty() && int(shift.size()) != dim)
      throw mismatch_error("StateRecipe: shift dimension mismatch");
  }

  FockVector realize(const FockBasis& basis) const {
    const ModeGrid& g = basis.grid();
    validate(g.dim());
    FockVector out(basis);
    std::vector<int> occ(g.mode_count(), 0);
    for (std::size_t m = 0; m < g.mode_count(); ++m) {
      double r2 = 0.0;
      double arg = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        const double dk = g.k(m, a) - center[std::size_t(a)];
        r2 += dk * dk;
        if (!shift.empty()) arg += g.k(m, a) * shift[std::size_t(a)];
      }
      occ[m] = 1;
      out.amps()(long(basis.index_of(occ))) =
          std::exp(std::complex<double>(-r2 / (2.0 * width * width), arg));
      occ[m] = 0;
    }
    const double n = out.norm();
    if (!(n > 0.0))
      throw std::invalid_argument("StateRecipe: packet vanished on this grid");
    out.amps() /= n;
    return out;
  }
};

// One measured overlap.  value = |<F1, S F2>|; phase is the unit-modulus
// direction of the overlap (zero when the modulus vanishes).  The grid is
// described by (spatial_dim, j_max, basis_dim); seed is provenance from the
// producing sweep.
struct AmplitudeRecord {
  double eps = 0.0;
  int ladder_index = 0;
  int j_max = 0;
  int spatial_dim = 0;
  std::size_t basis_dim = 0;
  double value = 0.0;
  std::complex<double> phase;
  std::string mollifier;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_normalized(const FockVector& f, const char* who) {
  if (std::abs(f.norm() - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(who) +
                                ": states must be normalized");
}

// The basis layout is a pure function of (grid, n_max), so a vector moves to
// a freshly assembled basis by amplitude copy once the layouts provably
// agree.
inline FockVector rebase(const FockVector& f, const FockBasis& target) {
  if (&f.basis() == &target) return f;
  const ModeGrid& a = f.basis().grid();
  const ModeGrid& b = target.grid();
  if (a.dim() != b.dim() || a.j_max() != b.j_max() ||
      a.box_length() != b.box_length() || a.mass() != b.mass() ||
      f.basis().n_max() != target.n_max())
    throw mismatch_error("rebase: bases have different layouts");
  FockVector out(target);
  out.amps() = f.amps();
  return out;
}

inline AmplitudeRecord make_record(const ModelParams& p,
                                   const std::complex<double>& overlap,
                                   int ladder_index, std::uint64_t seed) {
  AmplitudeRecord rec;
  rec.eps = p.eps;
  rec.ladder_index = ladder_index;
  rec.j_max = p.grid.j_max();
  rec.spatial_dim = p.grid.dim();
  rec.basis_dim = detail::truncated_dimension(p.grid.mode_count(), p.n_max);
  rec.value = std::abs(overlap);
  rec.phase = rec.value > 1e-300 ? overlap / rec.value
                                 : std::complex<double>(0.0, 0.0);
  rec.mollifier = p.mollifier.label();
  rec.seed = seed;
  return rec;
}

}  // namespace detail

inline AmplitudeRecord amplitude(const ModelParams& p,
                                 const HamiltonianBundle& b,
                                 const FockVector& f1, const FockVector& f2,
                                 double t, int ladder_index = 0,
                                 std::uint64_t seed = 0) {
  detail::check_normalized(f1, "amplitude");
  detail::check_normalized(f2, "amplitude");
  FockVector moved = s_matrix(p, b, t).apply(f2);
  return detail::make_record(p, inner(f1, moved), ladder_index, seed);
}

inline AmplitudeRecord amplitude(const ModelParams& p, const FockVector& f1,
                                 const FockVector& f2, double t,
                                 std::uint64_t seed = 0) {
  HamiltonianBundle b = assemble_hamiltonian(p);
  return amplitude(p, b, detail::rebase(f1, b.basis()),
                   detail::rebase(f2, b.basis()), t, 0, seed);
}

// Sweep over the ladder for each mollifier: one record per (mollifier, rung),
// ordered by mollifier then rung index, built in parallel but reduced
// deterministically.  requested_rungs is what the experiment asked of
// co_scaled_ladder; a ladder shortened by the dimension cap flags the sweep
// as partial instead of failing it.
struct SweepResult {
  std::vector<AmplitudeRecord> records;
  bool partial = false;
  int requested_rungs = 0;
};

inline SweepResult amplitude_sweep(const ModelParams& base,
                                   const std::vector<LadderRung>& ladder,
                                   const StateRecipe& final_state,
                                   const StateRecipe& initial_state, double t,
                                   const std::vector<Mollifier>& mollifiers,
                                   int requested_rungs = 0,
                                   std::uint64_t seed = 0) {
  if (ladder.empty())
    throw std::invalid_argument("amplitude_sweep: empty ladder");
  if (mollifiers.empty())
    throw std::invalid_argument("amplitude_sweep: empty mollifier set");
  final_state.validate(base.grid.dim());
  initial_state.validate(base.grid.dim());

  SweepResult out;
  out.requested_rungs =
      requested_rungs > 0 ? requested_rungs : int(ladder.size());
  out.partial = int(ladder.size()) < out.requested_rungs;

  const std::size_t total = mollifiers.size() * ladder.size();
  std::vector<AmplitudeRecord> slots(total);
  indexed_for(total, [&](std::size_t i) {
    const Mollifier& mol = mollifiers[i / ladder.size()];
    const LadderRung& rung = ladder[i % ladder.size()];
    ModelParams p = base;
    p.grid = ModeGrid(base.grid.dim(), base.grid.box_length(), rung.j_max,
                      base.grid.mass());
    p.mollifier = mol;
    p.eps = rung.eps;
    HamiltonianBundle b = assemble_hamiltonian(p);
    FockVector f1 = final_state.realize(b.basis());
    FockVector f2 = initial_state.realize(b.basis());
    slots[i] = amplitude(p, b, f1, f2, t, rung.index, seed);
  });
  out.records = std::move(slots);
  return out;
}

// Association of a sweep: per-mollifier averaged value over the eps ladder,
// plus the spread across mollifiers.  The spread is the diagnostic for
// whether the averaged amplitude depends on the regularizing profile.
struct AssociationReport {
  std::vector<AverageReport> per_mollifier;
  double spread = 0.0;
};

// settled limit if the ladder converged, else the deepest averaged value;
// the raw [liminf, limsup] window is the unaveraged oscillation and stays a
// separate diagnostic
inline double report_value(const AverageReport& rep) {
  if (rep.limit) return *rep.limit;
  if (!rep.a_values.empty()) return rep.a_values.back();
  return 0.5 * (rep.liminf + rep.limsup);
}

inline AssociationReport associate_amplitude(
    const std::vector<AmplitudeRecord>& records,
    SweepMode mode = SweepMode::trapezoid, double tol = 1e-3) {
  std::vector<std::string> order;
  for (const AmplitudeRecord& r : records)
    if (std::find(order.begin(), order.end(), r.mollifier) == order.end())
      order.push_back(r.mollifier);
  if (order.empty())
    throw std::invalid_argument("associate_amplitude: no records");

  AssociationReport out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const std::string& label : order) {
    std::vector<std::pair<double, double>> samples;
    std::uint64_t seed = 0;
    for (const AmplitudeRecord& r : records)
      if (r.mollifier == label) {
        samples.emplace_back(r.eps, r.value);
        seed = r.seed;
      }
    AverageReport rep = sweep_average(std::move(samples), mode, seed, tol,
                                      label);
    const double v = report_value(rep);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    out.per_mollifier.push_back(std::move(rep));
  }
  out.spread = hi - lo;
  return out;
}

// Overlap against the order-k partial sum of the coupling expansion; order 0
// is the bare overlap.  The zero-point phase is not restored: the partial
// sums approximate the phase-stripped scattering operator, and callers
// comparing against amplitude() account for the known global phase.
inline std::complex<double> perturbative_amplitude(const ModelParams& p,
                                                   const HamiltonianBundle& b,
                                                   const FockVector& f1,
                                                   const FockVector& f2,
                                                   double t, int order) {
  detail::check_normalized(f1, "perturbative_amplitude");
  detail::check_normalized(f2, "perturbative_amplitude");
  if (order == 0) return inner(f1, f2);
  return inner(f1, dyson_series(p, b, t, order).apply(f2));
}

inline std::complex<double> perturbative_amplitude(const ModelParams& p,
                                                   const FockVector& f1,
                                                   const FockVector& f2,
                                                   double t, int order) {
  HamiltonianBundle b = assemble_hamiltonian(p);
  return perturbative_amplitude(p, b, detail::rebase(f1, b.basis()),
                                detail::rebase(f2, b.basis()), t, order);
}

}  // namespace qflab
