#pragma once
// Truncated bosonic Fock space over a periodic momentum grid.
//
// Modes live on k_j = (2 pi / L) j with j in [-J, J]^d and carry the
// relativistic frequency k0_j = sqrt(k_j^2 + m^2).  States are occupation
// vectors with total particle number at most n_max, enumerated graded
// lexicographically so every particle-number sector is a contiguous index
// range.  Ladder operators smear a mode function against the grid with the
// cell weight w = (2 pi / L)^d standing in for the momentum integral;
// amplitudes raised past the truncation are dropped, which keeps raising
// and lowering exact mutual adjoints on the retained space.
//
// All types are immutable after construction.  Matrix work is dense Eigen;
// products are evaluated single-threaded and are deterministic.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qflab/common.hpp"

namespace qflab {

class ModeGrid {
 public:
  ModeGrid(int dim, double box_length, int j_max, double mass)
      : dim_(dim), box_(box_length), j_max_(j_max), mass_(mass) {
    if (dim_ < 1) throw std::invalid_argument("ModeGrid: dim must be >= 1");
    if (!(box_ > 0.0)) throw std::invalid_argument("ModeGrid: box length must be positive");
    if (j_max_ < 0) throw std::invalid_argument("ModeGrid: j_max must be >= 0");
    if (!(mass_ > 0.0)) throw std::invalid_argument("ModeGrid: mass must be positive");
    side_ = 2 * j_max_ + 1;
    std::size_t m = 1;
    for (int a = 0; a < dim_; ++a) m *= std::size_t(side_);
    k_.resize(m * std::size_t(dim_));
    k0_.resize(m);
    const double unit = 2.0 * M_PI / box_;
    for (std::size_t i = 0; i < m; ++i) {
      double k2 = 0.0;
      std::size_t rest = i;
      for (int a = 0; a < dim_; ++a) {
        int j = int(rest % std::size_t(side_)) - j_max_;
        rest /= std::size_t(side_);
        double k = unit * j;
        k_[i * std::size_t(dim_) + std::size_t(a)] = k;
        k2 += k * k;
      }
      k0_[i] = std::sqrt(k2 + mass_ * mass_);
    }
  }

  int dim() const { return dim_; }
  double box_length() const { return box_; }
  int j_max() const { return j_max_; }
  double mass() const { return mass_; }
  std::size_t mode_count() const { return k0_.size(); }

  // cell weight of one grid mode, the discrete stand-in for d^d k
  double weight() const { return std::pow(2.0 * M_PI / box_, dim_); }

  double k0(std::size_t mode) const { return k0_[mode]; }
  double k(std::size_t mode, int axis) const {
    return k_[mode * std::size_t(dim_) + std::size_t(axis)];
  }
  std::vector<int> j_vector(std::size_t mode) const {
    std::vector<int> j(dim_);
    std::size_t rest = mode;
    for (int a = 0; a < dim_; ++a) {
      j[std::size_t(a)] = int(rest % std::size_t(side_)) - j_max_;
      rest /= std::size_t(side_);
    }
    return j;
  }

 private:
  int dim_;
  double box_;
  int j_max_;
  double mass_;
  int side_;
  std::vector<double> k_;
  std::vector<double> k0_;
};

// Occupation-vector basis with total particle number <= n_max, ordered by
// sector and lexicographically within each sector.
class FockBasis {
 public:
  FockBasis(ModeGrid grid, int n_max) : grid_(std::move(grid)), n_max_(n_max) {
    if (n_max_ < 0) throw std::invalid_argument("FockBasis: n_max must be >= 0");
    const std::size_t m = grid_.mode_count();
    std::vector<int> occ(m, 0);
    offsets_.push_back(0);
    for (int s = 0; s <= n_max_; ++s) {
      emit_sector(occ, 0, s);
      offsets_.push_back(totals_.size());
    }
    for (std::size_t i = 0; i < size(); ++i)
      index_[occupation(i)] = i;
  }

  const ModeGrid& grid() const { return grid_; }
  int n_max() const { return n_max_; }
  std::size_t size() const { return totals_.size(); }
  int total(std::size_t i) const { return totals_[i]; }
  double energy(std::size_t i) const { return energies_[i]; }

  std::vector<int> occupation(std::size_t i) const {
    const std::size_t m = grid_.mode_count();
    return std::vector<int>(occ_.begin() + long(i * m), occ_.begin() + long((i + 1) * m));
  }

  std::size_t index_of(const std::vector<int>& occ) const {
    auto it = index_.find(occ);
    if (it == index_.end())
      throw std::invalid_argument("FockBasis: occupation vector outside the basis");
    return it->second;
  }

  // index range of the exact-total-s sector
  std::size_t sector_begin(int s) const { return offsets_[std::size_t(s)]; }
  std::size_t sector_end(int s) const { return offsets_[std::size_t(s) + 1]; }

  // number of leading indices whose total stays at least `margin` below
  // n_max; identities that climb `margin` rungs hold exactly on them
  std::size_t safe_size(int margin) const {
    int top = n_max_ - margin;
    if (top < 0) return 0;
    return offsets_[std::size_t(top) + 1];
  }

 private:
  void emit_sector(std::vector<int>& occ, std::size_t mode, int remaining) {
    const std::size_t m = grid_.mode_count();
    if (mode + 1 == m) {
      occ[mode] = remaining;
      push(occ);
      occ[mode] = 0;
      return;
    }
    for (int n = 0; n <= remaining; ++n) {
      occ[mode] = n;
      emit_sector(occ, mode + 1, remaining - n);
    }
    occ[mode] = 0;
  }

  void push(const std::vector<int>& occ) {
    int tot = 0;
    double e = 0.0;
    for (std::size_t j = 0; j < occ.size(); ++j) {
      tot += occ[j];
      e += occ[j] * grid_.k0(j);
    }
    occ_.insert(occ_.end(), occ.begin(), occ.end());
    totals_.push_back(tot);
    energies_.push_back(e);
  }

  ModeGrid grid_;
  int n_max_;
  std::vector<int> occ_;
  std::vector<int> totals_;
  std::vector<double> energies_;
  std::vector<std::size_t> offsets_;
  std::map<std::vector<int>, std::size_t> index_;
};

class FockVector {
 public:
  explicit FockVector(const FockBasis& basis)
      : basis_(&basis), amps_(Eigen::VectorXcd::Zero(long(basis.size()))) {}

  static FockVector vacuum(const FockBasis& basis) {
    FockVector v(basis);
    v.amps_(0) = 1.0;
    return v;
  }

  static FockVector basis_state(const FockBasis& basis, std::size_t i) {
    FockVector v(basis);
    v.amps_(long(i)) = 1.0;
    return v;
  }

  const FockBasis& basis() const { return *basis_; }
  Eigen::VectorXcd& amps() { return amps_; }
  const Eigen::VectorXcd& amps() const { return amps_; }
  std::complex<double> amp(std::size_t i) const { return amps_(long(i)); }
  double norm() const { return amps_.norm(); }

 private:
  const FockBasis* basis_;
  Eigen::VectorXcd amps_;
};

inline std::complex<double> inner(const FockVector& f1, const FockVector& f2) {
  if (&f1.basis() != &f2.basis())
    throw mismatch_error("inner: vectors live on different bases");
  return f1.amps().dot(f2.amps());  // conjugates the first argument
}

class FieldOperator {
 public:
  FieldOperator(const FockBasis& basis, Eigen::MatrixXcd m)
      : basis_(&basis), m_(std::move(m)) {
    if (m_.rows() != long(basis.size()) || m_.cols() != long(basis.size()))
      throw mismatch_error("FieldOperator: matrix does not match the basis");
    hermitian_ = (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= 1e-12;
    sector_width_ = 0;
    for (long c = 0; c < m_.cols(); ++c)
      for (long r = 0; r < m_.rows(); ++r)
        if (m_(r, c) != 0.0) {
          int dw = std::abs(basis.total(std::size_t(r)) - basis.total(std::size_t(c)));
          if (dw > sector_width_) sector_width_ = dw;
        }
  }

  static FieldOperator identity(const FockBasis& basis) {
    return FieldOperator(basis,
                         Eigen::MatrixXcd::Identity(long(basis.size()), long(basis.size())));
  }

  static FieldOperator zero(const FockBasis& basis) {
    return FieldOperator(basis,
                         Eigen::MatrixXcd::Zero(long(basis.size()), long(basis.size())));
  }

  const FockBasis& basis() const { return *basis_; }
  const Eigen::MatrixXcd& matrix() const { return m_; }
  std::size_t dim() const { return std::size_t(m_.rows()); }
  bool hermitian() const { return hermitian_; }
  int sector_width() const { return sector_width_; }

  FieldOperator adjoint() const { return FieldOperator(*basis_, m_.adjoint()); }

  FockVector apply(const FockVector& f) const {
    if (&f.basis() != basis_)
      throw mismatch_error("FieldOperator: vector lives on a different basis");
    FockVector out(*basis_);
    out.amps() = m_ * f.amps();
    return out;
  }

  // largest entry magnitude; col_limit restricts the columns scanned, so
  // identities that only hold on a leading safe sector can be checked there
  double max_abs(std::size_t col_limit = std::size_t(-1)) const {
    long cols = m_.cols();
    if (col_limit < std::size_t(cols)) cols = long(col_limit);
    if (cols <= 0) return 0.0;
    return m_.leftCols(cols).cwiseAbs().maxCoeff();
  }

 private:
  const FockBasis* basis_;
  Eigen::MatrixXcd m_;
  bool hermitian_ = false;
  int sector_width_ = 0;
};

namespace detail {
inline void check_same_basis(const FieldOperator& a, const FieldOperator& b) {
  if (&a.basis() != &b.basis())
    throw mismatch_error("FieldOperator: operands live on different bases");
}
}  // namespace detail

inline FieldOperator operator+(const FieldOperator& a, const FieldOperator& b) {
  detail::check_same_basis(a, b);
  return FieldOperator(a.basis(), a.matrix() + b.matrix());
}

inline FieldOperator operator-(const FieldOperator& a, const FieldOperator& b) {
  detail::check_same_basis(a, b);
  return FieldOperator(a.basis(), a.matrix() - b.matrix());
}

inline FieldOperator operator*(const FieldOperator& a, const FieldOperator& b) {
  detail::check_same_basis(a, b);
  return FieldOperator(a.basis(), a.matrix() * b.matrix());
}

inline FieldOperator operator*(std::complex<double> c, const FieldOperator& a) {
  return FieldOperator(a.basis(), c * a.matrix());
}

inline FieldOperator commutator(const FieldOperator& a, const FieldOperator& b) {
  detail::check_same_basis(a, b);
  return FieldOperator(a.basis(), a.matrix() * b.matrix() - b.matrix() * a.matrix());
}

// a+(psi) = sum_j sqrt(w) psi_j (raise mode j with factor sqrt(n_j + 1));
// amplitudes that would exceed n_max are dropped.
inline FieldOperator create(const FockBasis& basis, const Eigen::VectorXcd& psi) {
  const std::size_t m = basis.grid().mode_count();
  if (psi.size() != long(m))
    throw mismatch_error("create: mode function has wrong length");
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(long(basis.size()), long(basis.size()));
  const double sw = std::sqrt(basis.grid().weight());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis.total(i) == basis.n_max()) continue;
    std::vector<int> occ = basis.occupation(i);
    for (std::size_t j = 0; j < m; ++j) {
      occ[j] += 1;
      std::size_t target = basis.index_of(occ);
      out(long(target), long(i)) += sw * psi(long(j)) * std::sqrt(double(occ[j]));
      occ[j] -= 1;
    }
  }
  return FieldOperator(basis, std::move(out));
}

// a-(psi) = sum_j sqrt(w) psi_j (lower mode j with factor sqrt(n_j)); the
// smearing is bilinear (no conjugation), so this is create(conj psi)^dagger.
inline FieldOperator annihilate(const FockBasis& basis, const Eigen::VectorXcd& psi) {
  const std::size_t m = basis.grid().mode_count();
  if (psi.size() != long(m))
    throw mismatch_error("annihilate: mode function has wrong length");
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(long(basis.size()), long(basis.size()));
  const double sw = std::sqrt(basis.grid().weight());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    std::vector<int> occ = basis.occupation(i);
    for (std::size_t j = 0; j < m; ++j) {
      if (occ[j] == 0) continue;
      double amp = std::sqrt(double(occ[j]));
      occ[j] -= 1;
      std::size_t target = basis.index_of(occ);
      out(long(target), long(i)) += sw * psi(long(j)) * amp;
      occ[j] += 1;
    }
  }
  return FieldOperator(basis, std::move(out));
}

// diagonal energy sum_j k0_j n_j per occupation vector (normal ordered)
inline FieldOperator energy_operator(const FockBasis& basis) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(long(basis.size()), long(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i)
    out(long(i), long(i)) = basis.energy(i);
  return FieldOperator(basis, std::move(out));
}

// diagonal unitary with phases exp(i theta E(n))
inline FieldOperator exp_energy(const FockBasis& basis, double theta) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(long(basis.size()), long(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i)
    out(long(i), long(i)) = std::exp(std::complex<double>(0.0, theta * basis.energy(i)));
  return FieldOperator(basis, std::move(out));
}

}  // namespace qflab
