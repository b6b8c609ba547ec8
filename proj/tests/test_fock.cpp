#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qflab/fock.hpp"

using namespace qflab;
using Catch::Approx;
using cplx = std::complex<double>;

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

Eigen::VectorXcd random_mode_function(const ModeGrid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXcd psi(long(grid.mode_count()));
  for (long j = 0; j < psi.size(); ++j) psi(j) = cplx(u(rng), u(rng));
  return psi;
}

}  // namespace

TEST_CASE("mode grid geometry", "[fock]") {
  ModeGrid g(1, 2.0 * M_PI, 1, 1.0);
  REQUIRE(g.mode_count() == 3);
  CHECK(g.weight() == Approx(1.0).margin(1e-15));
  CHECK(g.k(0, 0) == Approx(-1.0).margin(1e-15));
  CHECK(g.k(1, 0) == Approx(0.0).margin(1e-15));
  CHECK(g.k(2, 0) == Approx(1.0).margin(1e-15));
  CHECK(g.k0(0) == Approx(kSqrt2).margin(1e-15));
  CHECK(g.k0(1) == Approx(1.0).margin(1e-15));
  CHECK(g.k0(2) == Approx(kSqrt2).margin(1e-15));
  CHECK(g.j_vector(0) == std::vector<int>{-1});
  CHECK(g.j_vector(2) == std::vector<int>{1});

  for (std::size_t mode = 0; mode < g.mode_count(); ++mode)
    CHECK(g.k0(mode) >= g.mass());

  ModeGrid g2(2, 4.0 * M_PI, 1, 0.5);
  REQUIRE(g2.mode_count() == 9);
  CHECK(g2.weight() == Approx(0.25).margin(1e-15));
  CHECK(g2.j_vector(0) == std::vector<int>{-1, -1});
  CHECK(g2.j_vector(4) == std::vector<int>{0, 0});
  CHECK(g2.k0(4) == Approx(0.5).margin(1e-15));
  // frequencies are even in j: modes 0 and 8 are j = (-1,-1) and (1,1)
  CHECK(g2.k0(0) == Approx(g2.k0(8)).margin(1e-15));

  CHECK_THROWS_AS(ModeGrid(0, 1.0, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ModeGrid(1, 0.0, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ModeGrid(1, 1.0, -1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ModeGrid(1, 1.0, 1, 0.0), std::invalid_argument);
}

TEST_CASE("basis enumeration is graded lexicographic", "[fock]") {
  FockBasis basis(ModeGrid(1, 2.0 * M_PI, 1, 1.0), 2);
  REQUIRE(basis.size() == 10);
  CHECK(basis.occupation(0) == std::vector<int>{0, 0, 0});
  CHECK(basis.occupation(1) == std::vector<int>{0, 0, 1});
  CHECK(basis.occupation(2) == std::vector<int>{0, 1, 0});
  CHECK(basis.occupation(3) == std::vector<int>{1, 0, 0});
  CHECK(basis.occupation(4) == std::vector<int>{0, 0, 2});
  CHECK(basis.occupation(5) == std::vector<int>{0, 1, 1});
  CHECK(basis.occupation(9) == std::vector<int>{2, 0, 0});
  CHECK(basis.index_of({1, 0, 1}) == 7);
  CHECK(basis.sector_begin(2) == 4);
  CHECK(basis.sector_end(2) == 10);
  CHECK(basis.safe_size(1) == 4);
  CHECK(basis.safe_size(2) == 1);
  CHECK(basis.safe_size(5) == 0);

  // size = sum_s C(M+s-1, s)
  CHECK(FockBasis(ModeGrid(1, 2.0 * M_PI, 2, 1.0), 2).size() == 21);
  CHECK(FockBasis(ModeGrid(1, 2.0 * M_PI, 3, 1.0), 3).size() == 120);
  CHECK(FockBasis(ModeGrid(2, 2.0 * M_PI, 1, 1.0), 2).size() == 55);

  CHECK_THROWS_AS(basis.index_of({3, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(basis.index_of({1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(FockBasis(ModeGrid(1, 1.0, 1, 1.0), -1), std::invalid_argument);
}

TEST_CASE("basis index round-trips", "[fock]") {
  for (int j_max : {1, 2}) {
    for (int n_max : {2, 3}) {
      FockBasis basis(ModeGrid(1, 2.0 * M_PI, j_max, 1.0), n_max);
      int prev_total = 0;
      for (std::size_t i = 0; i < basis.size(); ++i) {
        CHECK(basis.index_of(basis.occupation(i)) == i);
        int t = basis.total(i);
        CHECK(t >= prev_total);
        prev_total = t;
      }
      for (int s = 0; s <= n_max; ++s)
        for (std::size_t i = basis.sector_begin(s); i < basis.sector_end(s); ++i)
          CHECK(basis.total(i) == s);
    }
  }
}

TEST_CASE("single-mode ladder matrices", "[fock]") {
  FockBasis basis(ModeGrid(1, 2.0 * M_PI, 0, 1.0), 2);
  REQUIRE(basis.size() == 3);
  Eigen::VectorXcd one(1);
  one << 1.0;

  FieldOperator up = create(basis, one);
  FieldOperator down = annihilate(basis, one);

  Eigen::MatrixXcd up_expected(3, 3);
  up_expected << 0, 0, 0, 1, 0, 0, 0, kSqrt2, 0;
  Eigen::MatrixXcd down_expected(3, 3);
  down_expected << 0, 1, 0, 0, 0, kSqrt2, 0, 0, 0;
  CHECK((up.matrix() - up_expected).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((down.matrix() - down_expected).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(up.sector_width() == 1);
  CHECK(down.sector_width() == 1);
  CHECK_FALSE(up.hermitian());

  // two applications on the vacuum land on the doubly occupied state
  FockVector two = up.apply(up.apply(FockVector::vacuum(basis)));
  CHECK(std::abs(two.amp(2) - cplx(kSqrt2, 0.0)) <= 1e-15);
  CHECK(std::abs(two.amp(0)) + std::abs(two.amp(1)) <= 1e-15);

  // the commutator is the weight on the safe sector and shows the
  // truncation drop at the top sector
  FieldOperator comm = commutator(down, up);
  CHECK(std::abs(comm.matrix()(0, 0) - cplx(1.0, 0.0)) <= 1e-15);
  CHECK(std::abs(comm.matrix()(1, 1) - cplx(1.0, 0.0)) <= 1e-15);
  CHECK(std::abs(comm.matrix()(2, 2) - cplx(-2.0, 0.0)) <= 1e-15);

  FieldOperator p0 = energy_operator(basis);
  CHECK(std::abs(p0.matrix()(0, 0)) <= 1e-15);
  CHECK(std::abs(p0.matrix()(1, 1) - cplx(1.0, 0.0)) <= 1e-15);
  CHECK(std::abs(p0.matrix()(2, 2) - cplx(2.0, 0.0)) <= 1e-15);
}

TEST_CASE("creation on the vacuum is the smeared one-particle vector", "[fock]") {
  // L = 4 pi exercises a non-unit cell weight w = 1/2
  FockBasis basis(ModeGrid(1, 4.0 * M_PI, 1, 1.0), 2);
  Eigen::VectorXcd psi = random_mode_function(basis.grid(), 11);

  FockVector one = create(basis, psi).apply(FockVector::vacuum(basis));
  const double sw = std::sqrt(0.5);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<int> occ(3, 0);
    occ[j] = 1;
    std::size_t i = basis.index_of(occ);
    CHECK(std::abs(one.amp(i) - sw * psi(long(j))) <= 1e-14);
  }
  CHECK(std::abs(one.amp(0)) <= 1e-15);

  // zero mode function gives the zero operator
  CHECK(create(basis, Eigen::VectorXcd::Zero(3)).max_abs() == 0.0);
  CHECK(create(basis, Eigen::VectorXcd::Zero(3)).sector_width() == 0);

  // annihilation kills the vacuum
  CHECK(annihilate(basis, psi).apply(FockVector::vacuum(basis)).norm() <= 1e-15);
}

TEST_CASE("canonical commutation relations on the safe sector", "[fock]") {
  std::uint64_t seed = 101;
  for (int j_max : {1, 2, 3}) {
    for (int n_max : {2, 3, 4}) {
      FockBasis basis(ModeGrid(1, 2.0 * M_PI, j_max, 1.0), n_max);
      Eigen::VectorXcd psi = random_mode_function(basis.grid(), seed++);
      Eigen::VectorXcd chi = random_mode_function(basis.grid(), seed++);

      cplx scalar = 0.0;
      for (long j = 0; j < psi.size(); ++j) scalar += psi(j) * chi(j);
      scalar *= basis.grid().weight();

      std::size_t safe = basis.safe_size(2);
      FieldOperator defect =
          commutator(annihilate(basis, psi), create(basis, chi)) -
          scalar * FieldOperator::identity(basis);
      CHECK(defect.max_abs(safe) <= 1e-10);
      CHECK(commutator(create(basis, psi), create(basis, chi)).max_abs(safe) <= 1e-10);
      CHECK(commutator(annihilate(basis, psi), annihilate(basis, chi)).max_abs(safe) <= 1e-10);
    }
  }
}

TEST_CASE("annihilation is the adjoint of conjugate creation", "[fock]") {
  FockBasis basis(ModeGrid(1, 2.0 * M_PI, 2, 1.3), 3);
  Eigen::VectorXcd psi = random_mode_function(basis.grid(), 7);
  FieldOperator lhs = annihilate(basis, psi);
  FieldOperator rhs = create(basis, psi.conjugate()).adjoint();
  CHECK((lhs.matrix() - rhs.matrix()).cwiseAbs().maxCoeff() <= 1e-15);

  // a+(psi) + a-(conj psi) is Hermitian by the same token
  FieldOperator field_like = create(basis, psi) + annihilate(basis, psi.conjugate());
  CHECK(field_like.hermitian());
}

TEST_CASE("energy operator is the diagonal frequency sum", "[fock]") {
  FockBasis basis(ModeGrid(1, 2.0 * M_PI, 1, 1.0), 2);
  FieldOperator p0 = energy_operator(basis);
  CHECK(p0.sector_width() == 0);
  CHECK(p0.hermitian());
  CHECK(std::abs(p0.matrix()(0, 0)) <= 1e-15);

  // one particle in mode j = 0 has frequency m = 1
  std::size_t i1 = basis.index_of({0, 1, 0});
  CHECK(std::abs(p0.matrix()(long(i1), long(i1)) - cplx(1.0, 0.0)) <= 1e-14);
  // one particle in mode j = -1 has frequency sqrt(2)
  std::size_t im = basis.index_of({1, 0, 0});
  CHECK(std::abs(p0.matrix()(long(im), long(im)) - cplx(kSqrt2, 0.0)) <= 1e-14);
  // two particles add their frequencies
  std::size_t i2 = basis.index_of({1, 0, 1});
  CHECK(std::abs(p0.matrix()(long(i2), long(i2)) - cplx(2.0 * kSqrt2, 0.0)) <= 1e-14);
}

TEST_CASE("energy exponential is a diagonal unitary", "[fock]") {
  FockBasis basis(ModeGrid(1, 2.0 * M_PI, 2, 1.0), 3);
  const double theta = 0.7;

  FieldOperator s = exp_energy(basis, theta);
  CHECK(s.sector_width() == 0);
  CHECK((exp_energy(basis, 0.0).matrix() -
         Eigen::MatrixXcd::Identity(long(basis.size()), long(basis.size())))
            .cwiseAbs()
            .maxCoeff() <= 1e-15);
  CHECK(((s * exp_energy(basis, -theta)).matrix() -
         Eigen::MatrixXcd::Identity(long(basis.size()), long(basis.size())))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);

  FockVector f(basis);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (long i = 0; i < f.amps().size(); ++i) f.amps()(i) = cplx(u(rng), u(rng));
  CHECK(s.apply(f).norm() == Approx(f.norm()).margin(1e-12));

  // conjugating a raising operator multiplies the mode function by the
  // frequency phases
  Eigen::VectorXcd psi = random_mode_function(basis.grid(), 13);
  Eigen::VectorXcd shifted(psi.size());
  for (long j = 0; j < psi.size(); ++j)
    shifted(j) = psi(j) * std::exp(cplx(0.0, theta * basis.grid().k0(std::size_t(j))));
  FieldOperator lhs = s * create(basis, psi) * exp_energy(basis, -theta);
  FieldOperator rhs = create(basis, shifted);
  CHECK((lhs.matrix() - rhs.matrix()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("inner products", "[fock]") {
  FockBasis basis(ModeGrid(1, 4.0 * M_PI, 1, 1.0), 2);
  Eigen::VectorXcd psi = random_mode_function(basis.grid(), 3);
  Eigen::VectorXcd chi = random_mode_function(basis.grid(), 4);

  FockVector f1 = create(basis, psi).apply(FockVector::vacuum(basis));
  FockVector f2 = create(basis, chi).apply(FockVector::vacuum(basis));
  cplx expected = 0.0;
  for (long j = 0; j < psi.size(); ++j) expected += std::conj(psi(j)) * chi(j);
  expected *= basis.grid().weight();
  CHECK(std::abs(inner(f1, f2) - expected) <= 1e-13);

  CHECK(std::abs(inner(f1, f1).imag()) <= 1e-15);
  CHECK(inner(f1, f1).real() >= 0.0);
  CHECK(inner(f1, f1).real() == Approx(f1.norm() * f1.norm()).margin(1e-13));

  // distinct occupation states are orthonormal
  FockVector e3 = FockVector::basis_state(basis, 3);
  FockVector e4 = FockVector::basis_state(basis, 4);
  CHECK(std::abs(inner(e3, e4)) <= 1e-15);
  CHECK(std::abs(inner(e3, e3) - cplx(1.0, 0.0)) <= 1e-15);

  FockBasis other(ModeGrid(1, 4.0 * M_PI, 1, 1.0), 2);
  CHECK_THROWS_AS(inner(f1, FockVector::vacuum(other)), mismatch_error);
  CHECK_THROWS_AS(create(basis, Eigen::VectorXcd::Zero(2)), mismatch_error);
  CHECK_THROWS_AS(annihilate(basis, Eigen::VectorXcd::Zero(4)), mismatch_error);
}
