#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "qflab/field.hpp"
#include "qflab/fock.hpp"
#include "qflab/profiles.hpp"

using namespace qflab;
using Catch::Approx;
using cplx = std::complex<double>;

namespace {

Mollifier stock_mollifier() { return Mollifier::stock().front(); }

// Independent evaluation of the vacuum fluctuation sums straight from the
// grid data, bypassing the operator machinery.
double vacuum_field_sum(const ModeGrid& g, const Mollifier& mol, double eps) {
  double vol = std::pow(g.box_length(), g.dim());
  double s = 0.0;
  for (std::size_t j = 0; j < g.mode_count(); ++j) {
    double kn = 0.0;
    for (int a = 0; a < g.dim(); ++a) kn += g.k(j, a) * g.k(j, a);
    double f = mol.value(eps * std::sqrt(kn));
    s += f * f / (2.0 * vol * g.k0(j));
  }
  return s;
}

double vacuum_momentum_sum(const ModeGrid& g, const Mollifier& mol, double eps) {
  double vol = std::pow(g.box_length(), g.dim());
  double s = 0.0;
  for (std::size_t j = 0; j < g.mode_count(); ++j) {
    double kn = 0.0;
    for (int a = 0; a < g.dim(); ++a) kn += g.k(j, a) * g.k(j, a);
    double f = mol.value(eps * std::sqrt(kn));
    s += f * f * g.k0(j) / (2.0 * vol);
  }
  return s;
}

double vacuum_square(const FieldOperator& op) {
  FockVector v = op.apply(FockVector::vacuum(op.basis()));
  return std::real(inner(v, v));
}

}  // namespace

TEST_CASE("field and momentum are hermitian with width one", "[field]") {
  Mollifier mol = stock_mollifier();

  SECTION("one dimension") {
    ModeGrid g(1, 2.0 * M_PI, 2, 1.0);
    FockBasis basis(g, 3);
    RegularizedField rf(basis, mol, 0.3);

    FieldOperator phi = free_field(rf, 1.3, 0.7);
    FieldOperator pi = conjugate_momentum(rf, 1.3, 0.7);
    CHECK(phi.hermitian());
    CHECK(pi.hermitian());
    CHECK(phi.sector_width() == 1);
    CHECK(pi.sector_width() == 1);

    FockVector vac = FockVector::vacuum(basis);
    CHECK(std::abs(inner(vac, phi.apply(vac))) <= 1e-15);
    CHECK(std::abs(inner(vac, pi.apply(vac))) <= 1e-15);
  }

  SECTION("two dimensions") {
    ModeGrid g(2, 4.0 * M_PI, 1, 0.5);
    FockBasis basis(g, 2);
    RegularizedField rf(basis, mol, 0.4);

    std::vector<double> x{0.3, -1.1};
    FieldOperator phi = free_field(rf, x, 0.2);
    FieldOperator pi = conjugate_momentum(rf, x, 0.2);
    CHECK(phi.hermitian());
    CHECK(pi.hermitian());
    CHECK(phi.sector_width() == 1);
    CHECK(pi.sector_width() == 1);
  }
}

TEST_CASE("vacuum fluctuations match the closed-form mode sums", "[field]") {
  ModeGrid g(1, 2.0 * M_PI, 2, 1.0);
  FockBasis basis(g, 3);
  Mollifier mol = stock_mollifier();
  const double eps = 0.3;
  RegularizedField rf(basis, mol, eps);

  const double phi_oracle = vacuum_field_sum(g, mol, eps);
  const double pi_oracle = vacuum_momentum_sum(g, mol, eps);
  REQUIRE(phi_oracle > 0.0);
  REQUIRE(pi_oracle > 0.0);

  const double points[][2] = {{0.0, 0.0}, {1.3, 0.7}, {-2.1, 0.4}};
  for (auto [x, t] : points) {
    CAPTURE(x, t);
    CHECK(vacuum_square(free_field(rf, x, t)) == Approx(phi_oracle).margin(1e-13));
    CHECK(vacuum_square(conjugate_momentum(rf, x, t)) ==
          Approx(pi_oracle).margin(1e-13));
  }

  SECTION("one-particle amplitudes carry the mode coefficients") {
    const double x = 1.3, t = 0.7;
    FockVector v = free_field(rf, x, t).apply(FockVector::vacuum(basis));
    for (std::size_t j = 0; j < g.mode_count(); ++j) {
      std::vector<int> occ(g.mode_count(), 0);
      occ[j] = 1;
      double mag =
          rf.mode_weight(j) / std::sqrt(2.0 * g.box_length() * g.k0(j));
      cplx expect = mag * std::exp(cplx(0.0, g.k0(j) * t - g.k(j, 0) * x));
      CHECK(std::abs(v.amp(basis.index_of(occ)) - expect) <= 1e-15);
    }
  }
}

TEST_CASE("momentum is the analytic time derivative", "[field]") {
  ModeGrid g(1, 2.0 * M_PI, 2, 1.0);
  FockBasis basis(g, 3);
  RegularizedField rf(basis, stock_mollifier(), 0.3);

  const double x = 0.9, t = 0.4;
  FieldOperator pi = conjugate_momentum(rf, x, t);

  auto central_defect = [&](double h) {
    FieldOperator diff = cplx(1.0 / (2.0 * h)) * (free_field(rf, x, t + h) -
                                                  free_field(rf, x, t - h));
    return (diff - pi).max_abs();
  };

  double e_coarse = central_defect(1e-3);
  double e_fine = central_defect(5e-4);
  CHECK(e_coarse < 2e-5);
  CHECK(e_coarse / e_fine == Approx(4.0).margin(0.1));
}

TEST_CASE("equal-time commutators reproduce the regularized kernel", "[field]") {
  Mollifier mol = stock_mollifier();

  SECTION("one dimension") {
    ModeGrid g(1, 2.0 * M_PI, 2, 1.0);
    FockBasis basis(g, 3);
    RegularizedField rf(basis, mol, 0.3);
    REQUIRE(basis.safe_size(2) == 6);

    for (double t : {0.0, 0.7}) {
      for (double x : {0.0, 0.9, 2.3}) {
        for (double xp : {0.0, 1.7}) {
          CAPTURE(t, x, xp);
          CcrReport rep = ccr_check(rf, x, xp, t);
          CHECK(rep.defect <= 1e-10);
          CHECK(rep.field_field <= 1e-10);
          CHECK(rep.momentum_momentum <= 1e-10);
          CHECK(std::abs(rep.scalar - cplx(0.0, rep.target)) <= 1e-12);
        }
      }
    }

    SECTION("kernel value agrees with a direct cosine sum") {
      CcrReport rep = ccr_check(rf, 0.9, 1.7, 0.7);
      double direct = 0.0;
      for (std::size_t j = 0; j < g.mode_count(); ++j) {
        double f = mol.value(0.3 * std::abs(g.k(j, 0)));
        direct += f * f * std::cos(g.k(j, 0) * (0.9 - 1.7));
      }
      direct /= g.box_length();
      CHECK(rep.target == Approx(direct).margin(1e-15));
    }
  }

  SECTION("two dimensions") {
    ModeGrid g(2, 2.0 * M_PI, 1, 1.0);
    FockBasis basis(g, 3);
    RegularizedField rf(basis, mol, 0.35);

    CcrReport rep =
        ccr_check(rf, {0.3, -1.1}, {-0.7, 0.2}, 0.7);
    CHECK(rep.defect <= 1e-10);
    CHECK(rep.field_field <= 1e-10);
    CHECK(rep.momentum_momentum <= 1e-10);
  }
}

TEST_CASE("sharp configuration degenerates to the dirichlet kernel", "[field]") {
  ModeGrid g(1, 2.0 * M_PI, 2, 1.0);
  FockBasis basis(g, 3);
  Mollifier mol = stock_mollifier();

  double eps0 = sharp_epsilon(g, mol);
  CHECK(eps0 == Approx(0.25).margin(1e-15));

  RegularizedField rf(basis, mol, 0.9 * eps0);
  for (std::size_t j = 0; j < g.mode_count(); ++j)
    CHECK(rf.mode_weight(j) == 1.0);

  // five retained modes over box length 2 pi
  const double dirichlet0 = 0.7957747154594768;
  CHECK(rho(rf.delta(), 0.0) == Approx(dirichlet0).margin(1e-14));

  CcrReport rep = ccr_check(rf, 0.4, 0.4, 0.0);
  CHECK(std::abs(rep.scalar - cplx(0.0, dirichlet0)) <= 1e-12);
  CHECK(rep.defect <= 1e-10);

  RegularizedField filtered(basis, mol, 4.0 * eps0);
  CHECK(rho(filtered.delta(), 0.0) < dirichlet0);
}

TEST_CASE("dispersion identity is exact per mode", "[field]") {
  Mollifier mol = stock_mollifier();

  ModeGrid g1(1, 2.0 * M_PI, 2, 1.0);
  FockBasis b1(g1, 3);
  RegularizedField rf1(b1, mol, 0.3);
  for (auto [x, t] : {std::pair{0.0, 0.0}, {1.3, 0.7}, {-2.1, 0.4}}) {
    CAPTURE(x, t);
    CHECK(dispersion_defect(rf1, x, t).max_abs() <= 1e-10);
  }

  ModeGrid g2(2, 4.0 * M_PI, 1, 0.5);
  FockBasis b2(g2, 2);
  RegularizedField rf2(b2, mol, 0.4);
  CHECK(dispersion_defect(rf2, {0.3, -1.1}, 0.7).max_abs() <= 1e-10);
}

TEST_CASE("time translation is energy conjugation", "[field]") {
  ModeGrid g(1, 2.0 * M_PI, 2, 1.0);
  FockBasis basis(g, 3);
  RegularizedField rf(basis, stock_mollifier(), 0.3);

  const double x = 0.9, t = 0.4, theta = 0.6;
  FieldOperator fwd = exp_energy(basis, theta);
  FieldOperator bwd = exp_energy(basis, -theta);

  FieldOperator phi_shift = fwd * free_field(rf, x, t) * bwd;
  CHECK((phi_shift - free_field(rf, x, t + theta)).max_abs() <= 1e-10);

  FieldOperator pi_shift = fwd * conjugate_momentum(rf, x, t) * bwd;
  CHECK((pi_shift - conjugate_momentum(rf, x, t + theta)).max_abs() <= 1e-10);
}

TEST_CASE("kernel is even normalized and monotone in the scale", "[field]") {
  Mollifier mol = stock_mollifier();
  ModeGrid g(1, 2.0 * M_PI, 3, 1.0);

  RegularizedDelta rd(g, mol, 0.7);
  for (double y : {0.3, 1.1, 2.9})
    CHECK(rho(rd, y) == Approx(rho(rd, -y)).margin(1e-15));

  // trapezoid over the box is exact for the retained harmonics
  const int n = 64;
  const double l = g.box_length();
  double integral = 0.0;
  for (int i = 0; i < n; ++i) integral += rho(rd, -l / 2.0 + i * l / n);
  integral *= l / n;
  CHECK(integral == Approx(1.0).margin(1e-13));

  double prev = rho(RegularizedDelta(g, mol, 0.05), 0.0);
  CHECK(prev > 0.0);
  for (double eps : {0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 1.2}) {
    double cur = rho(RegularizedDelta(g, mol, eps), 0.0);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }

  ModeGrid g2(2, 2.0 * M_PI, 1, 1.0);
  RegularizedDelta rd2(g2, mol, 0.4);
  CHECK(rho(rd2, {0.4, -1.3}) == Approx(rho(rd2, {-0.4, 1.3})).margin(1e-15));
}

TEST_CASE("field inputs are validated", "[field]") {
  Mollifier mol = stock_mollifier();
  ModeGrid g(2, 2.0 * M_PI, 1, 1.0);
  FockBasis basis(g, 2);

  CHECK_THROWS_AS(RegularizedField(basis, mol, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(RegularizedDelta(g, mol, -0.1), std::invalid_argument);

  RegularizedField rf(basis, mol, 0.4);
  CHECK_THROWS_AS(free_field(rf, std::vector<double>{0.3}, 0.0), mismatch_error);
  CHECK_THROWS_AS(conjugate_momentum(rf, std::vector<double>{0.3, 0.1, 0.2}, 0.0),
                  mismatch_error);
  CHECK_THROWS_AS(ccr_check(rf, std::vector<double>{0.3, 0.1},
                            std::vector<double>{0.3}, 0.0),
                  mismatch_error);
  CHECK_THROWS_AS(rho(rf.delta(), std::vector<double>{0.1}), mismatch_error);
}
