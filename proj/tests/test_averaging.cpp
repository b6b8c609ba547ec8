#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qflab/averaging.hpp"

using namespace qflab;
using Catch::Approx;

namespace {

constexpr double kTwoOverPi = 0.63661977236758134;

// Frozen means of |cos(g/eps)| computed from the closed form
//   A(eta) = 2/pi + (4/pi) sum_n (-1)^(n+1) J(2ng, 1/eta) / (4n^2 - 1),
//   J(h, U) = cos(hU)/U + h (Si(hU) - pi/2),
// summed in extended precision and cross-checked against a kink-aware
// composite rule on the defining integral.
constexpr double kCosMeanEta3 = 0.63641259678631606;     // g = 1, eta = 1e-3
constexpr double kCos3MeanEta3 = 0.63664596201226931;    // g = 3, eta = 1e-3
constexpr double kCosMeanEta4 = 0.63660898498527389;     // g = 1, eta = 1e-4
constexpr double kCosSqMeanEta3 = 0.49976739860804735;   // cos^2, eta = 1e-3
constexpr double kCosRmsEta3 = 0.7069422880320906;       // sqrt of the above

// Frozen oscillation band of |cos(log(1/eps))|: its mean equals
// G(c) = int_0^inf |cos(c + t)| e^-t dt at c = log(1/eta), a pi-periodic
// function whose extrema were located from the piecewise closed form of G
// and confirmed by kink-aware quadrature.
constexpr double kChirpLo = 0.433685383383161;
constexpr double kChirpHi = 0.814335425326898;

// Same band for |cos(4 log(1/eps))|, from a dense scan of the analogous
// G_4; the faster chirp couples more weakly to the exponential window, so
// the band is narrower.
constexpr double kChirp4Lo = 0.583436210898;
constexpr double kChirp4Hi = 0.687960669905;

GeneralizedNumber cos_family(double g) {
  GeneralizedNumber gn("abs cos " + std::to_string(g),
                       [g](double e) { return std::abs(std::cos(g / e)); });
  gn.with_bound(1.0);
  gn.with_hint(OscillationHint{1.0, M_PI / g, 0.0});
  return gn;
}

GeneralizedNumber cos_family_blind(double g) {
  GeneralizedNumber gn("abs cos blind " + std::to_string(g),
                       [g](double e) { return std::abs(std::cos(g / e)); });
  gn.with_bound(1.0);
  return gn;
}

}  // namespace

TEST_CASE("constant families are averaged exactly", "[averaging]") {
  for (double c : {0.0, 0.73, -1.4}) {
    GeneralizedNumber gn("const", [c](double) { return c; });
    for (double eta : {0.5, 1e-2, 1e-3}) {
      double scale = std::max(1.0, std::abs(c));
      CHECK(cesaro_average(gn, eta, 1e-14) == Approx(c).margin(1e-13 * scale));
      CHECK(cesaro_average_direct(gn, eta, 1e-14) ==
            Approx(c).margin(1e-13 * scale));
    }
  }
  // a declared period makes no difference for a constant
  GeneralizedNumber gn("const hinted", [](double) { return 0.73; });
  gn.with_bound(0.75);
  gn.with_hint(OscillationHint{1.0, M_PI, 0.0});
  CHECK(cesaro_average(gn, 1e-2, 1e-12) == Approx(0.73).margin(1e-12));
}

TEST_CASE("linear family averages to half of eta", "[averaging]") {
  GeneralizedNumber gn("linear", [](double e) { return e; });
  for (double eta : {0.5, 1e-2}) {
    CHECK(cesaro_average(gn, eta, 1e-10) == Approx(eta / 2).margin(1e-10));
    CHECK(cesaro_average_direct(gn, eta, 1e-10) ==
          Approx(eta / 2).margin(1e-10));
  }
}

TEST_CASE("cos family reproduces its frozen means", "[averaging]") {
  auto g1 = cos_family(1.0);
  auto g3 = cos_family(3.0);

  double a1 = cesaro_average(g1, 1e-3, 1e-8);
  CHECK(a1 == Approx(kCosMeanEta3).margin(1e-8));
  CHECK(a1 == Approx(0.6366).margin(1e-3));
  CHECK(a1 >= 0.0);
  CHECK(a1 <= 1.0);

  CHECK(cesaro_average(g3, 1e-3, 1e-8) == Approx(kCos3MeanEta3).margin(1e-8));
  CHECK(cesaro_average(g1, 1e-4, 3e-8) == Approx(kCosMeanEta4).margin(1e-7));

  GeneralizedNumber sq("cos squared", [](double e) {
    double c = std::cos(1.0 / e);
    return c * c;
  });
  sq.with_bound(1.0);
  sq.with_hint(OscillationHint{1.0, M_PI, 0.0});
  CHECK(cesaro_average(sq, 1e-3, 1e-8) == Approx(kCosSqMeanEta3).margin(1e-8));
}

TEST_CASE("ladder study associates two over pi with the cos family",
          "[averaging]") {
  auto gn = cos_family(1.0);
  auto ladder = eta_ladder(0.1, 14, 0.4);
  AverageReport rep = associated_value(gn, ladder, 2e-5);

  REQUIRE(rep.limit.has_value());
  CHECK(*rep.limit == Approx(kTwoOverPi).margin(1e-4));
  CHECK(rep.liminf <= *rep.limit);
  CHECK(*rep.limit <= rep.limsup);
  CHECK(rep.limsup - rep.liminf <= 5e-3);
  CHECK(rep.liminf <= kTwoOverPi);
  CHECK(rep.limsup >= kTwoOverPi);
  CHECK(rep.eta_ladder.size() == 14);
  CHECK(rep.a_values.size() == 14);
  CHECK(rep.diagnostics.count("cauchy_spread") == 1);
  for (double a : rep.a_values) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("rescaling eps rescales the window of the mean", "[averaging]") {
  // S(eps) = R(lambda eps) satisfies A_S(eta) = A_R(lambda eta)
  for (double lambda : {2.0, 10.0}) {
    GeneralizedNumber s("scaled cos",
                        [lambda](double e) {
                          return std::abs(std::cos(1.0 / (lambda * e)));
                        });
    s.with_bound(1.0);
    s.with_hint(OscillationHint{1.0, M_PI * lambda, 0.0});
    double a = cesaro_average(s, 1e-3 / lambda, 1e-8);
    CHECK(a == Approx(kCosMeanEta3).margin(2e-8));
  }
}

TEST_CASE("substituted and direct estimators agree", "[averaging]") {
  const double tol = 1e-6;
  const struct {
    double g;
    double frozen;
  } cases[] = {{1.0, kCosMeanEta3}, {3.0, kCos3MeanEta3}};
  for (const auto& c : cases) {
    auto hinted = cos_family(c.g);
    double sub = cesaro_average_substituted(hinted, 1e-3, tol);
    double dir = cesaro_average_direct(hinted, 1e-3, tol);
    CHECK(std::abs(sub - dir) <= 2 * tol);
    CHECK(sub == Approx(c.frozen).margin(tol));
    CHECK(dir == Approx(c.frozen).margin(tol));

    // without a hint the engines must detect the period on their own
    auto blind = cos_family_blind(c.g);
    CHECK(cesaro_average_substituted(blind, 1e-3, tol) ==
          Approx(c.frozen).margin(2 * tol));
    CHECK(cesaro_average_direct(blind, 1e-3, tol) ==
          Approx(c.frozen).margin(2 * tol));
  }
}

TEST_CASE("rms mean of the cos family", "[averaging]") {
  auto gn = cos_family(1.0);
  double rms = rms_average(gn, 1e-3, 1e-8);
  CHECK(rms == Approx(kCosRmsEta3).margin(1e-8));
  CHECK(rms == Approx(std::sqrt(0.5)).margin(2e-3));

  // mean-square dominates the squared mean
  double mean = cesaro_average(gn, 1e-3, 1e-8);
  CHECK(rms * rms >= mean * mean - 1e-10);

  GeneralizedNumber signed_cos("signed cos",
                               [](double e) { return std::cos(1.0 / e); });
  signed_cos.with_bound(1.0);
  signed_cos.with_hint(OscillationHint{1.0, 2.0 * M_PI, 0.0});
  CHECK_THROWS_AS(rms_average(signed_cos, 1e-3, 1e-6), std::invalid_argument);
}

TEST_CASE("declared bounds are enforced", "[averaging]") {
  GeneralizedNumber gn("over", [](double e) { return e; });
  gn.with_bound(0.5);
  CHECK_THROWS_AS(gn(0.9), std::invalid_argument);
  CHECK_THROWS_AS(cesaro_average(gn, 0.9, 1e-6), std::invalid_argument);

  GeneralizedNumber pos("lifted cos",
                        [](double e) { return 0.5 * (1.0 + std::cos(1.0 / e)); });
  pos.with_bound(1.0);
  pos.with_hint(OscillationHint{1.0, 2.0 * M_PI, 0.0});
  double a = cesaro_average(pos, 1e-3, 1e-7);
  CHECK(a >= 0.4985);
  CHECK(a <= 0.5015);

  CHECK_THROWS_AS(cesaro_average(pos, 2.0, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(cesaro_average(pos, 0.0, 1e-6), std::invalid_argument);
}

TEST_CASE("ladder validation", "[averaging]") {
  GeneralizedNumber gn("linear", [](double e) { return e; });
  CHECK_THROWS_AS(associated_value(gn, {0.5, 0.4, 0.3, 0.2, 0.1}, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      associated_value(gn, {0.5, 0.5, 0.4, 0.3, 0.2, 0.1}, 1e-6),
      std::invalid_argument);
  CHECK_THROWS_AS(
      associated_value(gn, {1.5, 0.5, 0.4, 0.3, 0.2, 0.1}, 1e-6),
      std::invalid_argument);
  CHECK_THROWS_AS(
      associated_value(gn, {0.5, 0.4, 0.3, 0.2, 0.1, -0.05}, 1e-6),
      std::invalid_argument);
}

TEST_CASE("log chirp keeps an oscillation band and no limit", "[averaging]") {
  GeneralizedNumber gn("cos log", [](double e) {
    return std::abs(std::cos(std::log(1.0 / e)));
  });
  gn.with_bound(1.0);

  AverageReport rep = associated_value(gn, eta_ladder(0.5, 12, 0.35), 1e-4);
  CHECK_FALSE(rep.limit.has_value());
  CHECK(rep.liminf == Approx(kChirpLo).margin(5e-3));
  CHECK(rep.limsup == Approx(kChirpHi).margin(5e-3));
  CHECK(rep.liminf < rep.limsup);
}

TEST_CASE("p rescaling keeps settled limits and shrinks chirp bands",
          "[averaging]") {
  auto study = p_rescaling_study(
      [](double th) { return std::abs(std::cos(th)); }, M_PI,
      {1.0, 2.0, 3.0}, eta_ladder(0.1, 14, 0.4), 2e-5, 1.0);
  REQUIRE(study.reports.size() == 3);
  for (const auto& rep : study.reports) {
    REQUIRE(rep.limit.has_value());
    CHECK(*rep.limit == Approx(kTwoOverPi).margin(2e-3));
  }
  CHECK(study.spread <= 1e-3);

  auto unit = p_rescaling_study([](double) { return 1.0; }, std::nullopt,
                                {1.0, 2.0, 3.0}, eta_ladder(0.5, 8, 0.5),
                                1e-10, 1.0);
  for (const auto& rep : unit.reports) {
    REQUIRE(rep.limit.has_value());
    CHECK(*rep.limit == Approx(1.0).margin(1e-10));
  }
  CHECK(unit.spread <= 1e-10);

  // a chirp has no limit at any p, but its band tightens as p grows
  auto chirp = p_rescaling_study(
      [](double th) { return std::abs(std::cos(std::log(th))); }, std::nullopt,
      {1.0, 4.0}, eta_ladder(0.5, 12, 0.35), 1e-4, 1.0);
  REQUIRE(chirp.reports.size() == 2);
  CHECK_FALSE(chirp.reports[0].limit.has_value());
  CHECK_FALSE(chirp.reports[1].limit.has_value());
  double w1 = chirp.reports[0].limsup - chirp.reports[0].liminf;
  double w4 = chirp.reports[1].limsup - chirp.reports[1].liminf;
  CHECK(w4 <= 0.6 * w1);
  CHECK(chirp.reports[1].liminf == Approx(kChirp4Lo).margin(1e-2));
  CHECK(chirp.reports[1].limsup == Approx(kChirp4Hi).margin(1e-2));
}

TEST_CASE("panel budget exhaustion carries partial progress", "[averaging]") {
  auto gn = cos_family(1.0);
  bool threw = false;
  try {
    cesaro_average_substituted(gn, 1e-2, 1e-12, nullptr, 4096);
  } catch (const budget_error& e) {
    threw = true;
    CHECK(e.partial_value() == Approx(kTwoOverPi).margin(1e-2));
    CHECK(e.error_estimate() > 0.0);
    CHECK(e.error_estimate() < 0.02);
  }
  CHECK(threw);
}

TEST_CASE("unbounded families without a settling tail are rejected",
          "[averaging]") {
  GeneralizedNumber gn("inverse", [](double e) { return 1.0 / e; });
  CHECK_THROWS_AS(cesaro_average(gn, 1e-2, 1e-6), std::invalid_argument);
}

TEST_CASE("sweep averaging", "[averaging]") {
  const int n = 10000;
  std::vector<std::pair<double, double>> cos_sweep;
  for (int i = 0; i < n; ++i) {
    double t = double(i) / double(n - 1);
    double eps = 0.5 * std::pow(2e-6, t);
    cos_sweep.emplace_back(eps, std::abs(std::cos(1.0 / eps)));
  }

  SECTION("trapezoid ladder of an oscillating sweep") {
    AverageReport rep = sweep_average(cos_sweep, SweepMode::trapezoid);
    double val = rep.limit ? *rep.limit : rep.a_values.back();
    CHECK(val == Approx(kTwoOverPi).margin(0.03));
    CHECK(rep.liminf <= 0.05);
    CHECK(rep.limsup >= 0.95);
    CHECK_FALSE(rep.seed.has_value());
    CHECK(rep.eta_ladder.size() == 12);
    CHECK(rep.a_values.size() == 12);
  }

  SECTION("constant sweep is exact") {
    std::vector<std::pair<double, double>> flat;
    for (int i = 0; i < 64; ++i) {
      double eps = 0.5 * std::pow(0.85, i);
      flat.emplace_back(eps, 0.42);
    }
    AverageReport rep = sweep_average(flat, SweepMode::trapezoid);
    REQUIRE(rep.limit.has_value());
    CHECK(*rep.limit == Approx(0.42).margin(1e-12));
    CHECK(rep.liminf == Approx(0.42).margin(1e-15));
    CHECK(rep.limsup == Approx(0.42).margin(1e-15));
  }

  SECTION("interleaved constants settle on the midpoint") {
    std::vector<std::pair<double, double>> mix;
    for (int i = 0; i < n; ++i) {
      double t = double(i) / double(n - 1);
      double eps = 0.5 * std::pow(2e-6, t);
      mix.emplace_back(eps, i % 2 ? 0.9 : 0.3);
    }
    AverageReport rep = sweep_average(mix, SweepMode::trapezoid);
    REQUIRE(rep.limit.has_value());
    CHECK(*rep.limit == Approx(0.6).margin(2e-3));
    CHECK(rep.liminf == Approx(0.3).margin(1e-12));
    CHECK(rep.limsup == Approx(0.9).margin(1e-12));
  }

  SECTION("random subsample is seeded and deterministic") {
    AverageReport r42 = sweep_average(cos_sweep, SweepMode::random_subsample, 42);
    REQUIRE(r42.limit.has_value());
    CHECK(*r42.limit == Approx(kTwoOverPi).margin(0.04));
    REQUIRE(r42.seed.has_value());
    CHECK(*r42.seed == 42);
    CHECK(r42.diagnostics.count("subsample_stddev") == 1);

    AverageReport again = sweep_average(cos_sweep, SweepMode::random_subsample, 42);
    CHECK(again.a_values == r42.a_values);
    CHECK(again.eta_ladder == r42.eta_ladder);
    CHECK(*again.limit == *r42.limit);

    AverageReport r43 = sweep_average(cos_sweep, SweepMode::random_subsample, 43);
    CHECK(*r43.limit != *r42.limit);
  }

  SECTION("validation") {
    std::vector<std::pair<double, double>> few(7, {0.1, 1.0});
    for (int i = 0; i < 7; ++i) few[i].first = 0.1 + 0.01 * i;
    CHECK_THROWS_AS(sweep_average(few), std::invalid_argument);

    auto dup = cos_sweep;
    dup[5].first = dup[6].first;
    CHECK_THROWS_AS(sweep_average(dup), std::invalid_argument);

    auto zero = cos_sweep;
    zero[0].first = 0.0;
    CHECK_THROWS_AS(sweep_average(zero), std::invalid_argument);
  }
}

TEST_CASE("eta ladder builder", "[averaging]") {
  auto v = eta_ladder(0.5, 10, 0.5);
  REQUIRE(v.size() == 10);
  CHECK(v.front() == 0.5);
  CHECK(v.back() == Approx(0.5 * std::pow(0.5, 9)).margin(1e-18));
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] < v[i - 1]);

  CHECK_THROWS_AS(eta_ladder(-0.5, 10, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(eta_ladder(0.5, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(eta_ladder(0.5, 10, 1.5), std::invalid_argument);
}
