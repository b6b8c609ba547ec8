#pragma once

// Smooth profile families used everywhere else: even plateau bumps (exactly 1
// on a central plateau, exactly 0 outside a larger radius, C-infinity and
// monotone in between) and monotone sigmoid transitions saturating at 0 and 1.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace qflab {

namespace detail {

// C-infinity step built from g: T(0) = 1, T(1) = 0, all derivatives flat at
// both ends. T(s) = g(1-s) / (g(s) + g(1-s)).
struct FlatStep {
  // g(s) and its first two derivatives for s in (0, 1].
  double (*g)(double);
  double (*g1)(double);
  double (*g2)(double);

  double value(double s) const {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    double a = g(1.0 - s), b = g(s);
    return a / (a + b);
  }
  double deriv1(double s) const {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    double a = g(1.0 - s), b = g(s);
    double a1 = -g1(1.0 - s), b1 = g1(s);
    double d = a + b;
    return (a1 * b - a * b1) / (d * d);
  }
  double deriv2(double s) const {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    double a = g(1.0 - s), b = g(s);
    double a1 = -g1(1.0 - s), b1 = g1(s);
    double a2 = g2(1.0 - s), b2 = g2(s);
    double d = a + b, d1 = a1 + b1;
    double n = a1 * b - a * b1;
    double n1 = a2 * b - a * b2;
    return (n1 * d - 2.0 * n * d1) / (d * d * d);
  }
};

inline double g_exp(double s) { return std::exp(-1.0 / s); }
inline double g_exp1(double s) { return std::exp(-1.0 / s) / (s * s); }
inline double g_exp2(double s) {
  return std::exp(-1.0 / s) * (1.0 / (s * s * s * s) - 2.0 / (s * s * s));
}

inline double g_gauss(double s) { return std::exp(-1.0 / (s * s)); }
inline double g_gauss1(double s) {
  return 2.0 * std::exp(-1.0 / (s * s)) / (s * s * s);
}
inline double g_gauss2(double s) {
  double s2 = s * s;
  return std::exp(-1.0 / s2) * (4.0 / (s2 * s2 * s2) - 6.0 / (s2 * s2));
}

}  // namespace detail

// Even C-infinity plateau bump: value 1 for |u| <= inner, 0 for |u| >= outer,
// smooth monotone transition in between. Three stock transition families are
// provided so that profile-independence can be probed.
class PlateauBump {
 public:
  enum class Family { exp_step, gauss_step, tanh_step };

  PlateauBump(Family family, double inner, double outer, std::string label)
      : family_(family), inner_(inner), outer_(outer), label_(std::move(label)) {
    if (!(inner > 0.0) || !(outer > inner))
      throw std::invalid_argument("plateau bump needs 0 < inner < outer");
  }

  double inner() const { return inner_; }
  double outer() const { return outer_; }
  const std::string& label() const { return label_; }
  Family family() const { return family_; }

  double operator()(double u) const { return value(u); }

  double value(double u) const {
    double s = arg(u);
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    return step_value(s);
  }

  // d/du; odd in u.
  double derivative(double u) const {
    double au = std::abs(u);
    double s = (au - inner_) / (outer_ - inner_);
    if (s <= 0.0 || s >= 1.0) return 0.0;
    double d = step_deriv1(s) / (outer_ - inner_);
    return u >= 0.0 ? d : -d;
  }

  double second_derivative(double u) const {
    double au = std::abs(u);
    double s = (au - inner_) / (outer_ - inner_);
    if (s <= 0.0 || s >= 1.0) return 0.0;
    double w = outer_ - inner_;
    return step_deriv2(s) / (w * w);
  }

  // The three stock profiles share inner = 0.5, outer = 1.0.
  static std::vector<PlateauBump> stock() {
    return {PlateauBump(Family::exp_step, 0.5, 1.0, "exp_step"),
            PlateauBump(Family::gauss_step, 0.5, 1.0, "gauss_step"),
            PlateauBump(Family::tanh_step, 0.5, 1.0, "tanh_step")};
  }

 private:
  double arg(double u) const { return (std::abs(u) - inner_) / (outer_ - inner_); }

  double step_value(double s) const {
    switch (family_) {
      case Family::exp_step:
        return detail::FlatStep{detail::g_exp, detail::g_exp1, detail::g_exp2}.value(s);
      case Family::gauss_step:
        return detail::FlatStep{detail::g_gauss, detail::g_gauss1, detail::g_gauss2}.value(s);
      case Family::tanh_step: {
        // steepness 2; at steepness 1 this family coincides with exp_step
        double ph = 2.0 * (s - 0.5) / (s * (1.0 - s));
        return 0.5 * (1.0 - std::tanh(ph));
      }
    }
    return 0.0;
  }

  double step_deriv1(double s) const {
    switch (family_) {
      case Family::exp_step:
        return detail::FlatStep{detail::g_exp, detail::g_exp1, detail::g_exp2}.deriv1(s);
      case Family::gauss_step:
        return detail::FlatStep{detail::g_gauss, detail::g_gauss1, detail::g_gauss2}.deriv1(s);
      case Family::tanh_step: {
        double ph = 2.0 * (s - 0.5) / (s * (1.0 - s));
        double n = s * s - s + 0.5;
        double den = s * (1.0 - s);
        double ph1 = 2.0 * n / (den * den);
        double c = std::cosh(ph);
        return -0.5 * ph1 / (c * c);
      }
    }
    return 0.0;
  }

  double step_deriv2(double s) const {
    switch (family_) {
      case Family::exp_step:
        return detail::FlatStep{detail::g_exp, detail::g_exp1, detail::g_exp2}.deriv2(s);
      case Family::gauss_step:
        return detail::FlatStep{detail::g_gauss, detail::g_gauss1, detail::g_gauss2}.deriv2(s);
      case Family::tanh_step: {
        double den = s * (1.0 - s);
        double ph = 2.0 * (s - 0.5) / den;
        double n = s * s - s + 0.5;
        double ph1 = 2.0 * n / (den * den);
        double den1 = 1.0 - 2.0 * s;
        // d/ds of 2 n/den^2
        double ph2 = 2.0 * ((2.0 * s - 1.0) * den * den - n * 2.0 * den * den1) /
                     (den * den * den * den);
        double t = std::tanh(ph);
        double c = std::cosh(ph);
        double sech2 = 1.0 / (c * c);
        return -0.5 * sech2 * (ph2 - 2.0 * t * ph1 * ph1);
      }
    }
    return 0.0;
  }

  Family family_;
  double inner_;
  double outer_;
  std::string label_;
};

// Fourier-side regularizer: weights mode frequencies, the plateau guarantees
// that low modes pass unchanged. Copies share the profile, which lets the
// convolution machinery (gfcalc.hpp) cache a position-space table per profile.
class Mollifier {
 public:
  explicit Mollifier(PlateauBump profile)
      : profile_(std::make_shared<PlateauBump>(std::move(profile))) {}

  double operator()(double u) const { return profile_->value(u); }
  double value(double u) const { return profile_->value(u); }
  double derivative(double u) const { return profile_->derivative(u); }
  double second_derivative(double u) const {
    return profile_->second_derivative(u);
  }
  double inner() const { return profile_->inner(); }
  double outer() const { return profile_->outer(); }
  const std::string& label() const { return profile_->label(); }
  const PlateauBump& profile() const { return *profile_; }

  bool same_profile(const Mollifier& other) const {
    return profile_ == other.profile_ ||
           (profile_->family() == other.profile_->family() &&
            profile_->inner() == other.profile_->inner() &&
            profile_->outer() == other.profile_->outer());
  }

  static std::vector<Mollifier> stock() {
    std::vector<Mollifier> out;
    for (auto& p : PlateauBump::stock()) out.emplace_back(std::move(p));
    return out;
  }

 private:
  std::shared_ptr<PlateauBump> profile_;
};

// Position-space cutoff with the same plateau-bump structure; used to
// restrict spatial integrals.
class Cutoff {
 public:
  explicit Cutoff(PlateauBump profile) : profile_(std::move(profile)) {}

  double operator()(double y) const { return profile_.value(y); }
  double value(double y) const { return profile_.value(y); }
  double inner() const { return profile_.inner(); }
  double outer() const { return profile_.outer(); }
  const std::string& label() const { return profile_.label(); }

 private:
  PlateauBump profile_;
};

// Monotone sigmoid saturating at 0 (left) and 1 (right), used to build
// smoothed jump functions. All stock members are symmetric: value(0) = 1/2.
class TransitionProfile {
 public:
  enum class Family { tanh_sig, erf_sig, logistic_sig, algebraic_sig };

  TransitionProfile(Family family, std::string label)
      : family_(family), label_(std::move(label)) {}

  double value(double y) const {
    switch (family_) {
      case Family::tanh_sig:
        return 0.5 * (1.0 + std::tanh(y));
      case Family::erf_sig:
        return 0.5 * (1.0 + std::erf(y / std::sqrt(2.0)));
      case Family::logistic_sig:
        return 1.0 / (1.0 + std::exp(-y));
      case Family::algebraic_sig:
        return 0.5 * (1.0 + y / std::sqrt(1.0 + y * y));
    }
    return 0.0;
  }

  double derivative(double y) const {
    switch (family_) {
      case Family::tanh_sig: {
        double c = std::cosh(y);
        return 0.5 / (c * c);
      }
      case Family::erf_sig:
        return std::exp(-0.5 * y * y) / std::sqrt(8.0 * std::atan(1.0));
      case Family::logistic_sig: {
        double v = value(y);
        return v * (1.0 - v);
      }
      case Family::algebraic_sig:
        return 0.5 * std::pow(1.0 + y * y, -1.5);
    }
    return 0.0;
  }

  // True when the tails approach 0/1 exponentially fast (false for the
  // algebraic profile, whose tails are polynomial).
  bool exponential_tails() const { return family_ != Family::algebraic_sig; }

  const std::string& label() const { return label_; }
  Family family() const { return family_; }

  static std::vector<TransitionProfile> stock() {
    return {TransitionProfile(Family::tanh_sig, "tanh_sig"),
            TransitionProfile(Family::erf_sig, "erf_sig"),
            TransitionProfile(Family::logistic_sig, "logistic_sig")};
  }

  static TransitionProfile algebraic() {
    return TransitionProfile(Family::algebraic_sig, "algebraic_sig");
  }

 private:
  Family family_;
  std::string label_;
};

}  // namespace qflab
