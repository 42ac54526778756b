#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rwld/quadrature.hpp"

namespace rwld {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// ∫_0^∞ [(1+t)^a - t^a]^2 dt for a = H - 1/2 in (-1/4, 0).
// [0,2] by double-exponential quadrature, [2,∞) by the binomial series
// (1+t)^a - t^a = Σ_{k≥1} C(a,k) t^{a-k}, integrated term by term.
inline double increment_kernel_integral(double H) {
  const double a = H - 0.5;
  auto f = [a](double t) {
    const double d = std::pow(1.0 + t, a) - std::pow(t, a);
    return d * d;
  };
  auto head = quad::refine(
      [&](int n) { return quad::tanh_sinh(f, 0.0, 1.0, n) + quad::tanh_sinh(f, 1.0, 2.0, n); },
      1e-14, 0.0, 64, 1 << 14);

  constexpr double t0 = 2.0;
  constexpr int kTerms = 80;  // ratio 1/t0 per order, 2^-80 is far below 1e-16
  double b[kTerms + 1];
  b[0] = 1.0;
  for (int k = 1; k <= kTerms; ++k) b[k] = b[k - 1] * (a - (k - 1)) / k;
  double tail = 0.0;
  for (int m = 2; m <= 2 * kTerms; ++m) {
    double coef = 0.0;
    for (int k = std::max(1, m - kTerms); k <= std::min(kTerms, m - 1); ++k) coef += b[k] * b[m - k];
    const double e = 2.0 * a - m + 1.0;  // exponent after integration, negative
    tail += coef * std::pow(t0, e) / (-e);
  }
  return head.value + tail;
}

}  // namespace detail

/// Hurst index H ∈ (1/4, 1/2) and the constants of the spectral and the
/// difference representations of the noise covariance.
class HurstParam {
 public:
  explicit HurstParam(double H) : H_(H) {
    if (!(H > 0.25 && H < 0.5))
      throw ConfigError("Hurst index must lie in (0.25, 0.5), got " + std::to_string(H));
    c1_ = std::tgamma(2.0 * H + 1.0) * std::sin(std::numbers::pi * H) / (2.0 * std::numbers::pi);
    c2_integral_ = detail::increment_kernel_integral(H);
    c2_ = std::sqrt(H * (0.5 - H)) / std::tgamma(H + 0.5) * std::sqrt(c2_integral_ + 0.5 / H);
    c_diff_ = 0.5 * H * (1.0 - 2.0 * H);
  }

  double H() const { return H_; }
  /// Spectral density constant: μ(dξ) = c1 |ξ|^{1-2H} dξ.
  double c1() const { return c1_; }
  /// Normalising constant of the difference form as printed in the source
  /// model; kept for reference, see c_diff().
  double c2() const { return c2_; }
  /// ∫_0^∞ [(1+t)^{H-1/2} - t^{H-1/2}]^2 dt, the integral inside c2.
  double c2_integral() const { return c2_integral_; }
  /// Constant that makes the difference form equal to the spectral form:
  /// ‖φ‖² = c_diff ∬ |φ(x+y)-φ(x)|² |y|^{2H-2} dx dy.
  double c_diff() const { return c_diff_; }

  /// Closed form of c2_integral(): Γ(H+½)²/(Γ(2H+1) sin πH) - 1/(2H).
  static double c2_integral_closed(double H) {
    const double g = std::tgamma(H + 0.5);
    return g * g / (std::tgamma(2.0 * H + 1.0) * std::sin(std::numbers::pi * H)) - 0.5 / H;
  }

  bool operator==(const HurstParam& o) const { return H_ == o.H_; }

 private:
  double H_;
  double c1_ = 0.0;
  double c2_ = 0.0;
  double c2_integral_ = 0.0;
  double c_diff_ = 0.0;
};

}  // namespace rwld
