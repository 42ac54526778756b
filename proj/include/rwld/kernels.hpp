#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "rwld/control.hpp"
#include "rwld/fracspace.hpp"
#include "rwld/grid.hpp"
#include "rwld/hurst.hpp"
#include "rwld/quadrature.hpp"

namespace rwld {

/// Wave kernel G(t,x) = ½ 1{|x| < t}.
inline double green(double t, double x) { return (t > 0.0 && std::abs(x) < t) ? 0.5 : 0.0; }

/// Poisson-type kernel E(t,x) = t / (π (t² + x²)).
inline double kernel_E(double t, double x) { return t / (std::numbers::pi * (t * t + x * x)); }

/// S_α(t,x). Non-finite (NaN) on the characteristic |x| = t.
inline double kernel_S_alpha(double t, double x, double alpha) {
  const double ax = std::abs(x);
  const double d = t - ax;
  if (d == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double c = std::tgamma(1.0 - alpha) * std::cos(0.5 * alpha * std::numbers::pi) / (2.0 * std::numbers::pi);
  const double sg = d > 0.0 ? 1.0 : -1.0;
  return c * (std::pow(t + ax, alpha - 1.0) + sg * std::pow(std::abs(d), alpha - 1.0));
}

/// C_{1-α}(t,x). Non-finite (NaN) on the characteristic |x| = t.
inline double kernel_C_1malpha(double t, double x, double alpha) {
  const double ax = std::abs(x);
  const double d = t - ax;
  if (d == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double c = std::tgamma(alpha) / (2.0 * std::numbers::pi);
  const double first = std::cos(0.5 * alpha * std::numbers::pi) * (std::pow(t + ax, -alpha) + std::pow(std::abs(d), -alpha));
  const double second = 2.0 * std::cos(alpha * std::atan(ax / t)) * std::pow(t * t + x * x, -0.5 * alpha);
  return c * (first - second);
}

/// C_γ(t,x) = C_{1-α}(t,x) with α = 1 - γ.
inline double kernel_C(double t, double x, double gamma) { return kernel_C_1malpha(t, x, 1.0 - gamma); }

enum class KernelTag { K1, K2, K3, K4 };

/// Pairing used in the four-term factorisation: K1 = C_β (complement
/// S_{1-β}), K2 = S_α (complement C_{1-α}), K3 = S = G (complement E),
/// K4 = E (complement S).
struct KernelId {
  KernelTag tag = KernelTag::K3;
  double alpha = 0.5;
  double beta = 0.5;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
      throw ConfigError("kernel: alpha and beta must lie in (0,1)");
  }

  double eval(double t, double x) const {
    switch (tag) {
      case KernelTag::K1: return kernel_C(t, x, beta);
      case KernelTag::K2: return kernel_S_alpha(t, x, alpha);
      case KernelTag::K3: return green(t, x);
      case KernelTag::K4: return kernel_E(t, x);
    }
    return 0.0;
  }

  double complement(double t, double x) const {
    switch (tag) {
      case KernelTag::K1: return kernel_S_alpha(t, x, 1.0 - beta);
      case KernelTag::K2: return kernel_C_1malpha(t, x, alpha);
      case KernelTag::K3: return kernel_E(t, x);
      case KernelTag::K4: return green(t, x);
    }
    return 0.0;
  }

  bool singular_on_characteristic() const { return tag == KernelTag::K1 || tag == KernelTag::K2; }
};

inline std::string to_string(KernelTag k) {
  switch (k) {
    case KernelTag::K1: return "K1";
    case KernelTag::K2: return "K2";
    case KernelTag::K3: return "K3";
    case KernelTag::K4: return "K4";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// difference operators

/// 𝒟_h k(t,x) = k(t,x+h) - k(t,x).
template <class K>
double diff_h(K&& kernel, double t, double x, double h) {
  if (h == 0.0) return 0.0;
  return kernel(t, x + h) - kernel(t, x);
}

/// □_{h,l} k(t,x) = k(t,x+h+l) - k(t,x+l) - k(t,x+h) + k(t,x).
template <class K>
double box_hl(K&& kernel, double t, double x, double h, double l) {
  if (h == 0.0 || l == 0.0) return 0.0;
  return kernel(t, x + h + l) - kernel(t, x + l) - kernel(t, x + h) + kernel(t, x);
}

// ---------------------------------------------------------------------------
// factorisation of the wave kernel

struct DecompositionTerms {
  double term[4] = {0, 0, 0, 0};
  double sum = 0.0;
  double target = 0.0;
  double residual = 0.0;
};

/// The four z-integrals whose sum reproduces G(t-s, x-y) for s < r < t:
/// C_β*S_{1-β} + S_α*C_{1-α} + S*E + E*S, each integrated over R with
/// panels split at every kink and characteristic, `quad_n` nodes per panel.
inline DecompositionTerms decomposition_terms(double t, double s, double r, double x, double y, double alpha,
                                              double beta, int quad_n) {
  if (!(s < r && r < t)) throw ConfigError("verify_decomposition: need s < r < t");
  if (!(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0))
    throw ConfigError("verify_decomposition: alpha and beta must lie in (0,1)");
  const double t1 = t - r, t2 = r - s;
  const std::vector<double> br{x - t1, x, x + t1, y - t2, y, y + t2};
  const double inf = std::numeric_limits<double>::infinity();
  const double scale = std::max(t1, t2);

  DecompositionTerms d;
  auto integrate = [&](auto&& f) { return quad::panels(f, br, -inf, inf, quad_n, scale); };
  d.term[0] = integrate([&](double z) { return kernel_C(t1, x - z, beta) * kernel_S_alpha(t2, z - y, 1.0 - beta); });
  d.term[1] = integrate([&](double z) { return kernel_S_alpha(t1, x - z, alpha) * kernel_C_1malpha(t2, z - y, alpha); });
  // compactly supported G factor: integrate over its support only
  d.term[2] = quad::tanh_sinh([&](double z) { return 0.5 * kernel_E(t2, z - y); }, x - t1, x + t1, quad_n);
  d.term[3] = quad::tanh_sinh([&](double z) { return kernel_E(t1, x - z) * 0.5; }, y - t2, y + t2, quad_n);
  d.sum = d.term[0] + d.term[1] + d.term[2] + d.term[3];
  d.target = green(t - s, x - y);
  d.residual = std::abs(d.sum - d.target);
  return d;
}

inline double verify_decomposition(double t, double s, double r, double x, double y, double alpha, double beta,
                                   int quad_n) {
  return decomposition_terms(t, s, r, x, y, alpha, beta, quad_n).residual;
}

// ---------------------------------------------------------------------------
// fractional integrals of the wave kernel

/// ∬ |𝒟_h G(t,x)|² |h|^{2H-2} dh dx = (2t)^{2H} / (2H(1-2H)), from
/// ∫ |𝒟_h G(t,·)|² dx = min(|h|, 2t)/2.
inline double frac_integral_D(double t, const HurstParam& hp) {
  if (!(t > 0.0)) throw ConfigError("frac_integral_D: t must be > 0");
  const double H = hp.H();
  return std::pow(2.0 * t, 2.0 * H) / (2.0 * H * (1.0 - 2.0 * H));
}

namespace detail {

/// ∫ |□_{h,l} G(t,x)|² dx for h, l >= 0 (interval overlap algebra).
inline double box_sq_x(double t, double h, double l) {
  auto m = [t](double d) { return std::max(0.0, 2.0 * t - std::abs(d)); };
  return 0.25 * (8.0 * t - 4.0 * m(h) - 4.0 * m(l) + 2.0 * m(h + l) + 2.0 * m(h - l));
}

/// ∫_0^∞ box_sq_x(t,h,l) l^{2H-2} dl; the integrand is piecewise linear in l,
/// so each piece is integrated in closed form.
inline double box_inner_l(double t, double h, double H) {
  std::vector<double> k{2.0 * t, 2.0 * t - h, h - 2.0 * t, h + 2.0 * t, h};
  k.erase(std::remove_if(k.begin(), k.end(), [](double v) { return !(v > 0.0); }), k.end());
  std::sort(k.begin(), k.end());
  k.erase(std::unique(k.begin(), k.end()), k.end());
  const long double p1 = 2.0L * H - 1.0L, p2 = 2.0L * H;
  long double sum = 0.0L;
  double l0 = 0.0, b0 = 0.0;  // box_sq_x(t,h,0) = 0
  for (double l1 : k) {
    const double b1 = box_sq_x(t, h, l1);
    const long double slope = (static_cast<long double>(b1) - b0) / (static_cast<long double>(l1) - l0);
    const long double Ip1 = powl(l1, p2) / p2 - (l0 > 0.0 ? powl(l0, p2) / p2 : 0.0L);
    if (l0 == 0.0) {
      sum += slope * Ip1;
    } else {
      const long double Ip0 = (powl(l1, p1) - powl(l0, p1)) / p1;
      sum += (b0 - slope * l0) * Ip0 + slope * Ip1;
    }
    l0 = l1;
    b0 = b1;
  }
  sum += static_cast<long double>(b0) * powl(l0, p1) / -p1;  // constant beyond the last kink
  return static_cast<double>(sum);
}

}  // namespace detail

/// ∭ |□_{h,l} G(t,x)|² |h|^{2H-2} |l|^{2H-2} dh dl dx. The x-integral is
/// exact, the l-integral exact per linear piece, the h-integral by
/// double-exponential panels split at the kinks t, 2t, 4t.
inline double frac_integral_box(double t, const HurstParam& hp) {
  if (!(t > 0.0)) throw ConfigError("frac_integral_box: t must be > 0");
  const double H = hp.H();
  auto f = [&](double h) { return detail::box_inner_l(t, h, H) * std::pow(h, 2.0 * H - 2.0); };
  const double inf = std::numeric_limits<double>::infinity();
  const auto est = quad::refine([&](int n) { return quad::panels(f, {t, 2.0 * t, 4.0 * t}, 0.0, inf, n, 4.0 * t); },
                                1e-11, 0.0, 64, 4096);
  return 4.0 * est.value;
}

// ---------------------------------------------------------------------------
// J_θ transform

namespace detail {

/// Average of kernel K(tau, ·) over the dual cell centred at lag d·dx.
inline double cell_average(const KernelId& K, double tau, int d, double dx) {
  const double a = (d - 0.5) * dx, b = (d + 0.5) * dx;
  if (K.tag == KernelTag::K3) {
    const double lo = std::max(a, -tau), hi = std::min(b, tau);
    return hi > lo ? 0.5 * (hi - lo) / dx : 0.0;
  }
  std::vector<double> br{-tau, 0.0, tau};
  auto f = [&](double y) { return K.eval(tau, y); };
  return quad::refine([&](int n) { return quad::panels(f, br, a, b, n); }, 1e-10, 1e-14, 32, 512).value / dx;
}

}  // namespace detail

/// J_θ(r, z) = ∫_0^r (r-s)^{-θ} ⟨K(r-s, z-·) σ(s,·), g(s,·)⟩_{H_ε} ds on the
/// grid. The kernel is averaged over dual cells, the weight (r-s)^{-θ} is
/// integrated exactly over each slab with the rest frozen at its left end.
inline Field j_theta_transform(const KernelId& K, const Field& sigma_u, const Control& g, double theta,
                               const HurstParam& hp, const Grid& grid, double eps = 0.0) {
  K.validate();
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("j_theta_transform: theta must lie in (0,1)");
  require_same_grid(sigma_u.grid, grid, "j_theta_transform");
  require_same_grid(g.grid, grid, "j_theta_transform");
  const int N = grid.nodes(), nt = grid.nt;
  const double dx = grid.dx(), dt = grid.dt();
  Field J(grid);
  if (g.is_zero() || (sigma_u.values.array() == 0.0).all()) return J;

  const CellGram Q = cell_gram(grid, hp, eps);
  RowMat v(nt, N);  // σ(s_m, x_k) (Q g_m)_k
  for (int m = 0; m < nt; ++m) v.row(m) = sigma_u.values.row(m).cwiseProduct((Q.Q * g.g.row(m).transpose()).transpose());

  // kernel table A[q][|d|], q = 1..nt slabs back
  RowMat A(nt + 1, N);
  A.row(0).setZero();
  for (int q = 1; q <= nt; ++q)
    for (int d = 0; d < N; ++d) A(q, d) = detail::cell_average(K, q * dt, d, dx);

  const double e = 1.0 - theta;
  for (int i = 1; i <= nt; ++i) {
    const double r = grid.t(i);
    for (int m = 0; m < i; ++m) {
      const double w = (std::pow(r - grid.t(m), e) - std::pow(r - grid.t(m + 1), e)) / e;
      const int q = i - m;
      for (int j = 0; j < N; ++j) {
        double s = 0.0;
        for (int k = 0; k < N; ++k) s += A(q, std::abs(j - k)) * v(m, k);
        J.values(i, j) += w * s;
      }
    }
  }
  return J;
}

struct JThetaReport {
  double p = 2.0;
  double integral = 0.0;   // max_r ∫ |J_θ(r,z)|^p dz
  double zp_power = 0.0;   // ‖u‖^p_{Z^p}
  double ratio = 0.0;
};

inline JThetaReport j_theta_report(const Field& J, const Field& u, double p, const HurstParam& hp) {
  JThetaReport r;
  r.p = p;
  for (int i = 0; i <= J.grid.nt; ++i) {
    const double lp = detail::lp_trapezoid(J.values.row(i).transpose(), J.grid.dx(), p);
    r.integral = std::max(r.integral, std::pow(lp, p));
  }
  r.zp_power = std::pow(zp_norm(u, p, hp), p);
  r.ratio = r.zp_power > 0.0 ? r.integral / r.zp_power : 0.0;
  return r;
}

}  // namespace rwld
