#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <boost/math/special_functions/gamma.hpp>

#include "rwld/grid.hpp"
#include "rwld/hurst.hpp"
#include "rwld/quadrature.hpp"

namespace rwld {

// ---------------------------------------------------------------------------
// special functions

/// Hurwitz zeta ζ(s, q) for s > 1, q > 0 (Euler-Maclaurin after 12 terms).
inline double hurwitz_zeta(double s, double q) {
  constexpr int kDirect = 12;
  double sum = 0.0;
  for (int k = 0; k < kDirect; ++k) sum += std::pow(k + q, -s);
  const double n = kDirect + q;
  sum += std::pow(n, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(n, -s);
  // Bernoulli numbers B_2j / (2j)!
  static constexpr double kB[] = {1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0,
                                  1.0 / 47900160.0, -691.0 / 1307674368000.0};
  double rising = s;  // s (s+1) ... (s+2j-2)
  double p = std::pow(n, -s - 1.0);
  for (int j = 0; j < 6; ++j) {
    sum += kB[j] * rising * p;
    rising *= (s + 2 * j + 1) * (s + 2 * j + 2);
    p /= n * n;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// spectral route

struct FourierOptions {
  int pad = 8;  // zero-padding factor, at least 4
};

namespace detail {

/// Periodised spectral weight of a piecewise-constant reconstruction:
/// Σ_m sinc²(u+πm) |ξ_m|^{a} e^{-ε ξ_m²} with ξ_m = (2/dx)(u+πm), a = 1-2H.
/// Returned without the dx² factor of the cell transform.
class AliasWeight {
 public:
  AliasWeight(double dx, double H, double eps) : dx_(dx), a_(1.0 - 2.0 * H), eps_(eps) {
    beta_ = eps * (2.0 / dx) * (2.0 / dx);
    if (eps > 0.0) {
      const double k = std::sqrt(40.0 / beta_) / std::numbers::pi + 1.0;
      K_ = static_cast<int>(std::clamp(k, 64.0, 4096.0));
    }
  }

  double operator()(double u) const {
    const double s2 = std::sin(u) * std::sin(u);
    if (s2 == 0.0) return 0.0;
    const double p = a_ - 2.0;
    double sum = 0.0;
    if (eps_ == 0.0) {
      const double v = u / std::numbers::pi;
      sum = std::pow(u, p) + std::pow(std::numbers::pi, p) *
                                 (hurwitz_zeta(2.0 - a_, 1.0 + v) + hurwitz_zeta(2.0 - a_, 1.0 - v));
    } else {
      for (int m = -K_; m <= K_; ++m) {
        const double y = std::abs(u + std::numbers::pi * m);
        sum += std::pow(y, p) * std::exp(-beta_ * y * y);
      }
      // midpoint-rule tails beyond |m| = K
      const double y0 = std::numbers::pi * (K_ + 0.5);
      sum += (tail(y0 + u) + tail(y0 - u)) / std::numbers::pi;
    }
    return std::pow(2.0 / dx_, a_) * s2 * sum;
  }

 private:
  // ∫_Y^∞ y^{a-2} e^{-β y²} dy = ½ β^{(1-a)/2} Γ((a-1)/2, βY²)
  double tail(double Y) const {
    const double c = 0.5 * (a_ - 1.0);
    const double z = beta_ * Y * Y;
    const double upper = (boost::math::tgamma(c + 1.0, z) - std::pow(z, c) * std::exp(-z)) / c;
    return 0.5 * std::pow(beta_, -c) * upper;
  }

  double dx_, a_, eps_;
  double beta_ = 0.0;
  int K_ = 0;
};

inline int fourier_length(const Grid& g, double eps, const FourierOptions& opt) {
  if (opt.pad < 4) throw ConfigError("fourier: padding factor must be at least 4");
  long need = static_cast<long>(opt.pad) * g.nodes();
  if (eps > 0.0) {
    // resolve the Gaussian factor: Δξ <= 0.25/√ε
    const double m = 2.0 * std::numbers::pi * std::sqrt(eps) / (0.25 * g.dx());
    need = std::max(need, static_cast<long>(std::ceil(m)));
  }
  long M = 1;
  while (M < need) M <<= 1;
  if (M > (1L << 24)) throw NumericError("fourier: transform length exceeds 2^24");
  return static_cast<int>(M);
}

inline double fourier_inner(const GridFunction& phi, const GridFunction& psi, const HurstParam& hp,
                            double eps, const FourierOptions& opt) {
  require_same_grid(phi.grid, psi.grid, "h_inner_fourier");
  phi.check();
  psi.check();
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("h_eps_inner: eps must be >= 0");
  const Grid& g = phi.grid;
  const double dx = g.dx();
  const int M = fourier_length(g, eps, opt);

  std::vector<double> a(M, 0.0), b(M, 0.0);
  for (int j = 0; j < g.nodes(); ++j) {
    a[j] = phi.values[j];
    b[j] = psi.values[j];
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> A, B;
  fft.fwd(A, a);
  fft.fwd(B, b);

  const AliasWeight w(dx, hp.H(), eps);
  const double dxi = 2.0 * std::numbers::pi / (M * dx);
  double re = 0.0, im = 0.0, mag = 0.0;
  for (int k = 1; k < M; ++k) {
    const double wk = w(std::numbers::pi * k / M);
    const std::complex<double> z = A[k] * std::conj(B[k]);
    re += z.real() * wk;
    im += z.imag() * wk;
    mag += std::abs(z) * wk;
  }
  if (std::abs(im) > 1e-10 * std::max(mag, std::abs(re)) && std::abs(im) > 1e-300)
    throw NumericError("h_inner_fourier: imaginary residue above tolerance");
  // trapezoid over one period plus the |ξ|^{1-2H} cusp correction at ξ = 0
  const double g0 = dx * dx * A[0].real() * B[0].real();
  const double a_exp = 1.0 - 2.0 * hp.H();
  const double cusp = 2.0 * std::riemann_zeta(-a_exp) * std::pow(dxi, 1.0 + a_exp) * g0;
  return hp.c1() * (dxi * dx * dx * re - cusp);
}

}  // namespace detail

/// c1 ∫ Fφ conj(Fψ) |ξ|^{1-2H} dξ by zero-padded DFT and trapezoid in ξ.
inline double h_inner_fourier(const GridFunction& phi, const GridFunction& psi, const HurstParam& hp,
                              const FourierOptions& opt = {}) {
  return detail::fourier_inner(phi, psi, hp, 0.0, opt);
}

/// Mollified product: spectral weight damped by e^{-ε ξ²}. eps = 0 is
/// h_inner_fourier.
inline double h_eps_inner(const GridFunction& phi, const GridFunction& psi, const HurstParam& hp,
                          double eps, const FourierOptions& opt = {}) {
  if (!(eps >= 0.0)) throw ConfigError("h_eps_inner: eps must be >= 0");
  return detail::fourier_inner(phi, psi, hp, eps, opt);
}

/// Frequency spacing used by the spectral route (for run manifests).
inline double fourier_spacing(const Grid& g, double eps = 0.0, const FourierOptions& opt = {}) {
  return 2.0 * std::numbers::pi / (detail::fourier_length(g, eps, opt) * g.dx());
}

// ---------------------------------------------------------------------------
// difference route

/// ∫_R D(|y|) |y|^{2H-2} dy for D piecewise linear in y with D(0) = 0,
/// D(k dx) = D[k] for k = 0..K and D = D[K] beyond K dx.
inline double weighted_lag_integral(const std::vector<double>& D, double dx, double H) {
  const int K = static_cast<int>(D.size()) - 1;
  if (K < 1) return 0.0;
  const long double p1 = 2.0L * H - 1.0L;  // exponent of y^p after one integration
  const long double p2 = 2.0L * H;
  long double sum = static_cast<long double>(D[1]) / p2;  // first cell: D[1] s on s in [0,1]
  for (int k = 1; k < K; ++k) {
    // ∫_0^1 (D_k (1-s) + D_{k+1} s) (k+s)^{2H-2} ds
    const long double kk = k, k1 = k + 1;
    const long double I0 = (powl(k1, p1) - powl(kk, p1)) / p1;
    const long double I1 = (powl(k1, p2) - powl(kk, p2)) / p2 - kk * I0;  // ∫ s (k+s)^p
    sum += D[k] * (I0 - I1) + D[k + 1] * I1;
  }
  sum += static_cast<long double>(D[K]) * powl(static_cast<long double>(K), p1) / -p1;
  return static_cast<double>(2.0L * sum * powl(static_cast<long double>(dx), p1));
}

namespace detail {

inline double at(const Vec& v, long j) { return (j >= 0 && j < v.size()) ? v[j] : 0.0; }

/// Lag sums D_k = ∫ Δ_{k dx}φ Δ_{k dx}ψ dx of the reconstructions, k = 0..N.
inline std::vector<double> lag_products(const Vec& phi, const Vec& psi, double dx) {
  const long N = phi.size();
  std::vector<double> D(N + 1, 0.0);
  for (long k = 1; k <= N; ++k) {
    double s = 0.0;
    for (long j = -k; j < N; ++j) s += (at(phi, j + k) - at(phi, j)) * (at(psi, j + k) - at(psi, j));
    D[k] = dx * s;
  }
  return D;
}

}  // namespace detail

/// c_diff ∬ [φ(x+y)-φ(x)][ψ(x+y)-ψ(x)] |y|^{2H-2} dx dy, exact for the
/// piecewise-constant reconstructions (x-integral is piecewise linear in y,
/// the weight is integrated in closed form per cell, tail analytically).
inline double h_inner_difference(const GridFunction& phi, const GridFunction& psi, const HurstParam& hp) {
  require_same_grid(phi.grid, psi.grid, "h_inner_difference");
  phi.check();
  psi.check();
  const double dx = phi.grid.dx();
  return hp.c_diff() * weighted_lag_integral(detail::lag_products(phi.values, psi.values, dx), dx, hp.H());
}

// ---------------------------------------------------------------------------
// Gram matrix of the dual-cell indicators

/// ⟨1_{cell j}, 1_{cell k}⟩ in H (eps = 0) or H_eps. Symmetric Toeplitz;
/// φᵀ Q ψ is the product of the reconstructions.
struct CellGram {
  Grid grid;
  double H = 0.0;
  double eps = 0.0;
  Vec lag;   // lag[d] = Q_{j,j+d}
  RowMat Q;  // dense form

  Vec apply(const Vec& v) const { return Q * v; }
  double inner(const Vec& a, const Vec& b) const { return a.dot(Q * b); }
};

namespace detail {

/// fBm increment covariance of two unit-length cells at lag y (in cells),
/// scaled by dx^{2H}.
inline double cell_cov(double y, double H) {
  const double e = 2.0 * H;
  return 0.5 * (std::pow(std::abs(y + 1.0), e) + std::pow(std::abs(y - 1.0), e) - 2.0 * std::pow(std::abs(y), e));
}

/// Gaussian smoothing (variance s2, in cell units) of cell_cov at lag y.
inline double smoothed_cell_cov(double y, double H, double s2) {
  const double sd = std::sqrt(s2);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);
  auto f = [&](double z) { return cell_cov(y - z, H) * norm * std::exp(-0.5 * z * z / s2); };
  std::vector<double> br{y - 1.0, y, y + 1.0, 0.0, -sd, sd, -3.0 * sd, 3.0 * sd, -6.0 * sd, 6.0 * sd};
  const double inf = std::numeric_limits<double>::infinity();
  return quad::refine([&](int n) { return quad::panels(f, br, -inf, inf, n, sd); }, 1e-12, 1e-15, 48, 1536)
      .value;
}

}  // namespace detail

inline CellGram cell_gram(const Grid& g, const HurstParam& hp, double eps = 0.0) {
  if (!(eps >= 0.0)) throw ConfigError("cell_gram: eps must be >= 0");
  const int N = g.nodes();
  CellGram G{g, hp.H(), eps, Vec(N), RowMat(N, N)};
  const double scale = std::pow(g.dx(), 2.0 * hp.H());
  const double s2 = 2.0 * eps / (g.dx() * g.dx());
  for (int d = 0; d < N; ++d)
    G.lag[d] = scale * (eps == 0.0 ? detail::cell_cov(d, hp.H()) : detail::smoothed_cell_cov(d, hp.H(), s2));
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < N; ++k) G.Q(j, k) = G.lag[std::abs(j - k)];
  return G;
}

// ---------------------------------------------------------------------------
// mollifier

/// f_ε(x) = F^{-1}(e^{-εξ²}|ξ|^{1-2H})(x) = (1/π)∫_0^∞ cos(ξx) e^{-εξ²} ξ^{1-2H} dξ.
inline double mollifier_f_eps(double x, const HurstParam& hp, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("mollifier_f_eps: eps must be > 0");
  const double a = 1.0 - 2.0 * hp.H();
  const double X = std::abs(x) / std::sqrt(eps);
  // η = √ε ξ; integrate over [0, 7], panels of one half period of cos(Xη)
  constexpr double kEnd = 7.0;
  std::vector<double> br;
  if (X > 0.0) {
    const double half = std::numbers::pi / X;
    for (double b = half; b < kEnd && br.size() < 200000; b += half) br.push_back(b);
  }
  auto f = [&](double eta) { return std::cos(X * eta) * std::exp(-eta * eta) * std::pow(eta, a); };
  const double I =
      quad::refine([&](int n) { return quad::panels(f, br, 0.0, kEnd, n); }, 1e-13, 1e-300, 32, 1024).value;
  return I * std::pow(eps, -0.5 * (1.0 + a)) / std::numbers::pi;
}

/// Closed form f_ε(0) = Γ(1-H) / (2π ε^{1-H}).
inline double mollifier_f_eps_at_zero(const HurstParam& hp, double eps) {
  return std::tgamma(1.0 - hp.H()) / (2.0 * std::numbers::pi * std::pow(eps, 1.0 - hp.H()));
}

// ---------------------------------------------------------------------------
// seminorms and field norms

inline constexpr const char* kRuleCellExact = "cell-exact";   // weight integrated per dual cell
inline constexpr const char* kRuleLagLinear = "lag-linear";   // lag norms interpolated linearly in h
inline constexpr const char* kRuleTrapezoid = "trapezoid";

namespace detail {

// ∫ over dual cell k (k >= 1) of |h|^{2H-2}
inline double cell_weight(int k, double dx, double H) {
  const double p1 = 2.0 * H - 1.0;
  return std::pow(dx, p1) * (std::pow(k + 0.5, p1) - std::pow(k - 0.5, p1)) / p1;
}

// ∫_{(k+½)dx}^∞ |h|^{2H-2} dh
inline double tail_weight(int k, double dx, double H) {
  const double p1 = 2.0 * H - 1.0;
  return std::pow(dx, p1) * std::pow(k + 0.5, p1) / -p1;
}

}  // namespace detail

/// 𝒩(x_j)² = ∫ |f(x_j+h) - f(x_j)|² |h|^{2H-2} dh at one node, exact for
/// the reconstruction (rule "cell-exact"). Returns the square root.
inline double frac_seminorm_N(const GridFunction& f, const HurstParam& hp, int node) {
  f.check();
  const int N = f.grid.nodes();
  if (node < 0 || node >= N) throw ConfigError("frac_seminorm_N: node out of range");
  const double dx = f.grid.dx(), H = hp.H();
  const Vec& v = f.values;
  double s = 0.0;
  for (int k = 1; k < N; ++k) {
    const double w = detail::cell_weight(k, dx, H);
    const double r = detail::at(v, node + k) - v[node];
    const double l = detail::at(v, node - k) - v[node];
    s += (r * r + l * l) * w;
  }
  // beyond the grid the reconstruction vanishes
  const double f2 = v[node] * v[node];
  s += f2 * (detail::tail_weight(N - 1, dx, H) * 2.0);
  return std::sqrt(s);
}

/// Nodal profile of frac_seminorm_N over all nodes.
inline Vec frac_seminorm_N_profile(const GridFunction& f, const HurstParam& hp) {
  Vec out(f.grid.nodes());
  for (int j = 0; j < f.grid.nodes(); ++j) out[j] = frac_seminorm_N(f, hp, j);
  return out;
}

/// Aggregated form (∬ |f(x+h)-f(x)|² |h|^{2H-2} dh dx)^{1/2}, rule "lag-linear"
/// (exact for the reconstruction).
inline double frac_seminorm_N_aggregated(const GridFunction& f, const HurstParam& hp) {
  f.check();
  const double dx = f.grid.dx();
  return std::sqrt(weighted_lag_integral(detail::lag_products(f.values, f.values, dx), dx, hp.H()));
}

struct ZpNormReport {
  double value = 0.0;
  double lp_term = 0.0;         // sup_t ‖u(t)‖_{L^p}
  double seminorm_term = 0.0;   // sup_t 𝒩*_{1/2-H,p} u(t)
  std::string lp_rule = kRuleTrapezoid;
  std::string seminorm_rule = kRuleLagLinear;
};

namespace detail {

inline double lp_trapezoid(const Eigen::Ref<const Vec>& v, double dx, double p) {
  double s = 0.0;
  const long N = v.size();
  for (long j = 0; j < N; ++j) s += std::pow(std::abs(v[j]), p) * ((j == 0 || j == N - 1) ? 0.5 : 1.0);
  return std::pow(dx * s, 1.0 / p);
}

// 𝒩*_p(v)² = ∫ ‖v(·+h) - v‖²_{L^p} |h|^{2H-2} dh with the lag norms taken
// exactly at h = k dx and interpolated linearly in between.
inline double nstar_sq(const Vec& v, double dx, double p, double H) {
  const long N = v.size();
  std::vector<double> E(N + 1, 0.0);
  for (long k = 1; k <= N; ++k) {
    double s = 0.0;
    for (long j = -k; j < N; ++j) s += std::pow(std::abs(at(v, j + k) - at(v, j)), p);
    E[k] = std::pow(dx * s, 2.0 / p);
  }
  return weighted_lag_integral(E, dx, H);
}

}  // namespace detail

inline ZpNormReport zp_norm_report(const Field& u, double p, const HurstParam& hp) {
  if (!(p >= 2.0)) throw ConfigError("zp_norm: p must be >= 2");
  u.check();
  const double dx = u.grid.dx();
  ZpNormReport r;
  for (int i = 0; i <= u.grid.nt; ++i) {
    const Vec row = u.values.row(i).transpose();
    r.lp_term = std::max(r.lp_term, detail::lp_trapezoid(row, dx, p));
    r.seminorm_term = std::max(r.seminorm_term, std::sqrt(detail::nstar_sq(row, dx, p, hp.H())));
  }
  r.value = r.lp_term + r.seminorm_term;
  return r;
}

inline double zp_norm(const Field& u, double p, const HurstParam& hp) { return zp_norm_report(u, p, hp).value; }

/// Σ_n 2^{-n} max_{t, |x|<=n} min(|u-v|, 1), truncated at n = ⌈L⌉ with the
/// remaining tail charged at the n = ⌈L⌉ maximum.
inline double dC_metric(const Field& u, const Field& v) {
  require_same_grid(u.grid, v.grid, "dC_metric");
  const Grid& g = u.grid;
  const int nmax = static_cast<int>(std::ceil(g.L - 1e-12));
  std::vector<double> m(nmax + 1, 0.0);
  for (int j = 0; j < g.nodes(); ++j) {
    const double ax = std::abs(g.x(j));
    double col = 0.0;
    for (int i = 0; i <= g.nt; ++i) col = std::max(col, std::min(std::abs(u.values(i, j) - v.values(i, j)), 1.0));
    const int n0 = std::max(1, static_cast<int>(std::ceil(ax - 1e-12)));
    if (n0 <= nmax) m[n0] = std::max(m[n0], col);
  }
  double d = 0.0, run = 0.0, w = 1.0;
  for (int n = 1; n <= nmax; ++n) {
    run = std::max(run, m[n]);
    w *= 0.5;
    d += w * run;
  }
  return d + w * run;
}

}  // namespace rwld
