#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rwld/control.hpp"
#include "rwld/fracspace.hpp"
#include "rwld/grid.hpp"
#include "rwld/noise.hpp"

namespace rwld {

/// σ(t, x, u) with the derivative bounds of the coefficient hypothesis.
struct DiffusionCoefficient {
  std::string name;
  std::function<double(double, double, double)> eval;
  std::function<double(double, double, double)> du;
  std::function<double(double, double, double)> dxu;
  double lipschitz_const = 0.0;

  double operator()(double t, double x, double u) const { return eval(t, x, u); }
};

inline DiffusionCoefficient sigma_linear(double c = 1.0) {
  return {"linear",
          [c](double, double, double u) { return c * u; },
          [c](double, double, double) { return c; },
          [](double, double, double) { return 0.0; },
          std::abs(c)};
}

/// σ(u) = c u / (1 + u²); |σ'| <= |c|.
inline DiffusionCoefficient sigma_damped(double c = 1.0) {
  return {"damped",
          [c](double, double, double u) { return c * u / (1.0 + u * u); },
          [c](double, double, double u) {
            const double d = 1.0 + u * u;
            return c * (1.0 - u * u) / (d * d);
          },
          [](double, double, double) { return 0.0; },
          std::abs(c)};
}

struct HypothesisReport {
  bool ok = true;
  double max_sigma_at_zero = 0.0;
  double max_du = 0.0;
  double max_dxu = 0.0;
  double max_lipschitz_quotient = 0.0;
  std::string lattice;
};

/// Sampled check of σ(t,x,0) = 0, |∂_u σ| <= C, |∂²_{xu} σ| <= C and the
/// Lipschitz bound on a 9 x 9 x 21 lattice of (t, x, u) with u in [-u_max, u_max].
inline HypothesisReport check_hypothesis(const DiffusionCoefficient& s, const Grid& g, double u_max = 5.0) {
  HypothesisReport r;
  r.lattice = "t: 9 points on [0,T]; x: 9 points on [-L,L]; u: 21 points on [-" + std::to_string(u_max) + "," +
              std::to_string(u_max) + "]";
  const double C = s.lipschitz_const;
  for (int a = 0; a < 9; ++a)
    for (int b = 0; b < 9; ++b) {
      const double t = g.T * a / 8.0, x = -g.L + 2.0 * g.L * b / 8.0;
      r.max_sigma_at_zero = std::max(r.max_sigma_at_zero, std::abs(s(t, x, 0.0)));
      for (int c = 0; c < 21; ++c) {
        const double u = -u_max + 2.0 * u_max * c / 20.0;
        r.max_du = std::max(r.max_du, std::abs(s.du(t, x, u)));
        r.max_dxu = std::max(r.max_dxu, std::abs(s.dxu(t, x, u)));
        for (int d = 0; d < c; ++d) {
          const double v = -u_max + 2.0 * u_max * d / 20.0;
          r.max_lipschitz_quotient = std::max(r.max_lipschitz_quotient, std::abs(s(t, x, u) - s(t, x, v)) / (u - v));
        }
      }
    }
  const double tol = 1e-12 * std::max(1.0, C);
  r.ok = r.max_sigma_at_zero == 0.0 && r.max_du <= C + tol && r.max_dxu <= C + tol && r.max_lipschitz_quotient <= C + tol;
  return r;
}

struct InitialData {
  std::function<double(double)> u0;
  std::function<double(double)> v0;
  double holder_alpha = 1.0;
  double support_radius = 0.0;
};

inline InitialData zero_data() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }, 1.0, 0.0};
}

/// u0 = amp (1 - (x/a)²)² on |x| < a, v0 = 0.
inline InitialData bump_data(double a = 0.5, double amp = 1.0) {
  return {[a, amp](double x) {
            const double s = x / a;
            return std::abs(s) < 1.0 ? amp * (1.0 - s * s) * (1.0 - s * s) : 0.0;
          },
          [](double) { return 0.0; }, 1.0, a};
}

/// Largest sampled Hölder quotient of f with exponent alpha over node pairs.
inline double holder_quotient(const std::function<double(double)>& f, const Grid& g, double alpha) {
  double q = 0.0;
  for (int j = 0; j < g.nodes(); ++j)
    for (int k = j + 1; k < g.nodes(); ++k)
      q = std::max(q, std::abs(f(g.x(k)) - f(g.x(j))) / std::pow(g.x(k) - g.x(j), alpha));
  return q;
}

/// d'Alembert term ½[u0(x+t) + u0(x-t)] + ½∫_{x-t}^{x+t} v0, endpoints exact,
/// v0 integral by the trapezoid rule with steps of at most dx/4.
inline Field initial_term_I0(const InitialData& data, const Grid& g) {
  Field I(g);
  for (int i = 0; i <= g.nt; ++i) {
    const double t = g.t(i);
    const int n = std::max(1, static_cast<int>(std::ceil(8.0 * t / g.dx())));
    const double h = 2.0 * t / n;
    for (int j = 0; j < g.nodes(); ++j) {
      const double x = g.x(j);
      double v = 0.0;
      if (t > 0.0) {
        v = 0.5 * (data.v0(x - t) + data.v0(x + t));
        for (int k = 1; k < n; ++k) v += data.v0(x - t + k * h);
        v *= h;
      }
      I.values(i, j) = 0.5 * (data.u0(x + t) + data.u0(x - t)) + 0.5 * v;
    }
  }
  I.check();
  return I;
}

inline constexpr const char* kSchemeName =
    "left-point Walsh sum, dual-cell averaged wave kernel, full re-summation per output time";

struct SolveResult {
  Field u;
  std::string scheme = kSchemeName;
  double eps = 0.0;
  std::optional<std::uint64_t> seed;
};

/// Dual-cell average of G(q dt, ·) around each node: for q slabs back the
/// cone (x_j - q dt, x_j + q dt) covers the cells |k-j| <= full(q) entirely
/// and the cells in partial(q) by the stated fraction.
class ConeWeights {
 public:
  struct Partial {
    int d;
    double frac;
  };

  explicit ConeWeights(const Grid& g) : full_(g.nt + 1, -1), partial_(g.nt + 1) {
    const double dx = g.dx();
    for (int q = 1; q <= g.nt; ++q) {
      const double r = q * g.dt() / dx;  // cone half-width in cells
      for (int d = 0; d <= g.nodes(); ++d) {
        const double f = d == 0 ? std::min(2.0 * r, 1.0) : std::clamp(r - (d - 0.5), 0.0, 1.0);
        if (f <= 0.0) break;
        if (f >= 1.0 && full_[q] == d - 1)
          full_[q] = d;
        else
          partial_[q].push_back({d, f});
      }
    }
  }

  int full(int q) const { return full_[q]; }
  const std::vector<Partial>& partial(int q) const { return partial_[q]; }

 private:
  std::vector<int> full_;
  std::vector<std::vector<Partial>> partial_;
};

/// Mild-form solver on a fixed grid. One instance serves the stochastic, the
/// controlled and the skeleton equations so that all of them evaluate the
/// same sums in the same order.
class MildSolver {
 public:
  MildSolver(const InitialData& data, const Grid& g)
      : grid_(g), cone_(g), I0_(initial_term_I0(data, g)), radius_(data.support_radius) {
    g.require_contains(data.support_radius);
  }

  const Grid& grid() const { return grid_; }
  const Field& I0() const { return I0_; }

  /// dt Q g_m for each slab: the drift increment of the control.
  static RowMat drift(const Control& g, const CellGram& Q) {
    RowMat d = g.g * Q.Q;  // Q symmetric
    d *= g.grid.dt();
    return d;
  }

  /// Explicit march: u_{i+1} from slabs 0..i. dW and drift may be null.
  Field march(const DiffusionCoefficient& sigma, double eps, const RowMat* dW, const RowMat* drift) const {
    const int nt = grid_.nt, N = grid_.nodes();
    check_inputs(eps, dW, drift);
    Field u(grid_);
    u.values.row(0) = I0_.values.row(0);
    RowMat prefix(nt, N + 1);
    const double se = std::sqrt(eps);
    for (int m = 0; m < nt; ++m) {
      increments_row(u.values.row(m), m, sigma, se, dW, drift, prefix);
      fill_row(u, m + 1, prefix);
    }
    return u;
  }

  /// One application of the mild map with σ evaluated on a given field.
  Field apply(const Field& v, const DiffusionCoefficient& sigma, double eps, const RowMat* dW,
              const RowMat* drift) const {
    const int nt = grid_.nt, N = grid_.nodes();
    check_inputs(eps, dW, drift);
    Field u(grid_);
    u.values.row(0) = I0_.values.row(0);
    RowMat prefix(nt, N + 1);
    const double se = std::sqrt(eps);
    for (int m = 0; m < nt; ++m) increments_row(v.values.row(m), m, sigma, se, dW, drift, prefix);
    for (int i = 1; i <= nt; ++i) fill_row(u, i, prefix);
    return u;
  }

 private:
  void check_inputs(double eps, const RowMat* dW, const RowMat* drift) const {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("solver: eps must be >= 0");
    if (dW && (dW->rows() != grid_.nt || dW->cols() != grid_.nodes()))
      throw ConfigError("solver: noise field shape does not match the grid");
    if (drift && (drift->rows() != grid_.nt || drift->cols() != grid_.nodes()))
      throw ConfigError("solver: control shape does not match the grid");
  }

  // prefix.row(m)[k] = Σ_{k' < k} a_m(k'), a_m(k) = σ(t_m, x_k, u_m(k)) (√ε dW + dt Q g).
  // Nodes with |x_k| >= a + t_m lie outside the exact solution's support and
  // contribute nothing; without this the half-cell reconstruction at the
  // front would creep outward by dx/2 per hop.
  void increments_row(const Eigen::Ref<const Eigen::RowVectorXd>& um, int m, const DiffusionCoefficient& sigma,
                      double se, const RowMat* dW, const RowMat* drift, RowMat& prefix) const {
    const int N = grid_.nodes();
    const double t = grid_.t(m);
    const double reach = radius_ + t;
    double run = 0.0;
    prefix(m, 0) = 0.0;
    for (int k = 0; k < N; ++k) {
      if (!(std::abs(grid_.x(k)) < reach)) {
        prefix(m, k + 1) = run;
        continue;
      }
      double inc = 0.0;
      if (dW && se != 0.0) inc += se * (*dW)(m, k);
      if (drift) inc += (*drift)(m, k);
      const double a = inc == 0.0 ? 0.0 : sigma(t, grid_.x(k), um[k]) * inc;
      run += a;
      prefix(m, k + 1) = run;
    }
  }

  void fill_row(Field& u, int i, const RowMat& prefix) const {
    const int N = grid_.nodes();
    for (int j = 0; j < N; ++j) {
      double s = 0.0;
      for (int m = 0; m < i; ++m) {
        const int q = i - m;
        const int D = cone_.full(q);
        double c = 0.0;
        if (D >= 0) {
          const int lo = std::max(0, j - D), hi = std::min(N - 1, j + D);
          c = prefix(m, hi + 1) - prefix(m, lo);
        }
        auto cell = [&](int k) { return prefix(m, k + 1) - prefix(m, k); };
        for (const auto& p : cone_.partial(q)) {
          if (p.d == 0) {
            c += p.frac * cell(j);
            continue;
          }
          if (j + p.d < N) c += p.frac * cell(j + p.d);
          if (j - p.d >= 0) c += p.frac * cell(j - p.d);
        }
        s += c;
      }
      const double val = I0_.values(i, j) + 0.5 * s;
      if (!std::isfinite(val))
        throw NumericError("solver: non-finite value at time index " + std::to_string(i) + ", node " +
                           std::to_string(j));
      u.values(i, j) = val;
    }
  }

  Grid grid_;
  ConeWeights cone_;
  Field I0_;
  double radius_;
};

inline void require_noise_grid(const NoiseField& dW, const Grid& g) {
  if (!(dW.grid == g)) throw ConfigError("solver: noise field was sampled on a different grid");
}

/// u = I0 + √ε Σ G σ(u) dW (explicit left-point scheme).
inline SolveResult solve_swe(const InitialData& data, const DiffusionCoefficient& sigma, double eps,
                             const NoiseField& dW, const Grid& grid, const HurstParam& /*hp*/) {
  require_noise_grid(dW, grid);
  const MildSolver S(data, grid);
  return {S.march(sigma, eps, &dW.dW, nullptr), kSchemeName, eps, std::nullopt};
}

/// Controlled equation: solve_swe plus the drift Σ_m dt ⟨G σ(u), g_m⟩_H.
inline SolveResult solve_controlled(const InitialData& data, const DiffusionCoefficient& sigma, double eps,
                                    const NoiseField& dW, const Control& g, const Grid& grid, const HurstParam& hp) {
  require_noise_grid(dW, grid);
  require_same_grid(g.grid, grid, "solve_controlled");
  const MildSolver S(data, grid);
  const RowMat d = MildSolver::drift(g, cell_gram(grid, hp));
  return {S.march(sigma, eps, &dW.dW, &d), kSchemeName, eps, std::nullopt};
}

// ---------------------------------------------------------------------------
// regularity probe

struct HolderReport {
  double gamma = 0.0;
  double max_quotient_t = 0.0;
  double max_quotient_x = 0.0;
  double exponent_t = 0.0;  // NaN when every increment vanishes
  double exponent_x = 0.0;
  std::vector<double> sep_t, inc_t, sep_x, inc_x;
};

namespace detail {

inline double loglog_slope(const std::vector<double>& s, const std::vector<double>& v) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(v[i] > 0.0)) continue;
    const double x = std::log(s[i]), y = std::log(v[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

/// Largest increments of u over dyadic separations in t and in x, the
/// largest quotients |Δu| / δ^γ, and the least-squares log-log exponents.
inline HolderReport holder_probe(const Field& u, double gamma) {
  if (!(gamma > 0.0 && gamma < 0.5)) throw ConfigError("holder_probe: gamma must lie in (0, 1/2)");
  const Grid& g = u.grid;
  HolderReport r;
  r.gamma = gamma;
  for (int s = 1; s <= g.nt / 2; s *= 2) {
    double m = 0.0;
    for (int i = 0; i + s <= g.nt; ++i)
      m = std::max(m, (u.values.row(i + s) - u.values.row(i)).cwiseAbs().maxCoeff());
    const double d = s * g.dt();
    r.sep_t.push_back(d);
    r.inc_t.push_back(m);
    r.max_quotient_t = std::max(r.max_quotient_t, m / std::pow(d, gamma));
  }
  for (int s = 1; s <= g.nx / 2; s *= 2) {
    double m = 0.0;
    for (int j = 0; j + s < g.nodes(); ++j)
      m = std::max(m, (u.values.col(j + s) - u.values.col(j)).cwiseAbs().maxCoeff());
    const double d = s * g.dx();
    r.sep_x.push_back(d);
    r.inc_x.push_back(m);
    r.max_quotient_x = std::max(r.max_quotient_x, m / std::pow(d, gamma));
  }
  r.exponent_t = detail::loglog_slope(r.sep_t, r.inc_t);
  r.exponent_x = detail::loglog_slope(r.sep_x, r.inc_x);
  return r;
}

}  // namespace rwld
