#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rwld/control.hpp"
#include "rwld/fracspace.hpp"
#include "rwld/swe.hpp"

namespace rwld {

/// S1(t) = ∫|u-v|² dx and S2(t) = ∬|Δ_h(u-v)|² |h|^{2H-2} dh dx, one entry per
/// time node. Both integrals run over the grid window only: S1 by the
/// trapezoid rule, S2 over node pairs inside [-L, L] with the weight
/// integrated exactly over each dual cell of h.
struct UniquenessResidual {
  Vec S1;
  Vec S2;
};

namespace detail {

inline double s1_row(const Eigen::Ref<const Eigen::RowVectorXd>& w, double dx) {
  const long N = w.size();
  double s = 0.0;
  for (long j = 0; j < N; ++j) s += w[j] * w[j] * ((j == 0 || j == N - 1) ? 0.5 : 1.0);
  return dx * s;
}

inline double s2_row(const Eigen::Ref<const Eigen::RowVectorXd>& w, double dx, const std::vector<double>& W) {
  const long N = w.size();
  double s = 0.0;
  for (long k = 1; k < N; ++k) {
    double lag = 0.0;
    for (long j = 0; j + k < N; ++j) {
      const double d = w[j + k] - w[j];
      lag += d * d;
    }
    s += 2.0 * lag * W[k];  // h = ±k dx
  }
  return dx * s;
}

inline std::vector<double> cell_weights(const Grid& g, double H) {
  std::vector<double> W(g.nodes(), 0.0);
  for (int k = 1; k < g.nodes(); ++k) W[k] = cell_weight(k, g.dx(), H);
  return W;
}

}  // namespace detail

inline UniquenessResidual uniqueness_residual(const Field& u, const Field& v, const HurstParam& hp, const Grid& grid) {
  require_same_grid(u.grid, grid, "uniqueness_residual");
  require_same_grid(v.grid, grid, "uniqueness_residual");
  const auto W = detail::cell_weights(grid, hp.H());
  UniquenessResidual r{Vec(grid.nt + 1), Vec(grid.nt + 1)};
  for (int i = 0; i <= grid.nt; ++i) {
    const Eigen::RowVectorXd w = u.values.row(i) - v.values.row(i);
    r.S1[i] = detail::s1_row(w, grid.dx());
    r.S2[i] = detail::s2_row(w, grid.dx(), W);
  }
  return r;
}

/// max over t of (S1+S2)(t) / ∫_0^t ((t-s)^{2H} + (t-s)^{4H-1}) (S1+S2)(s) ds,
/// left-point rule in s. Zero when S1+S2 vanishes identically.
inline double gronwall_ratio(const UniquenessResidual& r, const HurstParam& hp, const Grid& grid) {
  const double H = hp.H();
  double best = 0.0;
  for (int i = 1; i <= grid.nt; ++i) {
    double rhs = 0.0;
    for (int m = 0; m < i; ++m) {
      const double d = grid.t(i) - grid.t(m);
      rhs += grid.dt() * (std::pow(d, 2.0 * H) + std::pow(d, 4.0 * H - 1.0)) * (r.S1[m] + r.S2[m]);
    }
    const double lhs = r.S1[i] + r.S2[i];
    if (rhs > 0.0) best = std::max(best, lhs / rhs);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Picard iteration

struct PicardTrace {
  std::vector<Field> iterates;   // u^1, u^2, ...
  std::vector<double> d;         // sup_t ‖u^{n+1}(t) - u^n(t)‖_{L²}
  std::vector<double> s2;        // sup_t S2(u^{n+1} - u^n)(t)
  bool converged = false;

  int iterations() const { return static_cast<int>(d.size()); }
};

struct PicardError : NumericError {
  PicardTrace trace;
  PicardError(const std::string& m, PicardTrace t) : NumericError(m), trace(std::move(t)) {}
};

struct SkeletonOptions {
  double eps_mollify = 0.0;
  double tol = 1e-8;
  int max_iter = 60;
  bool keep_iterates = true;
  std::optional<Field> initial;  // defaults to I0
};

/// u^{n+1} = I0 + ∫_0^t ⟨G(t-s, x-·) σ(s,·,u^n(s,·)), g(s)⟩_{H_ε} ds from
/// u^0 = I0, until d_n + (sup_t S2)^{1/2} < tol.
inline std::pair<Field, PicardTrace> solve_skeleton(const InitialData& data, const DiffusionCoefficient& sigma,
                                                    const Control& g, const HurstParam& hp, const Grid& grid,
                                                    const SkeletonOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ConfigError("solve_skeleton: tol must be > 0");
  if (opt.max_iter < 1) throw ConfigError("solve_skeleton: max_iter must be >= 1");
  require_same_grid(g.grid, grid, "solve_skeleton");
  const MildSolver S(data, grid);
  const RowMat drift = MildSolver::drift(g, cell_gram(grid, hp, opt.eps_mollify));
  const auto W = detail::cell_weights(grid, hp.H());

  Field u = opt.initial ? *opt.initial : S.I0();
  require_same_grid(u.grid, grid, "solve_skeleton initial guess");
  PicardTrace trace;
  for (int n = 0; n < opt.max_iter; ++n) {
    Field next = S.apply(u, sigma, 0.0, nullptr, &drift);
    double dl2 = 0.0, ds2 = 0.0;
    for (int i = 0; i <= grid.nt; ++i) {
      const Eigen::RowVectorXd w = next.values.row(i) - u.values.row(i);
      dl2 = std::max(dl2, std::sqrt(detail::s1_row(w, grid.dx())));
      ds2 = std::max(ds2, detail::s2_row(w, grid.dx(), W));
    }
    trace.d.push_back(dl2);
    trace.s2.push_back(ds2);
    if (opt.keep_iterates) trace.iterates.push_back(next);
    u = std::move(next);
    if (dl2 + std::sqrt(ds2) < opt.tol) {
      trace.converged = true;
      return {u, std::move(trace)};
    }
  }
  throw PicardError("solve_skeleton: no convergence within " + std::to_string(opt.max_iter) + " iterations",
                    std::move(trace));
}

inline std::pair<Field, PicardTrace> solve_skeleton(const InitialData& data, const DiffusionCoefficient& sigma,
                                                    const Control& g, const HurstParam& hp, const Grid& grid,
                                                    double eps_mollify, double tol, int max_iter) {
  SkeletonOptions o;
  o.eps_mollify = eps_mollify;
  o.tol = tol;
  o.max_iter = max_iter;
  return solve_skeleton(data, sigma, g, hp, grid, o);
}

/// sup norm of u - Φ(u) where Φ is the skeleton map.
inline double skeleton_residual(const Field& u, const InitialData& data, const DiffusionCoefficient& sigma,
                                const Control& g, const HurstParam& hp, double eps_mollify = 0.0) {
  const MildSolver S(data, u.grid);
  const RowMat drift = MildSolver::drift(g, cell_gram(u.grid, hp, eps_mollify));
  return (S.apply(u, sigma, 0.0, nullptr, &drift).values - u.values).cwiseAbs().maxCoeff();
}

/// Ratios d_{n+1}/d_n over the last `tail` iterations before convergence are
/// non-increasing (up to a relative slack), i.e. log d_n bends downward.
inline bool superlinear_tail(const std::vector<double>& d, int tail, double slack = 0.05) {
  std::vector<double> r;
  for (std::size_t n = 0; n + 1 < d.size(); ++n)
    if (d[n] > 0.0 && d[n + 1] > 0.0) r.push_back(d[n + 1] / d[n]);
  if (static_cast<int>(r.size()) < tail) return false;
  for (std::size_t k = r.size() - tail + 1; k < r.size(); ++k)
    if (r[k] > r[k - 1] * (1.0 + slack)) return false;
  return r.back() < r[r.size() - tail];
}

// ---------------------------------------------------------------------------
// probes

struct MollifiedRow {
  double eps = 0.0;
  double dC_to_rough = 0.0;
  double zp = 0.0;
  int iterations = 0;
};

struct MollifiedFamilyReport {
  std::vector<MollifiedRow> rows;
  bool dC_decreasing = true;   // along the given (decreasing) eps list
  double zp_variation = 0.0;   // (max - min) / min over the list
};

inline MollifiedFamilyReport mollified_family_probe(const InitialData& data, const DiffusionCoefficient& sigma,
                                                    const Control& g, const HurstParam& hp, const Grid& grid,
                                                    const std::vector<double>& eps_list, double p = 2.0,
                                                    double tol = 1e-10, int max_iter = 200) {
  MollifiedFamilyReport rep;
  const Field rough = solve_skeleton(data, sigma, g, hp, grid, 0.0, tol, max_iter).first;
  double zmin = INFINITY, zmax = 0.0;
  for (double e : eps_list) {
    auto [u, tr] = solve_skeleton(data, sigma, g, hp, grid, e, tol, max_iter);
    MollifiedRow row{e, dC_metric(u, rough), zp_norm(u, p, hp), tr.iterations()};
    if (!rep.rows.empty() && !(row.dC_to_rough < rep.rows.back().dC_to_rough || row.dC_to_rough == 0.0))
      rep.dC_decreasing = false;
    zmin = std::min(zmin, row.zp);
    zmax = std::max(zmax, row.zp);
    rep.rows.push_back(row);
  }
  rep.zp_variation = zmin > 0.0 ? (zmax - zmin) / zmin : 0.0;
  return rep;
}

struct WeakConvergenceRow {
  int mode = 0;
  double dC = 0.0;
  double energy = 0.0;
};

/// Oscillation ψ(x) sin(nπt/T) sampled at the slab left ends.
inline Control oscillation(const Grid& grid, const std::function<double(double)>& psi, int mode) {
  return Control::sample(grid, [&](double t, double x) {
    return mode == 0 ? 0.0 : psi(x) * std::sin(mode * std::numbers::pi * t / grid.T);
  });
}

/// Default oscillation profile: unit-H-norm bump on |x| < 1.
inline std::function<double(double)> default_oscillation_profile(const Grid& grid, const HurstParam& hp) {
  auto bump = [](double x) { return std::abs(x) < 1.0 ? (1.0 - x * x) * (1.0 - x * x) : 0.0; };
  const GridFunction b = GridFunction::sample(grid, bump);
  const double n = std::sqrt(h_inner_difference(b, b, hp));
  return [bump, n](double x) { return bump(x) / n; };
}

inline std::vector<WeakConvergenceRow> weak_convergence_probe(const Control& g, const std::vector<int>& modes,
                                                              const InitialData& data,
                                                              const DiffusionCoefficient& sigma, const HurstParam& hp,
                                                              const Grid& grid,
                                                              std::function<double(double)> psi = nullptr,
                                                              double tol = 1e-10, int max_iter = 200) {
  if (!psi) psi = default_oscillation_profile(grid, hp);
  const CellGram Q = cell_gram(grid, hp);
  const Field base = solve_skeleton(data, sigma, g, hp, grid, 0.0, tol, max_iter).first;
  std::vector<WeakConvergenceRow> out;
  for (int n : modes) {
    const Control gn = g + oscillation(grid, psi, n);
    const Field un = solve_skeleton(data, sigma, gn, hp, grid, 0.0, tol, max_iter).first;
    out.push_back({n, dC_metric(un, base), gn.energy(Q)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// reference configuration

/// Linear σ(u) = u, bump data of radius 1/2, time-constant bump control with
/// ∫‖g‖²_H dt = 1, H = 0.4, T = 1, L = 2.5, n x n grid.
struct StandardCase {
  HurstParam hp{0.4};
  Grid grid;
  InitialData data;
  DiffusionCoefficient sigma;
  Control g;
};

inline StandardCase standard_case(int n = 64, double H = 0.4) {
  StandardCase c{HurstParam(H), Grid(2.5, n, 1.0, n), bump_data(0.5), sigma_linear(1.0), Control()};
  c.g = Control::with_energy(
      c.grid, c.hp, [](double x) { return std::abs(x) < 1.0 ? (1.0 - x * x) * (1.0 - x * x) : 0.0; }, 0.5);
  return c;
}

}  // namespace rwld
