#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "rwld/control.hpp"
#include "rwld/noise.hpp"
#include "rwld/parallel.hpp"
#include "rwld/skeleton.hpp"
#include "rwld/swe.hpp"

namespace rwld {

enum class EventKind { terminal_point_level, sup_level };

/// terminal_point_level: u(T, x_star) >= level.
/// sup_level: max over `nodes` of u(T, ·) >= level (all nodes when empty).
struct EventSpec {
  EventKind kind = EventKind::terminal_point_level;
  double x_star = 0.0;
  double level = 0.0;
  std::vector<int> nodes;
};

inline std::string to_string(EventKind k) {
  return k == EventKind::terminal_point_level ? "terminal_point_level" : "sup_level";
}

inline int node_index(const Grid& g, double x) {
  const double f = (x + g.L) / g.dx();
  const long j = std::lround(f);
  if (j < 0 || j > g.nx || std::abs(f - j) > 1e-9) throw ConfigError("event: x_star must be a grid node");
  return static_cast<int>(j);
}

/// Event functional value (the quantity compared with the level).
inline double event_value(const EventSpec& e, const Field& u) {
  const Grid& g = u.grid;
  if (!std::isfinite(e.level)) throw ConfigError("event: level must be finite");
  if (e.kind == EventKind::terminal_point_level) return u.values(g.nt, node_index(g, e.x_star));
  if (e.nodes.empty()) return u.values.row(g.nt).maxCoeff();
  double m = -std::numeric_limits<double>::infinity();
  for (int j : e.nodes) {
    if (j < 0 || j > g.nx) throw ConfigError("event: node index out of range");
    m = std::max(m, u.values(g.nt, j));
  }
  return m;
}

// ---------------------------------------------------------------------------
// rate function by constrained energy minimisation

struct RateOptions {
  int nc_t = 8;      // time blocks
  int nc_x = 8;      // spatial hat functions
  double mu0 = 10.0; // first penalty weight, multiplied by 4 per stage
  int stages = 10;
  int max_iter = 100;  // descent steps per stage
  double constraint_tol = 1e-3;
  double fd_step = 1e-6;
  int jobs = 1;
};

struct RateTraceRow {
  int stage = 0;
  double mu = 0.0;
  int iterations = 0;
  double energy = 0.0;
  double violation = 0.0;
};

struct RateResult {
  Control g_star;
  double energy = 0.0;
  double constraint_residual = 0.0;
  double event_value = 0.0;
  bool feasible = false;
  std::vector<RateTraceRow> trace;
  Vec coefficients;
};

/// Coarse control ansatz: nc_t piecewise-constant time blocks times nc_x hat
/// functions spread over the backward light cone of the event nodes.
class ControlAnsatz {
 public:
  ControlAnsatz(const Grid& g, int nc_t, int nc_x, double x_lo, double x_hi) : grid_(g), nc_t_(nc_t), nc_x_(nc_x) {
    if (nc_t < 1 || nc_x < 2 || nc_t > 12 || nc_x > 12) throw ConfigError("rate: ansatz must satisfy 1<=nc_t<=12, 2<=nc_x<=12");
    block_.resize(g.nt);
    for (int i = 0; i < g.nt; ++i) block_[i] = std::min(nc_t - 1, i * nc_t / g.nt);
    x_lo = std::max(x_lo, -g.L);
    x_hi = std::min(x_hi, g.L);
    const double h = (x_hi - x_lo) / (nc_x - 1);
    hats_ = RowMat::Zero(nc_x, g.nodes());
    for (int b = 0; b < nc_x; ++b)
      for (int j = 0; j < g.nodes(); ++j) hats_(b, j) = std::max(0.0, 1.0 - std::abs(g.x(j) - (x_lo + b * h)) / h);
  }

  int size() const { return nc_t_ * nc_x_; }

  Control prolong(const Vec& c) const {
    Control u(grid_);
    for (int i = 0; i < grid_.nt; ++i)
      for (int b = 0; b < nc_x_; ++b) u.g.row(i) += c[block_[i] * nc_x_ + b] * hats_.row(b);
    return u;
  }

  /// Energy matrix: ½ cᵀ M c = energy(prolong(c)).
  Eigen::MatrixXd energy_matrix(const CellGram& Q) const {
    const Eigen::MatrixXd S = hats_ * Q.Q * hats_.transpose();
    std::vector<int> count(nc_t_, 0);
    for (int b : block_) ++count[b];
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(size(), size());
    for (int a = 0; a < nc_t_; ++a) M.block(a * nc_x_, a * nc_x_, nc_x_, nc_x_) = count[a] * grid_.dt() * S;
    return M;
  }

 private:
  Grid grid_;
  int nc_t_, nc_x_;
  std::vector<int> block_;
  RowMat hats_;
};

/// Upper bound on inf {½∫‖g‖²_H : u^g meets the event} over the coarse
/// ansatz: exterior penalty ½cᵀMc + ½μ max(0, a - F(c))² with μ = μ0 4^k,
/// each stage minimised by descent along the Gauss-Newton metric
/// M + μ ∇F∇Fᵀ (∇F by forward differences, Armijo backtracking), followed by a
/// radial feasibility restoration of the best iterate.
inline RateResult rate_minimize(const EventSpec& event, const InitialData& data, const DiffusionCoefficient& sigma,
                                const HurstParam& hp, const Grid& grid, const RateOptions& opt = {}) {
  const MildSolver S(data, grid);
  const CellGram Q = cell_gram(grid, hp);
  const double a = event.level;
  RateResult res;
  res.g_star = Control(grid);

  auto state = [&](const Control& g) {
    const RowMat d = MildSolver::drift(g, Q);
    return event_value(event, S.march(sigma, 0.0, nullptr, &d));
  };
  const double F0 = state(Control(grid));
  if (F0 >= a) {
    res.feasible = true;
    res.event_value = F0;
    res.coefficients = Vec::Zero(opt.nc_t * opt.nc_x);
    return res;
  }

  double lo = 0.0, hi = 0.0;
  if (event.kind == EventKind::terminal_point_level) {
    lo = hi = event.x_star;
  } else if (event.nodes.empty()) {
    lo = -grid.L;
    hi = grid.L;
  } else {
    lo = grid.L;
    hi = -grid.L;
    for (int j : event.nodes) {
      lo = std::min(lo, grid.x(j));
      hi = std::max(hi, grid.x(j));
    }
  }
  const ControlAnsatz P(grid, opt.nc_t, opt.nc_x, lo - grid.T - grid.dx(), hi + grid.T + grid.dx());
  const int K = P.size();
  const Eigen::MatrixXd M = P.energy_matrix(Q);
  const Eigen::LLT<Eigen::MatrixXd> Mllt(M + 1e-12 * M.trace() / K * Eigen::MatrixXd::Identity(K, K));

  auto F = [&](const Vec& c) { return state(P.prolong(c)); };
  auto gradF = [&](const Vec& c, double Fc) {
    Vec g(K);
    parallel_for(K, opt.jobs, [&](std::int64_t k) {
      Vec cp = c;
      const double h = opt.fd_step * std::max(1.0, std::abs(c[k]));
      cp[k] += h;
      g[k] = (F(cp) - Fc) / h;
    });
    return g;
  };

  // start along the steepest ascent of F in the energy metric
  Vec c = Vec::Zero(K);
  {
    const Vec g0 = gradF(c, F0);
    const Vec dir = Mllt.solve(g0);
    const double gd = g0.dot(dir);
    if (gd > 0.0) c = (a - F0) / gd * dir;
  }

  Vec best;
  double best_energy = std::numeric_limits<double>::infinity();
  double mu = opt.mu0;
  for (int k = 0; k < opt.stages; ++k, mu *= 4.0) {
    double Fc = F(c);
    auto J = [&](const Vec& v, double Fv) {
      const double viol = std::max(0.0, a - Fv);
      return 0.5 * v.dot(M * v) + 0.5 * mu * viol * viol;
    };
    double Jc = J(c, Fc);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
      const double viol = std::max(0.0, a - Fc);
      const Vec gF = gradF(c, Fc);
      const Vec grad = M * c - mu * viol * gF;
      // (M + μ gF gFᵀ)^{-1} grad by Sherman-Morrison
      const Vec Mi_grad = Mllt.solve(grad);
      const Vec Mi_gF = Mllt.solve(gF);
      const double denom = 1.0 + mu * gF.dot(Mi_gF);
      const Vec dir = -(Mi_grad - (mu * gF.dot(Mi_grad) / denom) * Mi_gF);
      const double slope = grad.dot(dir);
      if (!(slope < 0.0)) break;
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
        const Vec trial = c + step * dir;
        const double Ft = F(trial);
        const double Jt = J(trial, Ft);
        if (Jt <= Jc + 1e-4 * step * slope) {
          c = trial;
          Fc = Ft;
          moved = Jc - Jt > 1e-14 * std::max(1.0, Jc);
          Jc = Jt;
          break;
        }
      }
      if (!moved) break;
    }
    const double energy = 0.5 * c.dot(M * c);
    const double viol = std::max(0.0, a - Fc);
    res.trace.push_back({k, mu, it, energy, viol});
    if (viol <= opt.constraint_tol && energy < best_energy) {
      best = c;
      best_energy = energy;
    }
    if (viol <= 0.1 * opt.constraint_tol) break;
  }
  if (best.size() == 0) best = c;

  // radial restoration: smallest s >= 1 with F(s c) >= a (bisection)
  double Fb = F(best);
  if (Fb < a) {
    double s_lo = 1.0, s_hi = 1.0, F_hi = Fb;
    for (int i = 0; i < 40 && F_hi < a; ++i) {
      s_hi *= 1.05;
      F_hi = F(s_hi * best);
    }
    if (F_hi >= a) {
      for (int i = 0; i < 60; ++i) {
        const double s = 0.5 * (s_lo + s_hi);
        (F(s * best) >= a ? s_hi : s_lo) = s;
      }
      best *= s_hi;
      Fb = F(best);
    }
  }
  res.coefficients = best;
  res.g_star = P.prolong(best);
  res.event_value = Fb;
  res.constraint_residual = std::max(0.0, a - Fb);
  res.feasible = res.constraint_residual <= opt.constraint_tol;
  res.energy = res.feasible ? res.g_star.energy(Q) : std::numeric_limits<double>::infinity();
  return res;
}

// ---------------------------------------------------------------------------
// Monte Carlo tail estimates

struct TailRow {
  double eps = 0.0;
  long n = 0;
  long hits = 0;
  double p_hat = 0.0;
  double se = 0.0;
  double r_hat = 0.0;
  bool zero_hits = false;
};

struct TailEstimate {
  std::vector<TailRow> rows;
};

namespace detail {

inline void check_ladder(const std::vector<double>& eps) {
  if (eps.empty()) throw ConfigError("ladder: empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] >= 0.0)) throw ConfigError("ladder: eps must be >= 0");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("ladder: eps must be strictly decreasing");
  }
}

}  // namespace detail

/// Event functional of u^ε for every replicate (rows) and every ε (columns).
/// Replicate r uses the noise stream (seed, r) at every ε.
inline RowMat mc_event_values(const EventSpec& event, const InitialData& data, const DiffusionCoefficient& sigma,
                              const HurstParam& hp, const Grid& grid, const std::vector<double>& eps_ladder,
                              long n_samples, std::uint64_t seed,
                              NoiseMethod method = NoiseMethod::exact_cholesky, int jobs = 1) {
  const MildSolver S(data, grid);
  const NoiseSampler sampler(hp, grid, method);
  RowMat v(n_samples, eps_ladder.size());
  parallel_for(n_samples, jobs, [&](std::int64_t r) {
    RowMat dW;
    sampler.sample_into(dW, seed, static_cast<std::uint64_t>(r));
    for (std::size_t e = 0; e < eps_ladder.size(); ++e)
      v(r, e) = event_value(event, S.march(sigma, eps_ladder[e], &dW, nullptr));
  });
  return v;
}

/// Tail estimate from event values. r_hat = -ε log p; cells without hits use
/// (hits + ½)/(n + 1) in place of p and are flagged.
inline TailEstimate tail_from_values(const RowMat& v, const std::vector<double>& eps_ladder, double level) {
  TailEstimate t;
  const long n = v.rows();
  for (std::size_t e = 0; e < eps_ladder.size(); ++e) {
    TailRow r;
    r.eps = eps_ladder[e];
    r.n = n;
    for (long i = 0; i < n; ++i) r.hits += v(i, e) >= level ? 1 : 0;
    r.p_hat = static_cast<double>(r.hits) / n;
    r.se = std::sqrt(r.p_hat * (1.0 - r.p_hat) / n);
    r.zero_hits = r.hits == 0;
    const double p = r.zero_hits ? (r.hits + 0.5) / (n + 1.0) : r.p_hat;
    r.r_hat = r.p_hat == 1.0 ? 0.0 : -r.eps * std::log(p);
    t.rows.push_back(r);
  }
  return t;
}

inline TailEstimate mc_tail(const EventSpec& event, const InitialData& data, const DiffusionCoefficient& sigma,
                            const HurstParam& hp, const Grid& grid, const std::vector<double>& eps_ladder,
                            long n_samples, std::uint64_t seed, NoiseMethod method = NoiseMethod::exact_cholesky,
                            int jobs = 1) {
  detail::check_ladder(eps_ladder);
  if (n_samples < 1000) throw ConfigError("mc_tail: n_samples must be at least 1000");
  const RowMat v = mc_event_values(event, data, sigma, hp, grid, eps_ladder, n_samples, seed, method, jobs);
  return tail_from_values(v, eps_ladder, event.level);
}

// ---------------------------------------------------------------------------
// controlled-versus-skeleton discrepancy

struct ConditionBRow {
  double eps = 0.0;
  long n = 0;
  std::vector<double> deltas;
  std::vector<double> prob;   // P(d_C > δ) per δ
  double mean_dC = 0.0;
  long seminorm_exceed = 0;   // replicates whose sup_t 𝒩* exceeds the threshold
};

struct ConditionBReport {
  std::vector<ConditionBRow> rows;
  double seminorm_threshold = 0.0;
};

/// For each ε: Monte Carlo over dW of d_C(controlled solution with g^ε,
/// skeleton with g^ε). Replicate r uses the noise stream (seed, r) at every ε.
/// The seminorm count is a diagnostic only: replicates with sup_t 𝒩*(ũ^ε(t))
/// above `threshold_factor` times the skeleton value.
inline ConditionBReport condition_b_probe(const std::vector<Control>& g_family, const std::vector<double>& eps_ladder,
                                          const InitialData& data, const DiffusionCoefficient& sigma,
                                          const HurstParam& hp, const Grid& grid, long n_samples, double N,
                                          std::uint64_t seed, std::vector<double> deltas = {0.1, 0.05, 0.01},
                                          NoiseMethod method = NoiseMethod::exact_cholesky, int jobs = 1,
                                          double threshold_factor = 2.0) {
  if (g_family.size() != eps_ladder.size()) throw ConfigError("condition_b_probe: one control per eps required");
  if (n_samples < 1) throw ConfigError("condition_b_probe: n_samples must be positive");
  const CellGram Q = cell_gram(grid, hp);
  for (const auto& g : g_family) {
    require_same_grid(g.grid, grid, "condition_b_probe");
    if (g.energy(Q) > 0.5 * N * (1.0 + 1e-12)) throw ConfigError("condition_b_probe: control outside S^N");
  }
  const MildSolver S(data, grid);
  const NoiseSampler sampler(hp, grid, method);
  auto sup_nstar = [&](const Field& u) {
    double m = 0.0;
    for (int i = 0; i <= grid.nt; ++i) m = std::max(m, frac_seminorm_N_aggregated(u.slice(i), hp));
    return m;
  };

  ConditionBReport rep;
  std::vector<Field> skel;
  std::vector<RowMat> drift;
  double thr = 0.0;
  for (const auto& g : g_family) {
    skel.push_back(solve_skeleton(data, sigma, g, hp, grid, 0.0, 1e-12, 200).first);
    drift.push_back(MildSolver::drift(g, Q));
    thr = std::max(thr, sup_nstar(skel.back()));
  }
  rep.seminorm_threshold = threshold_factor * thr;

  const std::size_t ne = eps_ladder.size();
  RowMat d(n_samples, ne), ex(n_samples, ne);
  parallel_for(n_samples, jobs, [&](std::int64_t r) {
    RowMat dW;
    sampler.sample_into(dW, seed, static_cast<std::uint64_t>(r));
    for (std::size_t e = 0; e < ne; ++e) {
      const Field u = S.march(sigma, eps_ladder[e], &dW, &drift[e]);
      d(r, e) = dC_metric(u, skel[e]);
      ex(r, e) = sup_nstar(u) > rep.seminorm_threshold ? 1.0 : 0.0;
    }
  });
  for (std::size_t e = 0; e < ne; ++e) {
    ConditionBRow row;
    row.eps = eps_ladder[e];
    row.n = n_samples;
    row.deltas = deltas;
    for (double delta : deltas) {
      long c = 0;
      for (long r = 0; r < n_samples; ++r) c += d(r, e) > delta ? 1 : 0;
      row.prob.push_back(static_cast<double>(c) / n_samples);
    }
    row.mean_dC = d.col(e).mean();
    row.seminorm_exceed = static_cast<long>(ex.col(e).sum());
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace rwld
