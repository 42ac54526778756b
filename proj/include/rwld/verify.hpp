#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "rwld/fracspace.hpp"
#include "rwld/kernels.hpp"
#include "rwld/ldp.hpp"
#include "rwld/noise.hpp"
#include "rwld/parallel.hpp"
#include "rwld/quadrature.hpp"
#include "rwld/skeleton.hpp"
#include "rwld/swe.hpp"

namespace rwld::verify {

struct CheckRow {
  int id = 0;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool skipped = false;
  double seconds = 0.0;
  std::string detail;
};

/// quick: reduced Monte Carlo sizes and the LDP trend check skipped.
struct Options {
  bool quick = false;
  int jobs = 1;
  std::uint64_t seed = 20240611;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

template <class F>
CheckRow timed(int id, std::string name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckRow r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r.pass = false;
    r.measured = std::numeric_limits<double>::quiet_NaN();
    r.detail = std::string("exception: ") + e.what();
  }
  r.id = id;
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// grid with 0 and every multiple of 0.05 on a cell edge
inline Grid edge_grid() { return Grid(3.025, 121, 1.0, 40); }

}  // namespace detail

// 1 ---------------------------------------------------------------------------
inline CheckRow check_fbm_norm(const Options&) {
  return detail::timed(1, "fbm-norm law", [] {
    const Grid g = detail::edge_grid();
    double e_four = 0.0, e_diff = 0.0;
    for (double H : {0.3, 0.4}) {
      const HurstParam hp(H);
      for (double x : {0.5, 1.0, 2.0}) {
        const GridFunction f = GridFunction::indicator(g, 0.0, x);
        const double exact = std::pow(x, 2.0 * H);
        const double four = h_inner_fourier(f, f, hp);
        const double diff = h_inner_difference(f, f, hp);
        e_four = std::max(e_four, std::abs(four - exact) / exact);
        e_diff = std::max(e_diff, std::abs(diff - four) / four);
      }
    }
    CheckRow r;
    r.measured = e_four;
    r.tolerance = 0.01;
    r.pass = e_four <= 0.01 && e_diff <= 0.02;
    r.detail = "max rel err fourier " + detail::fmt(e_four) + ", difference vs fourier " + detail::fmt(e_diff) +
               " (tol 0.02)";
    return r;
  });
}

// 2 ---------------------------------------------------------------------------
inline CheckRow check_noise_covariance(const Options& o) {
  return detail::timed(2, "noise covariance", [&] {
    const HurstParam hp(0.3);
    const Grid g(2.0, 63, 1.0, 64);  // 64 cells
    const NoiseSampler s(hp, g, NoiseMethod::exact_cholesky);
    const long rows = o.quick ? 20000 : 100000;
    const int N = g.nodes();
    const long reps = (rows + g.nt - 1) / g.nt;
    std::vector<Eigen::MatrixXd> acc(static_cast<std::size_t>(reps));
    parallel_for(reps, o.jobs, [&](std::int64_t r) {
      RowMat dW;
      s.sample_into(dW, o.seed, static_cast<std::uint64_t>(r));
      const long take = std::min<long>(g.nt, rows - r * g.nt);
      acc[r] = dW.topRows(take).transpose() * dW.topRows(take);
    });
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N, N);
    for (const auto& a : acc) C += a;
    C /= static_cast<double>(rows);
    const Eigen::MatrixXd E = g.dt() * s.covariance().Q;
    double worst = 0.0;
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) {
        const double se = std::sqrt((E(j, j) * E(k, k) + E(j, k) * E(j, k)) / rows);
        worst = std::max(worst, std::abs(C(j, k) - E(j, k)) / se);
      }
    bool neg = true;
    for (int j = 0; j + 1 < N; ++j) neg = neg && E(j, j + 1) < 0.0;
    CheckRow r;
    r.measured = worst;
    r.tolerance = 4.0;
    r.pass = worst <= 4.0 && neg;
    r.detail = std::to_string(rows) + " rows, max |emp - dtQ| / SE = " + detail::fmt(worst) +
               ", adjacent entries negative: " + (neg ? "yes" : "no");
    return r;
  });
}

// 3 ---------------------------------------------------------------------------
inline CheckRow check_isometry(const Options& o) {
  return detail::timed(3, "walsh isometry", [&] {
    const HurstParam hp(0.3);
    const Grid g(2.0, 31, 1.0, 16);
    const long n = o.quick ? 20000 : 100000;
    auto elem = [&](double t0, double t1, double a, double b) {
      RowMat f = RowMat::Zero(g.nt, g.nodes());
      const GridFunction ind = GridFunction::indicator(g, a, b);
      for (int i = 0; i < g.nt; ++i)
        if (g.t(i) >= t0 - 1e-12 && g.t(i) < t1 - 1e-12) f.row(i) = ind.values.transpose();
      return f;
    };
    std::vector<RowMat> fs{elem(0.0, 1.0, 0.0, 1.0), elem(0.0, 0.5, -1.0, 0.0), elem(0.25, 0.75, -0.5, 1.5),
                           elem(0.0, 0.5, 0.0, 0.5) + 2.0 * elem(0.5, 1.0, -1.0, 1.0),
                           -1.5 * elem(0.125, 0.625, 0.5, 0.75)};
    // expected second moment through the difference form of the inner product
    std::vector<double> expect;
    for (const auto& f : fs) {
      double s = 0.0;
      for (int i = 0; i < g.nt; ++i) {
        const GridFunction fi(g, Vec(f.row(i).transpose()));
        s += g.dt() * h_inner_difference(fi, fi, hp);
      }
      expect.push_back(s);
    }
    const NoiseSampler smp(hp, g, NoiseMethod::exact_cholesky);
    RowMat I(n, fs.size());
    parallel_for(n, o.jobs, [&](std::int64_t r) {
      RowMat dW;
      smp.sample_into(dW, o.seed + 3, static_cast<std::uint64_t>(r));
      for (std::size_t k = 0; k < fs.size(); ++k) I(r, k) = (fs[k].array() * dW.array()).sum();
    });
    double worst = 0.0;
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const Vec sq = I.col(k).array().square();
      const double m = sq.mean();
      const double sd = std::sqrt((sq.array() - m).square().sum() / (n - 1));
      worst = std::max(worst, std::abs(m - expect[k]) / (sd / std::sqrt(double(n))));
    }
    CheckRow r;
    r.measured = worst;
    r.tolerance = 4.0;
    r.pass = worst <= 4.0;
    r.detail = "5 integrands, " + std::to_string(n) + " samples, max |E I^2 - norm| / SE = " + detail::fmt(worst);
    return r;
  });
}

// 4 ---------------------------------------------------------------------------

/// ∬ |G(t,x+h) - G(t,x)|² |h|^{2H-2} dh dx by nested quadrature.
inline double frac_integral_D_quadrature(double t, double H) {
  auto inner_x = [t](double h) {
    auto f = [&](double x) {
      const double d = 0.5 * ((std::abs(x + h) < t) - (std::abs(x) < t));
      return d * d;
    };
    return quad::panels(f, {-t - h, -t, t - h, t}, -t - h - 1.0, t + 1.0, 16, 1.0);
  };
  const double inf = std::numeric_limits<double>::infinity();
  auto fh = [&](double h) { return inner_x(h) * std::pow(h, 2.0 * H - 2.0); };
  return 2.0 * quad::refine([&](int n) { return quad::panels(fh, {2.0 * t}, 0.0, inf, n, 2.0 * t); }, 1e-10, 0.0, 32,
                            2048)
                   .value;
}

inline CheckRow check_kernel_integrals(const Options&) {
  return detail::timed(4, "kernel difference integral", [] {
    const double H = 0.3;
    const HurstParam hp(H);
    double e_closed = 0.0, e_quad = 0.0;
    for (double t : {0.25, 0.5, 1.0, 2.0}) {
      const double closed = std::pow(2.0 * t, 2.0 * H) / (2.0 * H * (1.0 - 2.0 * H));
      const double D = frac_integral_D(t, hp);
      e_closed = std::max(e_closed, std::abs(D - closed) / closed);
      e_quad = std::max(e_quad, std::abs(frac_integral_D_quadrature(t, H) - closed) / closed);
    }
    std::vector<double> ts{0.25, 0.5, 1.0, 2.0}, bs;
    for (double t : ts) bs.push_back(frac_integral_box(t, hp));
    const double slope = rwld::detail::loglog_slope(ts, bs);
    CheckRow r;
    r.measured = std::abs(slope - (4.0 * H - 1.0));
    r.tolerance = 0.05;
    r.pass = e_closed <= 1e-9 && e_quad <= 0.02 && r.measured <= 0.05;
    r.detail = "closed-form rel err " + detail::fmt(e_closed) + ", 2-D quadrature rel err " + detail::fmt(e_quad) +
               ", box slope " + detail::fmt(slope) + " vs " + detail::fmt(4.0 * H - 1.0);
    return r;
  });
}

// 5 ---------------------------------------------------------------------------
inline CheckRow check_decomposition(const Options&) {
  return detail::timed(5, "decomposition identity", [] {
    double worst = 0.0;
    for (double a : {0.3, 0.5, 0.7})
      for (double b : {0.3, 0.5, 0.7})
        for (double tau : {0.5, 1.0, 2.0})
          for (double f : {0.2, 0.45, 0.7})
            for (double d : {0.0, 0.3, 1.5}) worst = std::max(worst, verify_decomposition(tau, 0.0, f * tau, d * tau, 0.0, a, b, 256));
    CheckRow r;
    r.measured = worst;
    r.tolerance = 0.005;
    r.pass = worst < 0.005;
    r.detail = "27 (tau, r, x) points x 9 (alpha, beta) pairs, max |sum - 1/2|";
    return r;
  });
}

// 6 ---------------------------------------------------------------------------
inline std::vector<GridFunction> mollifier_corpus(const Grid& g) {
  auto bump = [](double x, double c, double w) {
    const double z = (x - c) / w;
    return std::abs(z) < 1.0 ? (1.0 - z * z) * (1.0 - z * z) : 0.0;
  };
  std::vector<GridFunction> c;
  c.push_back(GridFunction::indicator(g, 0.0, 1.0));
  c.push_back(GridFunction::indicator(g, -1.0, 2.0));
  c.push_back(GridFunction::indicator(g, 0.5, 0.6));
  c.push_back(GridFunction::sample(g, [&](double x) { return bump(x, 0.0, 1.0); }));
  c.push_back(GridFunction::sample(g, [](double x) { return std::exp(-4.0 * x * x); }));
  c.push_back(GridFunction::sample(g, [&](double x) { return std::sin(5.0 * x) * bump(x, 0.0, 1.5); }));
  c.push_back(GridFunction::sample(g, [](double x) { return std::max(0.0, 1.0 - std::abs(x)); }));
  c.push_back(GridFunction::sample(g, [&](double x) { return bump(x, -1.0, 0.5) - bump(x, 1.0, 0.5); }));
  c.push_back(GridFunction::sample(g, [](double x) { return x * std::exp(-x * x); }));
  GridFunction steps(g);
  for (int j = 0; j < g.nodes(); ++j) steps.values[j] = std::abs(g.x(j)) < 1.0 ? ((j * 7919) % 13) / 13.0 - 0.5 : 0.0;
  c.push_back(steps);
  return c;
}

inline CheckRow check_mollifier(const Options&) {
  return detail::timed(6, "mollifier family", [] {
    const Grid g = detail::edge_grid();
    const std::vector<double> eps{0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0};
    double worst_increase = -std::numeric_limits<double>::infinity();
    for (double H : {0.3, 0.45}) {
      const HurstParam hp(H);
      for (const auto& f : mollifier_corpus(g)) {
        double prev = std::numeric_limits<double>::infinity();
        for (double e : eps) {
          const double v = h_eps_inner(f, f, hp, e);
          if (std::isfinite(prev)) worst_increase = std::max(worst_increase, (v - prev) / prev);
          prev = v;
        }
      }
    }
    double e_f0 = 0.0;
    for (double H : {0.3, 0.45})
      for (double e : {0.25, 1.0, 4.0}) {
        const double closed = boost::math::tgamma(1.0 - H) / (2.0 * std::numbers::pi * std::pow(e, 1.0 - H));
        e_f0 = std::max(e_f0, std::abs(mollifier_f_eps(0.0, HurstParam(H), e) - closed) / closed);
      }
    CheckRow r;
    r.measured = e_f0;
    r.tolerance = 1e-6;
    r.pass = worst_increase <= 0.0 && e_f0 <= 1e-6;
    r.detail = "max relative step along eps " + detail::fmt(worst_increase) + " (must be <= 0), f_eps(0) rel err " +
               detail::fmt(e_f0);
    return r;
  });
}

// 7 ---------------------------------------------------------------------------
inline CheckRow check_picard(const Options&) {
  return detail::timed(7, "picard convergence", [] {
    const StandardCase c = standard_case();
    const auto [u, tr] = solve_skeleton(c.data, c.sigma, c.g, c.hp, c.grid, 0.0, 1e-8, 60);
    const bool sup = superlinear_tail(tr.d, std::min(5, tr.iterations()));
    CheckRow r;
    r.measured = tr.d.back() + std::sqrt(tr.s2.back());
    r.tolerance = 1e-8;
    r.pass = tr.converged && sup;
    std::string ds;
    for (double d : tr.d) ds += " " + detail::fmt(d);
    r.detail = std::to_string(tr.iterations()) + " iterations, super-linear tail: " + (sup ? "yes" : "no") +
               ", d_n:" + ds;
    return r;
  });
}

// 8 ---------------------------------------------------------------------------
inline CheckRow check_uniqueness(const Options&) {
  return detail::timed(8, "uniqueness", [] {
    const StandardCase c = standard_case();
    const Field u = solve_skeleton(c.data, c.sigma, c.g, c.hp, c.grid, 0.0, 1e-8, 60).first;
    SkeletonOptions o;
    Field init = initial_term_I0(c.data, c.grid);
    for (int j = 0; j < c.grid.nodes(); ++j) {
      const double x = c.grid.x(j);
      init.values.col(j).array() += std::abs(x) < 1.0 ? 0.3 * (1.0 - x * x) * (1.0 - x * x) : 0.0;
    }
    o.initial = init;
    const auto [v, tr] = solve_skeleton(c.data, c.sigma, c.g, c.hp, c.grid, o);
    const UniquenessResidual ur = uniqueness_residual(u, v, c.hp, c.grid);
    CheckRow r;
    r.measured = (ur.S1 + ur.S2).maxCoeff();
    r.tolerance = 1e-12;
    r.pass = r.measured < 1e-12;
    r.detail = "second run from I0 + bump took " + std::to_string(tr.iterations()) + " iterations";
    return r;
  });
}

// 9 ---------------------------------------------------------------------------
inline CheckRow check_weak_convergence(const Options&) {
  return detail::timed(9, "weakly convergent controls", [] {
    const StandardCase c = standard_case();
    const auto rows = weak_convergence_probe(c.g, {2, 8, 32}, c.data, c.sigma, c.hp, c.grid);
    bool dec = true;
    std::string s;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k > 0) dec = dec && rows[k].dC < rows[k - 1].dC;
      s += " n=" + std::to_string(rows[k].mode) + ":" + detail::fmt(rows[k].dC);
    }
    CheckRow r;
    r.measured = rows.back().dC;
    r.tolerance = rows[rows.size() - 2].dC;
    r.pass = dec;
    r.detail = "d_C by mode" + s;
    return r;
  });
}

// 10 --------------------------------------------------------------------------
inline CheckRow check_condition_b(const Options& o) {
  return detail::timed(10, "controlled vs skeleton", [&] {
    const StandardCase c = standard_case();
    const std::vector<double> eps{0.5, 0.1, 0.02};
    const long n = o.quick ? 400 : 2000;
    const auto rep = condition_b_probe({c.g, c.g, c.g}, eps, c.data, c.sigma, c.hp, c.grid, n, 1.0, o.seed + 10,
                                       {0.1, 0.05, 0.01}, NoiseMethod::exact_cholesky, o.jobs);
    bool noninc = true;
    std::string s;
    for (std::size_t k = 0; k < rep.rows.size(); ++k) {
      if (k > 0) noninc = noninc && rep.rows[k].prob[1] <= rep.rows[k - 1].prob[1];
      s += " eps=" + detail::fmt(rep.rows[k].eps) + ":" + detail::fmt(rep.rows[k].prob[1]);
    }
    CheckRow r;
    r.measured = rep.rows.back().prob[1];
    r.tolerance = rep.rows.front().prob[1];
    r.pass = noninc;
    r.detail = std::to_string(n) + " replicas, P(d_C > 0.05)" + s;
    return r;
  });
}

// 11 --------------------------------------------------------------------------
inline CheckRow check_ldp_trend(const Options& o) {
  if (o.quick) {
    CheckRow r;
    r.id = 11;
    r.name = "ldp trend";
    r.skipped = true;
    r.pass = true;
    r.detail = "skipped in quick mode";
    return r;
  }
  return detail::timed(11, "ldp trend", [&] {
    const StandardCase c = standard_case();
    EventSpec ev;
    ev.x_star = 0.0;
    ev.level = initial_term_I0(c.data, c.grid).values(c.grid.nt, node_index(c.grid, 0.0)) + 0.5;
    RateOptions ro;
    ro.jobs = o.jobs;
    const RateResult rate = rate_minimize(ev, c.data, c.sigma, c.hp, c.grid, ro);
    const std::vector<double> ladder{0.5, 0.2, 0.1, 0.05};
    const TailEstimate tail =
        mc_tail(ev, c.data, c.sigma, c.hp, c.grid, ladder, 20000, o.seed + 11, NoiseMethod::exact_cholesky, o.jobs);
    bool inc = true;
    std::string s;
    for (std::size_t k = 0; k < tail.rows.size(); ++k) {
      const auto& t = tail.rows[k];
      if (k > 0) inc = inc && t.r_hat > tail.rows[k - 1].r_hat;
      s += " eps=" + detail::fmt(t.eps) + ":r=" + detail::fmt(t.r_hat) + "(hits " + std::to_string(t.hits) +
           (t.zero_hits ? ", corrected" : "") + ")";
    }
    const double last = tail.rows.back().r_hat;
    CheckRow r;
    r.measured = last / rate.energy;
    r.tolerance = 0.5;
    r.pass = inc && rate.feasible && last >= 0.5 * rate.energy && last <= 1.5 * rate.energy;
    r.detail = "rate energy " + detail::fmt(rate.energy) + ", r_hat increasing: " + (inc ? "yes" : "no") + ";" + s;
    return r;
  });
}

// 12 --------------------------------------------------------------------------
inline CheckRow check_exactness(const Options& o) {
  return detail::timed(12, "zero-noise exactness", [&] {
    const StandardCase c = standard_case();
    const Field I0 = initial_term_I0(c.data, c.grid);
    const NoiseField dW = NoiseSampler(c.hp, c.grid, NoiseMethod::exact_cholesky).sample(o.seed + 12);
    const Field a = solve_swe(c.data, c.sigma, 0.0, dW, c.grid, c.hp).u;
    const Field b = solve_skeleton(c.data, c.sigma, Control(c.grid), c.hp, c.grid, 0.0, 1e-8, 60).first;
    const Field s = solve_skeleton(c.data, c.sigma, c.g, c.hp, c.grid, 0.0, 1e-10, 60).first;
    const Field d = solve_controlled(c.data, c.sigma, 0.0, dW, c.g, c.grid, c.hp).u;
    const bool bit_a = a.values == I0.values;
    const bool bit_b = b.values == I0.values;
    const double diff = (d.values - s.values).cwiseAbs().maxCoeff();
    CheckRow r;
    r.measured = diff;
    r.tolerance = 1e-8;
    r.pass = bit_a && bit_b && diff <= 1e-8;
    r.detail = std::string("solve(eps=0) == I0 bitwise: ") + (bit_a ? "yes" : "no") +
               ", skeleton(g=0) == I0 bitwise: " + (bit_b ? "yes" : "no") + ", max |controlled - skeleton| " +
               detail::fmt(diff);
    return r;
  });
}

inline std::vector<std::function<CheckRow(const Options&)>> all_checks() {
  return {check_fbm_norm,    check_noise_covariance, check_isometry,         check_kernel_integrals,
          check_decomposition, check_mollifier,      check_picard,           check_uniqueness,
          check_weak_convergence, check_condition_b, check_ldp_trend,        check_exactness};
}

inline std::vector<CheckRow> run_all(const Options& o) {
  std::vector<CheckRow> rows;
  for (const auto& c : all_checks()) rows.push_back(c(o));
  return rows;
}

}  // namespace rwld::verify
