#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace rwld::quad {

/// Fixed-size double-exponential rules. Endpoint singularities of integrable
/// strength are handled without special treatment; non-finite samples (a node
/// that rounds onto a singular point) are dropped, their weight being below
/// double resolution there.
inline constexpr double kDeHalfWidth = 4.0;

/// tanh-sinh rule with `n` nodes on [a, b].
template <class F>
double tanh_sinh(F&& f, double a, double b, int n) {
  if (!(b > a)) return 0.0;
  n = std::max(n, 3);
  const double half = 0.5 * (b - a);
  const double h = 2.0 * kDeHalfWidth / (n - 1);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = -kDeHalfWidth + k * h;
    const double u = 0.5 * std::numbers::pi * std::sinh(t);
    const double ch = std::cosh(u);
    const double w = 0.5 * std::numbers::pi * std::cosh(t) / (ch * ch);
    if (w == 0.0) continue;
    // distance to the nearer endpoint, computed without cancellation
    const double gap = half * 2.0 / (std::exp(2.0 * std::abs(u)) + 1.0);
    const double x = t < 0.0 ? a + gap : b - gap;
    if (!(x > a && x < b) && !(t == 0.0)) continue;
    const double fx = f(t == 0.0 ? a + half : x);
    if (std::isfinite(fx)) sum += w * fx;
  }
  return sum * h * half;
}

/// exp-sinh rule with `n` nodes on [a, +inf); `scale` sets the length at
/// which the mapping puts half of its nodes.
template <class F>
double exp_sinh(F&& f, double a, int n, double scale = 1.0) {
  n = std::max(n, 3);
  const double h = 2.0 * kDeHalfWidth / (n - 1);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = -kDeHalfWidth + k * h;
    const double e = scale * std::exp(0.5 * std::numbers::pi * std::sinh(t));
    const double w = 0.5 * std::numbers::pi * std::cosh(t) * e;
    if (!std::isfinite(e) || e == 0.0) continue;
    const double fx = f(a + e);
    if (std::isfinite(fx)) sum += w * fx;
  }
  return sum * h;
}

struct Estimate {
  double value = 0.0;
  double error = 0.0;
  int nodes = 0;
};

/// Doubles the node count of `rule(n)` until successive values agree to
/// `rel_tol` (or `abs_tol`), or `n_max` is reached.
template <class Rule>
Estimate refine(Rule&& rule, double rel_tol, double abs_tol = 0.0,
                int n_start = 32, int n_max = 8192) {
  int n = n_start;
  double prev = rule(n);
  Estimate est{prev, std::numeric_limits<double>::infinity(), n};
  while (n < n_max) {
    n *= 2;
    const double cur = rule(n);
    est = {cur, std::abs(cur - prev), n};
    if (est.error <= std::max(rel_tol * std::abs(cur), abs_tol)) break;
    prev = cur;
  }
  return est;
}

/// Integral over [a, b] split at the interior breakpoints, `n` nodes per
/// panel. Infinite ends use exp-sinh tails.
template <class F>
double panels(F&& f, std::vector<double> breaks, double a, double b, int n,
              double tail_scale = 1.0) {
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double x) { return !(x > a && x < b); }),
               breaks.end());
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double x, double y) {
                             return std::abs(x - y) <=
                                    1e-14 * std::max(1.0, std::abs(x));
                           }),
               breaks.end());
  double sum = 0.0;
  const bool lo_inf = std::isinf(a);
  const bool hi_inf = std::isinf(b);
  if (lo_inf && hi_inf && breaks.empty()) breaks.push_back(0.0);
  std::vector<double> pts;
  if (!lo_inf) pts.push_back(a);
  pts.insert(pts.end(), breaks.begin(), breaks.end());
  if (!hi_inf) pts.push_back(b);
  if (lo_inf) {
    const double p = pts.front();
    sum += exp_sinh([&](double y) { return f(2.0 * p - y); }, p, n, tail_scale);
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    sum += tanh_sinh(f, pts[i], pts[i + 1], n);
  if (hi_inf) sum += exp_sinh(f, pts.back(), n, tail_scale);
  return sum;
}

}  // namespace rwld::quad
