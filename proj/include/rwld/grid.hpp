#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rwld/hurst.hpp"

namespace rwld {

using Vec = Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Uniform space-time lattice on [-L, L] x [0, T].
///
/// Nodes x_j = -L + j dx (j = 0..nx), times t_i = i dt (i = 0..nt).
/// A nodal vector is read as the piecewise-constant function equal to
/// values[j] on the dual cell [x_j - dx/2, x_j + dx/2] and zero outside;
/// every norm below is evaluated on that reconstruction.
struct Grid {
  double L = 1.0;
  int nx = 8;
  double T = 1.0;
  int nt = 8;

  Grid() = default;
  Grid(double L_, int nx_, double T_, int nt_) : L(L_), nx(nx_), T(T_), nt(nt_) { validate(); }

  double dx() const { return 2.0 * L / nx; }
  double dt() const { return T / nt; }
  int nodes() const { return nx + 1; }
  double x(int j) const { return -L + j * dx(); }
  double t(int i) const { return i * dt(); }

  void validate() const {
    if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("grid: L must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("grid: T must be positive");
    if (nx < 8) throw ConfigError("grid: nx must be at least 8");
    if (nt < 8) throw ConfigError("grid: nt must be at least 8");
    if (dt() > dx() * (1.0 + 1e-12))
      throw ConfigError("grid: dt = " + std::to_string(dt()) + " exceeds dx = " + std::to_string(dx()));
  }

  /// Light-cone containment for data supported in [-radius, radius].
  void require_contains(double radius) const {
    if (L < 2.0 * T + radius - 1e-12)
      throw ConfigError("grid: L = " + std::to_string(L) + " is below 2T + support radius = " +
                        std::to_string(2.0 * T + radius));
  }

  bool operator==(const Grid& o) const {
    return L == o.L && nx == o.nx && T == o.T && nt == o.nt;
  }
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw ConfigError(std::string(what) + ": grids differ");
}

inline void require_finite(const double* p, Eigen::Index n, const char* what) {
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) throw ConfigError(std::string(what) + ": non-finite entry at " + std::to_string(i));
}

/// Function on the spatial nodes of a grid.
struct GridFunction {
  Grid grid;
  Vec values;

  GridFunction() = default;
  explicit GridFunction(const Grid& g) : grid(g), values(Vec::Zero(g.nodes())) {}
  GridFunction(const Grid& g, Vec v) : grid(g), values(std::move(v)) { check(); }

  void check() const {
    if (values.size() != grid.nodes())
      throw ConfigError("grid function: length " + std::to_string(values.size()) + " != nx+1 = " +
                        std::to_string(grid.nodes()));
    require_finite(values.data(), values.size(), "grid function");
  }

  static GridFunction sample(const Grid& g, const std::function<double(double)>& f) {
    Vec v(g.nodes());
    for (int j = 0; j < g.nodes(); ++j) v[j] = f(g.x(j));
    return {g, std::move(v)};
  }

  /// Cell average of 1_[a,b]: the fraction of each dual cell inside [a, b].
  /// Exact indicator whenever a and b fall on cell edges.
  static GridFunction indicator(const Grid& g, double a, double b) {
    Vec v(g.nodes());
    const double h = g.dx();
    for (int j = 0; j < g.nodes(); ++j) {
      const double lo = std::max(a, g.x(j) - 0.5 * h);
      const double hi = std::min(b, g.x(j) + 0.5 * h);
      v[j] = hi > lo ? (hi - lo) / h : 0.0;
    }
    return {g, std::move(v)};
  }
};

/// Space-time function: (nt+1) x (nx+1), row i is time t_i.
struct Field {
  Grid grid;
  RowMat values;

  Field() = default;
  explicit Field(const Grid& g) : grid(g), values(RowMat::Zero(g.nt + 1, g.nodes())) {}
  Field(const Grid& g, RowMat v) : grid(g), values(std::move(v)) { check(); }

  void check() const {
    if (values.rows() != grid.nt + 1 || values.cols() != grid.nodes())
      throw ConfigError("field: shape does not match grid");
    require_finite(values.data(), values.size(), "field");
  }

  GridFunction slice(int i) const { return {grid, values.row(i).transpose()}; }

  static Field sample(const Grid& g, const std::function<double(double, double)>& f) {
    Field u(g);
    for (int i = 0; i <= g.nt; ++i)
      for (int j = 0; j < g.nodes(); ++j) u.values(i, j) = f(g.t(i), g.x(j));
    return u;
  }
};

}  // namespace rwld
