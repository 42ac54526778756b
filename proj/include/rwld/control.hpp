#pragma once

#include <cmath>
#include <functional>

#include "rwld/fracspace.hpp"
#include "rwld/grid.hpp"

namespace rwld {

/// Piecewise-constant-in-time control g: row i is g on [t_i, t_{i+1}),
/// shape nt x (nx+1).
struct Control {
  Grid grid;
  RowMat g;

  Control() = default;
  explicit Control(const Grid& gr) : grid(gr), g(RowMat::Zero(gr.nt, gr.nodes())) {}
  Control(const Grid& gr, RowMat v) : grid(gr), g(std::move(v)) { check(); }

  void check() const {
    if (g.rows() != grid.nt || g.cols() != grid.nodes()) throw ConfigError("control: shape must be nt x (nx+1)");
    require_finite(g.data(), g.size(), "control");
  }

  /// ½ Σ_i dt ‖g_i‖²_H.
  double energy(const CellGram& Q) const {
    double s = 0.0;
    for (int i = 0; i < grid.nt; ++i) s += g.row(i) * Q.Q * g.row(i).transpose();
    return 0.5 * s * grid.dt();
  }
  double energy(const HurstParam& hp) const { return energy(cell_gram(grid, hp)); }

  /// Membership in S^N: ∫‖g‖²_H dt <= N.
  bool in_ball(double N, const HurstParam& hp) const { return 2.0 * energy(hp) <= N * (1.0 + 1e-12); }

  bool is_zero() const { return (g.array() == 0.0).all(); }

  static Control sample(const Grid& gr, const std::function<double(double, double)>& f) {
    Control c(gr);
    for (int i = 0; i < gr.nt; ++i)
      for (int j = 0; j < gr.nodes(); ++j) c.g(i, j) = f(gr.t(i), gr.x(j));
    return c;
  }

  /// Time-constant profile scaled so that ½∫‖g‖²_H dt = target_energy.
  static Control with_energy(const Grid& gr, const HurstParam& hp, const std::function<double(double)>& profile,
                             double target_energy) {
    Control c = sample(gr, [&](double, double x) { return profile(x); });
    const double e = c.energy(hp);
    if (target_energy == 0.0) return Control(gr);
    if (!(e > 0.0)) throw ConfigError("control: profile has zero energy");
    c.g *= std::sqrt(target_energy / e);
    return c;
  }
};

inline Control operator+(const Control& a, const Control& b) {
  require_same_grid(a.grid, b.grid, "control sum");
  return {a.grid, a.g + b.g};
}

inline Control operator-(const Control& a, const Control& b) {
  require_same_grid(a.grid, b.grid, "control difference");
  return {a.grid, a.g - b.g};
}

}  // namespace rwld
