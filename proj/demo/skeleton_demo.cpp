// Picard iteration for the skeleton equation on the reference configuration.

#include <cstdio>

#include "rwld/skeleton.hpp"

using namespace rwld;

int main() {
  const StandardCase c = standard_case();
  auto [u, tr] = solve_skeleton(c.data, c.sigma, c.g, c.hp, c.grid, 0.0, 1e-12, 100);
  std::printf("iter  sup_t L2 step      sup_t S2 step\n");
  for (int n = 0; n < tr.iterations(); ++n) std::printf("%4d  %.6e  %.6e\n", n + 1, tr.d[n], tr.s2[n]);
  const Field I0 = initial_term_I0(c.data, c.grid);
  const int mid = c.grid.nx / 2;
  std::printf("\nu(T,0) = %.6f   I0(T,0) = %.6f\n", u.values(c.grid.nt, mid), I0.values(c.grid.nt, mid));
  std::printf("residual %.3e, Z^2 norm %.6f\n", skeleton_residual(u, c.data, c.sigma, c.g, c.hp), zp_norm(u, 2.0, c.hp));
}
