// Rate-function upper bound for u(T,0) >= I0(T,0) + a and a small Monte Carlo
// tail estimate next to it.

#include <cstdio>

#include "rwld/ldp.hpp"

using namespace rwld;

int main() {
  const StandardCase c = standard_case(32);
  const double base = initial_term_I0(c.data, c.grid).values(c.grid.nt, node_index(c.grid, 0.0));
  std::printf("offset   rate energy   feasible\n");
  for (double a : {0.4, 0.2, 0.1, 0.05}) {
    const EventSpec ev{EventKind::terminal_point_level, 0.0, base + a, {}};
    const RateResult r = rate_minimize(ev, c.data, c.sigma, c.hp, c.grid);
    std::printf("%6.3f   %11.6f   %s\n", a, r.energy, r.feasible ? "yes" : "no");
  }
  const EventSpec ev{EventKind::terminal_point_level, 0.0, base + 0.2, {}};
  const TailEstimate t = mc_tail(ev, c.data, c.sigma, c.hp, c.grid, {1.0, 0.5, 0.25}, 4000, 7);
  std::printf("\neps     hits   p_hat      -eps log p\n");
  for (const auto& r : t.rows)
    std::printf("%-6g  %5ld  %.3e  %.4f%s\n", r.eps, r.hits, r.p_hat, r.r_hat, r.zero_hits ? "  (no hits)" : "");
}
