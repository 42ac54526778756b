// Norm of an interval indicator in the rough space, three ways, and its
// mollified norms as eps shrinks.

#include <cmath>
#include <cstdio>

#include "rwld/fracspace.hpp"

using namespace rwld;

int main() {
  const Grid g(3.025, 121, 1.0, 40);  // 0 and 1 fall on cell edges
  const GridFunction ind = GridFunction::indicator(g, 0.0, 1.0);
  for (double H : {0.3, 0.35, 0.4, 0.45}) {
    const HurstParam hp(H);
    const CellGram Q = cell_gram(g, hp);
    const double f = h_inner_fourier(ind, ind, hp);
    const double d = h_inner_difference(ind, ind, hp);
    const double q = ind.values.dot(Q.Q * ind.values);
    std::printf("H=%.2f  fourier %.8f  difference %.8f  gram %.8f\n", H, f, d, q);
  }
  const HurstParam hp(0.3);
  std::printf("\nmollified norm of 1_[0,1], H=0.3\n");
  for (double eps : {1.0, 0.1, 0.01, 1e-3, 0.0})
    std::printf("  eps=%-6g  %.8f\n", eps, h_eps_inner(ind, ind, hp, eps));
}
