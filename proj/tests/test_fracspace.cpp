#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <gtest/gtest.h>

#include "rwld/fracspace.hpp"

using namespace rwld;

namespace {

// 0 and all multiples of 0.05 are cell edges
Grid edge_grid() { return Grid(3.025, 121, 1.0, 40); }

GridFunction bump(const Grid& g) {
  return GridFunction::sample(g, [](double x) { return std::abs(x) < 1.0 ? std::pow(1.0 - x * x, 2) : 0.0; });
}

// piecewise-constant reconstruction of a nodal vector
double recon(const GridFunction& f, double x) {
  const double s = (x + f.grid.L) / f.grid.dx();
  const long j = std::lround(s);
  return (j >= 0 && j < f.grid.nodes()) ? f.values[j] : 0.0;
}

}  // namespace

TEST(FracSpace, IndicatorNormLaw) {
  const Grid g = edge_grid();
  for (double H : {0.3, 0.4, 0.45}) {
    const HurstParam hp(H);
    for (double x : {0.5, 1.0, 2.0}) {
      const GridFunction f = GridFunction::indicator(g, 0.0, x);
      const double exact = std::pow(x, 2.0 * H);
      EXPECT_NEAR(h_inner_fourier(f, f, hp), exact, 1e-5 * exact);
      EXPECT_NEAR(h_inner_difference(f, f, hp), exact, 1e-10 * exact);
      EXPECT_NEAR(f.values.dot(cell_gram(g, hp).Q * f.values), exact, 1e-10 * exact);
    }
  }
}

TEST(FracSpace, ShiftedIndicatorsGiveFbmCovariance) {
  const Grid g = edge_grid();
  const HurstParam hp(0.35);
  const double H = hp.H();
  const GridFunction a = GridFunction::indicator(g, 0.0, 1.0), b = GridFunction::indicator(g, 0.0, 1.5);
  const double expect = 0.5 * (std::pow(1.0, 2 * H) + std::pow(1.5, 2 * H) - std::pow(0.5, 2 * H));
  EXPECT_NEAR(h_inner_difference(a, b, hp), expect, 1e-10);
  EXPECT_NEAR(h_inner_fourier(a, b, hp), expect, 1e-5);
}

TEST(FracSpace, RoutesAgreeOnRandomVectors) {
  const Grid g(2.0, 41, 1.0, 20);
  const HurstParam hp(0.3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  const CellGram Q = cell_gram(g, hp);
  for (int rep = 0; rep < 5; ++rep) {
    GridFunction u(g), v(g);
    for (int j = 0; j < g.nodes(); ++j) {
      u.values[j] = nd(rng);
      v.values[j] = nd(rng);
    }
    const double d = h_inner_difference(u, v, hp);
    EXPECT_NEAR(Q.inner(u.values, v.values), d, 1e-10 * std::max(1.0, std::abs(d)));
    EXPECT_NEAR(h_inner_fourier(u, v, hp), d, 1e-5 * std::max(1.0, h_inner_difference(u, u, hp)));
  }
}

TEST(FracSpace, GramIsSymmetricPositive) {
  const Grid g(2.0, 41, 1.0, 20);
  const CellGram Q = cell_gram(g, HurstParam(0.3));
  EXPECT_LT((Q.Q - Q.Q.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.Q);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  for (int j = 0; j + 1 < g.nodes(); ++j) EXPECT_LT(Q.Q(j, j + 1), 0.0);
}

TEST(FracSpace, MollifiedNormDecreasesInEps) {
  const Grid g = edge_grid();
  const HurstParam hp(0.3);
  const GridFunction f = bump(g);
  double prev = h_eps_inner(f, f, hp, 0.0);
  EXPECT_NEAR(prev, h_inner_difference(f, f, hp), 1e-5 * prev);
  for (double e : {1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0}) {
    const double v = h_eps_inner(f, f, hp, e);
    EXPECT_LT(v, prev) << e;
    EXPECT_GT(v, 0.0);
    prev = v;
  }
}

TEST(FracSpace, MollifiedGramMatchesFourier) {
  const Grid g = edge_grid();
  const HurstParam hp(0.3);
  for (double e : {0.01, 0.1}) {
    const GridFunction f = GridFunction::indicator(g, 0.0, 1.0);
    const double gram = f.values.dot(cell_gram(g, hp, e).Q * f.values);
    EXPECT_NEAR(gram, h_eps_inner(f, f, hp, e), 1e-5 * gram);
  }
}

TEST(FracSpace, MollifierKernelAtZero) {
  for (double H : {0.3, 0.45})
    for (double e : {0.25, 1.0, 4.0}) {
      const double closed = boost::math::tgamma(1.0 - H) / (2.0 * std::numbers::pi * std::pow(e, 1.0 - H));
      EXPECT_NEAR(mollifier_f_eps(0.0, HurstParam(H), e), closed, 1e-9 * closed);
      EXPECT_NEAR(mollifier_f_eps_at_zero(HurstParam(H), e), closed, 1e-14 * closed);
    }
}

// f_ε(x) = (1/π) ∫_0^∞ e^{-εξ²} ξ^{1-2H} cos(ξx) dξ = Γ(1-H)/(2π ε^{1-H}) 1F1(1-H; 1/2; -x²/(4ε))
TEST(FracSpace, MollifierKernelAgainstHypergeometric) {
  for (double H : {0.3, 0.45})
    for (double e : {0.01, 0.25, 1.0})
      for (double x : {0.1, 0.5, 1.0, 3.0}) {
        const double ref = boost::math::tgamma(1.0 - H) / (2.0 * std::numbers::pi * std::pow(e, 1.0 - H)) *
                           boost::math::hypergeometric_1F1(1.0 - H, 0.5, -x * x / (4.0 * e));
        const double got = mollifier_f_eps(x, HurstParam(H), e);
        EXPECT_NEAR(got, ref, 1e-7 * std::max(std::abs(ref), 1e-3)) << H << " " << e << " " << x;
      }
}

TEST(FracSpace, NodalSeminormAgainstDirectQuadrature) {
  const Grid g(1.5, 15, 1.0, 8);
  const HurstParam hp(0.35);
  const double H = hp.H(), dx = g.dx();
  GridFunction f = GridFunction::sample(g, [](double x) { return std::cos(2.0 * x) + 0.3 * x; });
  for (int j : {0, 4, 7, 15}) {
    std::vector<double> br;
    for (int k = -40; k <= 40; ++k) br.push_back((k + 0.5) * dx);
    auto integrand = [&](double h) {
      const double d = recon(f, g.x(j) + h) - f.values[j];
      return d * d * std::pow(std::abs(h), 2.0 * H - 2.0);
    };
    // beyond |h| = R the reconstruction at x_j + h vanishes: closed-form tail
    const double R = 40.5 * dx;
    const double ref = quad::panels(integrand, br, -R, R, 64) +
                       f.values[j] * f.values[j] * 2.0 * std::pow(R, 2.0 * H - 1.0) / (1.0 - 2.0 * H);
    const double got = frac_seminorm_N(f, hp, j);
    EXPECT_NEAR(got * got, ref, 1e-9 * ref) << j;
  }
}

TEST(FracSpace, AggregatedSeminormAgainstNestedQuadrature) {
  const Grid g(1.5, 15, 1.0, 8);
  const HurstParam hp(0.4);
  const double H = hp.H(), dx = g.dx();
  const GridFunction f = GridFunction::sample(g, [](double x) { return std::exp(-x * x) * (1.0 + x); });
  std::vector<double> edges;
  for (int j = 0; j <= g.nodes(); ++j) edges.push_back(g.x(0) - 0.5 * dx + j * dx);
  // x-integrand is piecewise constant between the sorted breakpoints: midpoint sum is exact
  auto D = [&](double h) {
    std::vector<double> br = edges;
    for (double e : edges) br.push_back(e - h);
    std::sort(br.begin(), br.end());
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      const double m = 0.5 * (br[k] + br[k + 1]);
      const double d = recon(f, m + h) - recon(f, m);
      s += d * d * (br[k + 1] - br[k]);
    }
    return s;
  };
  std::vector<double> hb;
  for (int k = 1; k <= g.nodes() + 1; ++k) hb.push_back(k * dx);
  // beyond R every lag separates the supports: D(h) = 2‖f‖², tail in closed form
  const double R = hb.back();
  const double ref = 2.0 * quad::panels([&](double h) { return D(h) * std::pow(h, 2.0 * H - 2.0); }, hb, 0.0, R, 64) +
                     2.0 * D(R) * std::pow(R, 2.0 * H - 1.0) / (1.0 - 2.0 * H);
  const double got = frac_seminorm_N_aggregated(f, hp);
  EXPECT_NEAR(got * got, ref, 1e-7 * ref);
  // the difference-form norm is c_diff times the aggregated seminorm squared
  EXPECT_NEAR(h_inner_difference(f, f, hp), hp.c_diff() * got * got, 1e-12);
}

TEST(FracSpace, ZpNormProperties) {
  const Grid g(2.0, 31, 1.0, 16);
  const HurstParam hp(0.4);
  const Field zero(g);
  EXPECT_EQ(zp_norm(zero, 2.0, hp), 0.0);
  const Field u = Field::sample(g, [](double t, double x) { return std::exp(-x * x) * (1.0 + t); });
  const Field u2(g, 2.0 * u.values);
  EXPECT_NEAR(zp_norm(u2, 2.0, hp), 2.0 * zp_norm(u, 2.0, hp), 1e-12);
  EXPECT_NEAR(zp_norm(u2, 4.0, hp), 2.0 * zp_norm(u, 4.0, hp), 1e-12);
  const ZpNormReport r = zp_norm_report(u, 2.0, hp);
  EXPECT_EQ(r.lp_rule, kRuleTrapezoid);
  EXPECT_EQ(r.seminorm_rule, kRuleLagLinear);
  // at p = 2 the lag-linear rule is exact for the reconstruction
  const GridFunction last(g, Vec(u.values.row(g.nt).transpose()));
  const double agg = frac_seminorm_N_aggregated(last, hp);
  EXPECT_NEAR(r.seminorm_term, agg, 1e-12 * agg);
  EXPECT_THROW(zp_norm(u, 1.5, hp), ConfigError);
}

TEST(FracSpace, DcMetricIsAMetricBoundedByOne) {
  const Grid g(2.0, 31, 1.0, 16);
  const Field a = Field::sample(g, [](double t, double x) { return std::sin(x + t); });
  const Field b = Field::sample(g, [](double t, double x) { return std::cos(x * t); });
  const Field c = Field::sample(g, [](double, double x) { return 10.0 * x; });
  EXPECT_EQ(dC_metric(a, a), 0.0);
  EXPECT_DOUBLE_EQ(dC_metric(a, b), dC_metric(b, a));
  EXPECT_LE(dC_metric(a, c), dC_metric(a, b) + dC_metric(b, c) + 1e-15);
  EXPECT_LE(dC_metric(a, c), 1.0);
  EXPECT_THROW(dC_metric(a, Field(Grid(2.0, 33, 1.0, 16))), ConfigError);
}

TEST(FracSpace, RejectsMismatchedGrids) {
  const GridFunction a(Grid(2.0, 31, 1.0, 16)), b(Grid(2.0, 33, 1.0, 16));
  EXPECT_THROW(h_inner_difference(a, b, HurstParam(0.3)), ConfigError);
  EXPECT_THROW(h_inner_fourier(a, b, HurstParam(0.3)), ConfigError);
}

TEST(Grid, Validation) {
  EXPECT_THROW(Grid(0.0, 16, 1.0, 16), ConfigError);
  EXPECT_THROW(Grid(1.0, 4, 1.0, 16), ConfigError);
  EXPECT_THROW(Grid(1.0, 32, 1.0, 8), ConfigError);  // dt > dx
  EXPECT_THROW(Grid(1.0, 16, 1.0, 16).require_contains(0.5), ConfigError);
  EXPECT_NO_THROW(Grid(2.5, 16, 1.0, 16).require_contains(0.5));
  const GridFunction ind = GridFunction::indicator(edge_grid(), 0.0, 1.0);
  EXPECT_NEAR(ind.values.sum() * edge_grid().dx(), 1.0, 1e-12);
  for (int j = 0; j < ind.grid.nodes(); ++j)
    EXPECT_LT(std::min(std::abs(ind.values[j]), std::abs(ind.values[j] - 1.0)), 1e-9);
}
