#include <cmath>

#include <gtest/gtest.h>

#include "rwld/ldp.hpp"

using namespace rwld;

namespace {

EventSpec point_event(const StandardCase& c, double offset) {
  const Field I0 = initial_term_I0(c.data, c.grid);
  return {EventKind::terminal_point_level, 0.0, I0.values(c.grid.nt, node_index(c.grid, 0.0)) + offset, {}};
}

}  // namespace

TEST(Ldp, EventEvaluation) {
  const Grid g(2.5, 16, 1.0, 16);
  const Field u = Field::sample(g, [](double t, double x) { return t * std::exp(-x * x); });
  EXPECT_DOUBLE_EQ(event_value({EventKind::terminal_point_level, 0.0, 0.5, {}}, u), 1.0);
  EXPECT_DOUBLE_EQ(event_value({EventKind::sup_level, 0.0, 0.5, {}}, u), 1.0);
  EXPECT_DOUBLE_EQ(event_value({EventKind::sup_level, 0.0, 0.5, {0, 16}}, u), std::exp(-6.25));
  EXPECT_THROW(node_index(g, 0.1), ConfigError);
  EXPECT_THROW(event_value({EventKind::sup_level, 0.0, 0.5, {17}}, u), ConfigError);
  EXPECT_THROW(event_value({EventKind::terminal_point_level, 0.0, NAN, {}}, u), ConfigError);
}

TEST(Ldp, AnsatzEnergyMatrixMatchesControlEnergy) {
  const StandardCase c = standard_case(32);
  const ControlAnsatz A(c.grid, 4, 6, -1.5, 1.5);
  const CellGram Q = cell_gram(c.grid, c.hp);
  const Eigen::MatrixXd M = A.energy_matrix(Q);
  Vec v(A.size());
  for (int k = 0; k < A.size(); ++k) v[k] = std::sin(1.0 + 0.7 * k);
  EXPECT_NEAR(0.5 * v.dot(M * v), A.prolong(v).energy(Q), 1e-12);
  EXPECT_THROW(ControlAnsatz(c.grid, 13, 6, -1, 1), ConfigError);
  EXPECT_THROW(ControlAnsatz(c.grid, 4, 1, -1, 1), ConfigError);
}

TEST(Ldp, RateIsZeroForEventsMetWithoutControl) {
  const StandardCase c = standard_case(32);
  const RateResult r = rate_minimize(point_event(c, -0.01), c.data, c.sigma, c.hp, c.grid);
  EXPECT_EQ(r.energy, 0.0);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(r.g_star.is_zero());
}

TEST(Ldp, RateMinimizerMeetsTheEventAndScalesQuadratically) {
  const StandardCase c = standard_case(32);
  std::vector<double> E;
  for (double a : {0.25, 0.125, 0.0625}) {
    const EventSpec ev = point_event(c, a);
    const RateResult r = rate_minimize(ev, c.data, c.sigma, c.hp, c.grid);
    ASSERT_TRUE(r.feasible) << a;
    const Field u = solve_skeleton(c.data, c.sigma, r.g_star, c.hp, c.grid, 0.0, 1e-12, 200).first;
    EXPECT_GE(event_value(ev, u), ev.level - 1e-3) << a;
    EXPECT_NEAR(r.energy, r.g_star.energy(cell_gram(c.grid, c.hp)), 1e-9 * r.energy);
    E.push_back(r.energy);
  }
  EXPECT_GT(E[0], E[1]);
  EXPECT_GT(E[1], E[2]);
  // small-offset limit of a quadratic rate: halving the offset quarters the energy
  EXPECT_NEAR(E[1] / E[2], 4.0, 1.0);
}

TEST(Ldp, LadderAndSampleValidation) {
  const StandardCase c = standard_case(16);
  const EventSpec ev = point_event(c, 0.1);
  EXPECT_THROW(mc_tail(ev, c.data, c.sigma, c.hp, c.grid, {0.1, 0.2}, 1000, 1), ConfigError);
  EXPECT_THROW(mc_tail(ev, c.data, c.sigma, c.hp, c.grid, {0.1, -0.1}, 1000, 1), ConfigError);
  EXPECT_THROW(mc_tail(ev, c.data, c.sigma, c.hp, c.grid, {}, 1000, 1), ConfigError);
  EXPECT_THROW(mc_tail(ev, c.data, c.sigma, c.hp, c.grid, {0.1}, 999, 1), ConfigError);
}

TEST(Ldp, TailEdgeCases) {
  const StandardCase c = standard_case(16);
  const std::vector<double> ladder{0.5, 0.1};
  const TailEstimate sure = mc_tail(point_event(c, -1.0), c.data, c.sigma, c.hp, c.grid, ladder, 1000, 3);
  for (const auto& r : sure.rows) {
    EXPECT_EQ(r.p_hat, 1.0);
    EXPECT_EQ(r.r_hat, 0.0);
    EXPECT_FALSE(r.zero_hits);
  }
  const TailEstimate never = mc_tail(point_event(c, 50.0), c.data, c.sigma, c.hp, c.grid, ladder, 1000, 3);
  for (const auto& r : never.rows) {
    EXPECT_EQ(r.hits, 0);
    EXPECT_TRUE(r.zero_hits);
    EXPECT_NEAR(r.r_hat, -r.eps * std::log(0.5 / 1001.0), 1e-14);
  }
}

TEST(Ldp, CommonRandomNumbersGiveNestedEvents) {
  const StandardCase c = standard_case(16);
  const std::vector<double> ladder{0.5, 0.25};
  const EventSpec ev = point_event(c, 0.0);
  const RowMat v = mc_event_values(ev, c.data, c.sigma, c.hp, c.grid, ladder, 1200, 9);
  const RowMat w = mc_event_values(ev, c.data, c.sigma, c.hp, c.grid, ladder, 1200, 9, NoiseMethod::exact_cholesky, 3);
  EXPECT_TRUE(v == w);
  const TailEstimate lo = tail_from_values(v, ladder, ev.level + 0.05);
  const TailEstimate hi = tail_from_values(v, ladder, ev.level + 0.15);
  for (std::size_t e = 0; e < ladder.size(); ++e) {
    EXPECT_GE(lo.rows[e].hits, hi.rows[e].hits);
    long nested = 0;
    for (long r = 0; r < v.rows(); ++r)
      if (v(r, e) >= ev.level + 0.15) nested += v(r, e) >= ev.level + 0.05 ? 1 : 0;
    EXPECT_EQ(nested, hi.rows[e].hits);
  }
}

// u^eps - I0 is √eps times a centred field to leading order, so the variance
// of the event functional scales linearly in eps
TEST(Ldp, SmallNoiseVarianceIsLinearInEps) {
  const StandardCase c = standard_case(16);
  const std::vector<double> ladder{1e-4, 1e-6};
  const RowMat v = mc_event_values(point_event(c, 0.0), c.data, c.sigma, c.hp, c.grid, ladder, 4000, 11);
  auto var = [&](int e) {
    const double m = v.col(e).mean();
    return (v.col(e).array() - m).square().sum() / (v.rows() - 1);
  };
  EXPECT_NEAR(var(0) / var(1), 100.0, 2.0);
}

TEST(Ldp, ConditionBProbe) {
  const StandardCase c = standard_case(16);
  const std::vector<Control> fam{c.g, c.g, c.g};
  const ConditionBReport rep =
      condition_b_probe(fam, {0.5, 0.05, 0.0}, c.data, c.sigma, c.hp, c.grid, 200, 1.0, 5, {0.01, 1e3});
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_LT(rep.rows[2].mean_dC, 1e-12);
  EXPECT_EQ(rep.rows[2].prob[0], 0.0);
  for (const auto& r : rep.rows) EXPECT_EQ(r.prob[1], 0.0);
  EXPECT_GT(rep.rows[0].mean_dC, rep.rows[1].mean_dC);
  EXPECT_GT(rep.seminorm_threshold, 0.0);
  EXPECT_THROW(condition_b_probe(fam, {0.5, 0.05, 0.0}, c.data, c.sigma, c.hp, c.grid, 200, 0.5, 5), ConfigError);
  EXPECT_THROW(condition_b_probe(fam, {0.5, 0.05}, c.data, c.sigma, c.hp, c.grid, 200, 1.0, 5), ConfigError);
}
