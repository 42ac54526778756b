#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "rwld/kernels.hpp"

using namespace rwld;

TEST(Kernels, PointValues) {
  EXPECT_EQ(green(1.0, 0.5), 0.5);
  EXPECT_EQ(green(1.0, 1.5), 0.0);
  EXPECT_EQ(green(0.0, 0.0), 0.0);
  EXPECT_NEAR(kernel_E(1.0, 0.0), 1.0 / std::numbers::pi, 1e-15);
  EXPECT_TRUE(std::isnan(kernel_S_alpha(1.0, 1.0, 0.5)));
  EXPECT_TRUE(std::isnan(kernel_C_1malpha(1.0, -1.0, 0.5)));
  EXPECT_DOUBLE_EQ(kernel_C(1.0, 0.3, 0.4), kernel_C_1malpha(1.0, 0.3, 0.6));
  // E(t, ·) is a probability density
  EXPECT_NEAR(quad::panels([](double x) { return kernel_E(0.7, x); }, {0.0}, -INFINITY, INFINITY, 256, 0.7), 1.0,
              1e-8);
}

TEST(Kernels, DifferenceOperators) {
  auto k = [](double t, double x) { return t * x * x; };
  EXPECT_DOUBLE_EQ(diff_h(k, 2.0, 1.0, 0.5), 2.0 * (2.25 - 1.0));
  EXPECT_EQ(diff_h(k, 2.0, 1.0, 0.0), 0.0);
  // second difference of a quadratic: 2 t h l
  EXPECT_NEAR(box_hl(k, 2.0, 0.3, 0.5, 0.25), 2.0 * 2.0 * 0.5 * 0.25, 1e-14);
  EXPECT_EQ(box_hl(k, 2.0, 0.3, 0.0, 0.25), 0.0);
}

TEST(Kernels, KernelIdPairs) {
  KernelId k{KernelTag::K3, 0.5, 0.5};
  EXPECT_EQ(k.eval(1.0, 0.2), green(1.0, 0.2));
  EXPECT_EQ(k.complement(1.0, 0.2), kernel_E(1.0, 0.2));
  EXPECT_FALSE(k.singular_on_characteristic());
  EXPECT_TRUE((KernelId{KernelTag::K1, 0.5, 0.3}.singular_on_characteristic()));
  EXPECT_THROW((KernelId{KernelTag::K2, 1.0, 0.5}.validate()), ConfigError);
  EXPECT_EQ(to_string(KernelTag::K4), "K4");
}

TEST(Kernels, DecompositionResidualShrinksWithQuadrature) {
  const double r8 = verify_decomposition(2.0, 0.0, 1.0, 0.0, 0.5, 0.4, 0.4, 8);
  const double r16 = verify_decomposition(2.0, 0.0, 1.0, 0.0, 0.5, 0.4, 0.4, 16);
  const double r32 = verify_decomposition(2.0, 0.0, 1.0, 0.0, 0.5, 0.4, 0.4, 32);
  EXPECT_LT(r16, r8);
  EXPECT_LT(r32, r16);
  EXPECT_LT(r32, 1e-5);
}

TEST(Kernels, DecompositionHoldsInsideAndOutsideTheCone) {
  for (double a : {0.3, 0.7})
    for (double b : {0.3, 0.7})
      for (double x : {0.0, 0.4, 1.5, 10.0}) {
        const DecompositionTerms d = decomposition_terms(1.0, 0.0, 0.45, x, 0.0, a, b, 256);
        EXPECT_EQ(d.target, green(1.0, x));
        EXPECT_LT(d.residual, 1e-4) << a << " " << b << " " << x;
      }
  EXPECT_THROW(verify_decomposition(1.0, 0.5, 0.2, 0.0, 0.0, 0.5, 0.5, 64), ConfigError);
}

// ∬ |G(t,x+h)-G(t,x)|² |h|^{2H-2}: brute-force midpoint sum over x on a fine
// lattice for each h node, h-integral by a graded midpoint rule plus tail.
TEST(Kernels, DifferenceIntegralAgainstBruteForce) {
  const double H = 0.3, t = 0.5;
  const int nx = 4000;
  auto Dx = [&](double h) {
    const double a = -t - h - 0.1, b = t + 0.1, dx = (b - a) / nx;
    double s = 0.0;
    for (int i = 0; i < nx; ++i) {
      const double x = a + (i + 0.5) * dx;
      const double d = green(t, x + h) - green(t, x);
      s += d * d * dx;
    }
    return s;
  };
  double sum = 0.0;
  const int nh = 400;
  const double hmax = 2.0 * t;
  for (int k = 0; k < nh; ++k) {
    // h = hmax u^4 grading towards the singular end
    const double u0 = double(k) / nh, u1 = double(k + 1) / nh, um = 0.5 * (u0 + u1);
    const double h = hmax * std::pow(um, 4);
    sum += Dx(h) * std::pow(h, 2 * H - 2) * hmax * 4.0 * std::pow(um, 3) / nh;
  }
  sum += 0.5 * (2.0 * t) * std::pow(hmax, 2 * H - 1) / (1 - 2 * H);  // D = t beyond 2t
  const double brute = 2.0 * sum;
  EXPECT_NEAR(frac_integral_D(t, HurstParam(H)), brute, 0.02 * brute);
}

TEST(Kernels, BoxIntegralScaling) {
  const HurstParam hp(0.3);
  const double base = frac_integral_box(1.0, hp);
  for (double t : {0.25, 0.5, 2.0}) EXPECT_NEAR(frac_integral_box(t, hp) / std::pow(t, 4 * 0.3 - 1), base, 1e-6 * base);
  EXPECT_THROW(frac_integral_box(0.0, hp), ConfigError);
}

TEST(Kernels, JThetaIsLinearAndVanishesForZeroControl) {
  const Grid g(2.5, 17, 1.0, 16);
  const HurstParam hp(0.4);
  const Field su = Field::sample(g, [](double, double x) { return std::exp(-x * x); });
  const Control c = Control::sample(g, [](double t, double x) { return (1.0 + t) * std::exp(-2.0 * x * x); });
  const KernelId K{KernelTag::K3, 0.5, 0.5};
  EXPECT_TRUE((j_theta_transform(K, su, Control(g), 0.3, hp, g).values.array() == 0.0).all());
  const Field j1 = j_theta_transform(K, su, c, 0.3, hp, g);
  const Field j2 = j_theta_transform(K, su, Control(g, 2.0 * c.g), 0.3, hp, g);
  EXPECT_LT((j2.values - 2.0 * j1.values).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE((j1.values.row(0).array() == 0.0).all());
  const JThetaReport r = j_theta_report(j1, su, 2.0, hp);
  EXPECT_GT(r.integral, 0.0);
  EXPECT_TRUE(std::isfinite(r.ratio));
  EXPECT_THROW(j_theta_transform(K, su, c, 1.0, hp, g), ConfigError);
}

// first slab of J_θ for the wave kernel: w · Σ_k A(1,|j-k|) σ_k (Q g_0)_k with
// w = dt^{1-θ}/(1-θ) and A the cell average of G(dt, ·)
TEST(Kernels, JThetaFirstStepByHand) {
  const Grid g(2.5, 17, 1.0, 16);
  const HurstParam hp(0.4);
  const double theta = 0.3, dt = g.dt(), dx = g.dx();
  const Field su = Field::sample(g, [](double, double x) { return 1.0 + x; });
  const Control c = Control::sample(g, [](double, double x) { return std::cos(x); });
  const Field J = j_theta_transform(KernelId{KernelTag::K3, 0.5, 0.5}, su, c, theta, hp, g);
  const Vec Qg = cell_gram(g, hp).Q * c.g.row(0).transpose();
  for (int j : {3, 8, 12}) {
    double s = 0.0;
    for (int k = 0; k < g.nodes(); ++k) {
      const double lo = std::max((std::abs(j - k) - 0.5) * dx, -dt), hi = std::min((std::abs(j - k) + 0.5) * dx, dt);
      const double A = hi > lo ? 0.5 * (hi - lo) / dx : 0.0;
      s += A * su.values(0, k) * Qg[k];
    }
    EXPECT_NEAR(J.values(1, j), std::pow(dt, 1 - theta) / (1 - theta) * s, 1e-13);
  }
}
