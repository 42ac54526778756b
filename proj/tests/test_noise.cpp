#include <cmath>

#include <gtest/gtest.h>

#include "rwld/noise.hpp"

using namespace rwld;

namespace {

// max over entries of |empirical - dt Q| / SE, with rows pooled over replicates
double covariance_zscore(const NoiseSampler& s, long rows, std::uint64_t seed) {
  const Grid& g = s.grid();
  const int N = g.nodes();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N, N);
  long used = 0;
  for (std::uint64_t r = 0; used < rows; ++r) {
    const RowMat dW = s.sample(seed, r).dW;
    const long take = std::min<long>(g.nt, rows - used);
    C += dW.topRows(take).transpose() * dW.topRows(take);
    used += take;
  }
  C /= double(rows);
  const Eigen::MatrixXd E = g.dt() * s.covariance().Q;
  double z = 0.0;
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < N; ++k)
      z = std::max(z, std::abs(C(j, k) - E(j, k)) / std::sqrt((E(j, j) * E(k, k) + E(j, k) * E(j, k)) / rows));
  return z;
}

}  // namespace

TEST(Noise, CovarianceIsFbmIncrementCovariance) {
  const Grid g(2.0, 31, 1.0, 16);
  for (double H : {0.3, 0.45}) {
    const SpatialCovariance c = build_spatial_covariance(g, HurstParam(H));
    const double dx = g.dx();
    for (int d = 0; d < 6; ++d) {
      const double expect = 0.5 * std::pow(dx, 2 * H) *
                            (std::pow(d + 1.0, 2 * H) + std::pow(std::abs(d - 1.0), 2 * H) - 2.0 * std::pow(d, 2 * H));
      EXPECT_NEAR(c.Q(3, 3 + d), expect, 1e-12) << d;
      if (d > 0) {
        EXPECT_LT(c.Q(3, 3 + d), 0.0);
      }
    }
    EXPECT_GT(c.min_eigenvalue(), 0.0);
  }
}

TEST(Noise, MethodNames) {
  EXPECT_EQ(noise_method_from_string("cholesky"), NoiseMethod::exact_cholesky);
  EXPECT_EQ(noise_method_from_string("circulant_embedding"), NoiseMethod::circulant_embedding);
  EXPECT_EQ(noise_method_from_string(to_string(NoiseMethod::exact_cholesky)), NoiseMethod::exact_cholesky);
  EXPECT_THROW(noise_method_from_string("fft"), ConfigError);
}

TEST(Noise, DeterministicStreams) {
  const Grid g(2.0, 31, 1.0, 16);
  const NoiseSampler s(HurstParam(0.3), g, NoiseMethod::exact_cholesky);
  const RowMat a = s.sample(11, 4).dW, b = s.sample(11, 4).dW;
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == s.sample(11, 5).dW);
  EXPECT_FALSE(a == s.sample(12, 4).dW);
  EXPECT_NE(stream_seed(1, 0, 1), stream_seed(1, 1, 0));
  const NoiseSpec spec{HurstParam(0.3), g, 11, NoiseMethod::exact_cholesky};
  EXPECT_TRUE(sample_noise(spec, 4).dW == a);
}

TEST(Noise, CholeskyEmpiricalCovariance) {
  const NoiseSampler s(HurstParam(0.3), Grid(2.0, 31, 1.0, 16), NoiseMethod::exact_cholesky);
  EXPECT_LT(covariance_zscore(s, 40000, 5), 4.5);
}

TEST(Noise, CirculantEmpiricalCovariance) {
  const Grid g(2.0, 31, 1.0, 16);
  const NoiseSampler s(HurstParam(0.3), g, NoiseMethod::circulant_embedding);
  EXPECT_GE(s.embedding_size(), 2 * (g.nodes() - 1));
  EXPECT_EQ(s.embedding_size() & (s.embedding_size() - 1), 0);
  EXPECT_LT(covariance_zscore(s, 40000, 6), 4.5);
}

TEST(Noise, WalshIntegralIsometry) {
  const Grid g(2.05, 41, 1.0, 16);  // cell edges on multiples of 0.1
  const HurstParam hp(0.35);
  const NoiseSampler s(hp, g, NoiseMethod::exact_cholesky);
  RowMat f = RowMat::Zero(g.nt, g.nodes());
  const GridFunction ind = GridFunction::indicator(g, -0.5, 1.0);
  for (int i = 0; i < g.nt / 2; ++i) f.row(i) = ind.values.transpose();
  const double norm = integrand_norm_sq(f, g, s.covariance().Q);
  EXPECT_NEAR(norm, 0.5 * std::pow(1.5, 2 * hp.H()), 1e-10);
  const long n = 20000;
  double m = 0.0, m2 = 0.0;
  for (long r = 0; r < n; ++r) {
    const double I = walsh_integral(f, s.sample(9, r));
    m += I * I;
    m2 += I * I * I * I;
  }
  m /= n;
  m2 /= n;
  const double se = std::sqrt((m2 - m * m) / n);
  EXPECT_LT(std::abs(m - norm), 4.0 * se);
}

TEST(Noise, WalshIntegralIsLinear) {
  const Grid g(2.0, 31, 1.0, 16);
  const NoiseField W = NoiseSampler(HurstParam(0.3), g, NoiseMethod::exact_cholesky).sample(1);
  RowMat a = RowMat::Random(g.nt, g.nodes()), b = RowMat::Random(g.nt, g.nodes());
  EXPECT_NEAR(walsh_integral(RowMat(2.0 * a + b), W), 2.0 * walsh_integral(a, W) + walsh_integral(b, W), 1e-12);
}

TEST(Noise, MomentReportIsIndependentOfJobs) {
  const Grid g(2.0, 31, 1.0, 16);
  const HurstParam hp(0.3);
  RowMat f = RowMat::Zero(g.nt, g.nodes());
  f.row(0) = GridFunction::indicator(g, 0.0, 1.0).values.transpose();
  const BdgReport a = bdg_check(f, hp, g, 4.0, 2000, 3, NoiseMethod::exact_cholesky, 1);
  const BdgReport b = bdg_check(f, hp, g, 4.0, 2000, 3, NoiseMethod::exact_cholesky, 3);
  EXPECT_EQ(a.lhs, b.lhs);
  EXPECT_GT(a.rhs, 0.0);
  EXPECT_TRUE(std::isfinite(a.ratio));
  // Gaussian moment: (E|I|^4)^{1/4} = 3^{1/4} ‖f‖
  const double sd = std::sqrt(integrand_norm_sq(f, g, build_spatial_covariance(g, hp).Q));
  EXPECT_NEAR(a.lhs, std::pow(3.0, 0.25) * sd, 0.08 * sd);
  EXPECT_THROW(bdg_check(f, hp, g, 1.0, 10, 1), ConfigError);
}
