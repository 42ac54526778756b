#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "rwld/fracspace.hpp"
#include "rwld/grid.hpp"
#include "rwld/hurst.hpp"
#include "rwld/parallel.hpp"

namespace rwld {

/// Covariance of the noise increments over the dual cells of one time slab,
/// per unit time: Q_jk = ⟨1_{cell j}, 1_{cell k}⟩_H.
struct SpatialCovariance {
  Grid grid;
  double H = 0.0;
  Vec lag;   // lag[d] = Q_{j,j+d}
  RowMat Q;

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
};

inline SpatialCovariance build_spatial_covariance(const Grid& g, const HurstParam& hp) {
  CellGram G = cell_gram(g, hp, 0.0);
  return {g, hp.H(), std::move(G.lag), std::move(G.Q)};
}

enum class NoiseMethod { exact_cholesky, circulant_embedding };

inline std::string to_string(NoiseMethod m) {
  return m == NoiseMethod::exact_cholesky ? "exact_cholesky" : "circulant_embedding";
}

inline NoiseMethod noise_method_from_string(const std::string& s) {
  if (s == "exact_cholesky" || s == "cholesky") return NoiseMethod::exact_cholesky;
  if (s == "circulant_embedding" || s == "circulant") return NoiseMethod::circulant_embedding;
  throw ConfigError("unknown noise method '" + s + "'");
}

struct NoiseSpec {
  HurstParam hp;
  Grid grid;
  std::uint64_t seed = 0;
  NoiseMethod method = NoiseMethod::exact_cholesky;
};

/// Rectangle increments: dW(i, j) is the increment over [t_i, t_{i+1}] x
/// dual cell j; shape nt x (nx+1).
struct NoiseField {
  Grid grid;
  RowMat dW;
};

// ---------------------------------------------------------------------------
// random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the stream for (seed, replicate, row); rows and replicates can be
/// generated independently and in any order.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replicate, std::uint64_t row) {
  return splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^ (row + 0x632be59bd9b4e019ULL));
}

/// Reusable sampler: the factorisation is built once per (grid, H, method).
class NoiseSampler {
 public:
  NoiseSampler(const HurstParam& hp, const Grid& g, NoiseMethod method)
      : grid_(g), method_(method), cov_(build_spatial_covariance(g, hp)) {
    const int N = g.nodes();
    const double dt = g.dt();
    if (method == NoiseMethod::exact_cholesky) {
      Eigen::MatrixXd C = dt * cov_.Q;
      const double tr = C.trace();
      Eigen::LLT<Eigen::MatrixXd> llt(C);
      double jitter = 1e-16 * tr;
      while (llt.info() != Eigen::Success) {
        jitter *= 10.0;
        if (jitter > 1e-10 * tr) throw NumericError("noise: covariance not positive definite within jitter bound");
        llt.compute(C + jitter * Eigen::MatrixXd::Identity(N, N));
      }
      chol_ = llt.matrixL();
    } else {
      build_circulant(hp, dt);
    }
  }

  const SpatialCovariance& covariance() const { return cov_; }
  const Grid& grid() const { return grid_; }
  NoiseMethod method() const { return method_; }
  int embedding_size() const { return m_; }

  void sample_into(RowMat& dW, std::uint64_t seed, std::uint64_t replicate) const {
    const int N = grid_.nodes();
    dW.resize(grid_.nt, N);
    Vec z(method_ == NoiseMethod::exact_cholesky ? N : 2 * m_);
    std::vector<std::complex<double>> spec, out;
    Eigen::FFT<double> fft;
    for (int i = 0; i < grid_.nt; ++i) {
      std::mt19937_64 rng(stream_seed(seed, replicate, static_cast<std::uint64_t>(i)));
      std::normal_distribution<double> nd;
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(rng);
      if (method_ == NoiseMethod::exact_cholesky) {
        dW.row(i) = (chol_.triangularView<Eigen::Lower>() * z).transpose();
      } else {
        spec.resize(m_);
        for (int k = 0; k < m_; ++k) spec[k] = sqrt_lambda_[k] * std::complex<double>(z[2 * k], z[2 * k + 1]);
        fft.fwd(out, spec);
        for (int j = 0; j < N; ++j) dW(i, j) = out[j].real();
      }
    }
  }

  NoiseField sample(std::uint64_t seed, std::uint64_t replicate = 0) const {
    NoiseField f{grid_, {}};
    sample_into(f.dW, seed, replicate);
    return f;
  }

 private:
  void build_circulant(const HurstParam& hp, double dt) {
    const int N = grid_.nodes();
    int m0 = 1;
    while (m0 < 2 * (N - 1)) m0 <<= 1;
    const double scale = dt * std::pow(grid_.dx(), 2.0 * hp.H());
    Eigen::FFT<double> fft;
    for (int m = m0; m <= 8 * m0; m <<= 1) {
      std::vector<double> c(m);
      for (int k = 0; k < m; ++k) c[k] = scale * detail::cell_cov(std::min(k, m - k), hp.H());
      std::vector<std::complex<double>> lam;
      fft.fwd(lam, c);
      double lmax = 0.0, lmin = 0.0;
      for (auto& l : lam) {
        lmax = std::max(lmax, l.real());
        lmin = std::min(lmin, l.real());
      }
      if (lmin < -1e-10 * lmax) continue;
      m_ = m;
      sqrt_lambda_.resize(m);
      for (int k = 0; k < m; ++k) sqrt_lambda_[k] = std::sqrt(std::max(lam[k].real(), 0.0) / m);
      return;
    }
    throw NumericError("noise: circulant embedding has a negative spectrum after 8x padding; use exact_cholesky");
  }

  Grid grid_;
  NoiseMethod method_;
  SpatialCovariance cov_;
  Eigen::MatrixXd chol_;
  std::vector<double> sqrt_lambda_;
  int m_ = 0;
};

inline NoiseField sample_noise(const NoiseSpec& spec, std::uint64_t replicate = 0) {
  return NoiseSampler(spec.hp, spec.grid, spec.method).sample(spec.seed, replicate);
}

// ---------------------------------------------------------------------------
// stochastic integral

/// Σ_{i,j} f(t_i, x_j) dW(i, j) with f sampled at the left end of each slab.
/// `f` has nt rows (one per slab) or nt+1 rows (a Field; the last row is
/// not used).
inline double walsh_integral(const RowMat& f, const NoiseField& W) {
  const Eigen::Index nt = W.dW.rows();
  if (f.cols() != W.dW.cols() || (f.rows() != nt && f.rows() != nt + 1))
    throw ConfigError("walsh_integral: integrand shape does not match the noise field");
  return f.topRows(nt).cwiseProduct(W.dW).sum();
}

inline double walsh_integral(const Field& f, const NoiseField& W) {
  require_same_grid(f.grid, W.grid, "walsh_integral");
  return walsh_integral(f.values, W);
}

/// ‖g‖² in L²([0,T]; H) for an integrand with one row per slab, via the Gram
/// matrix: Σ_i dt g_iᵀ Q g_i.
inline double integrand_norm_sq(const RowMat& f, const Grid& g, const RowMat& Q) {
  double s = 0.0;
  for (int i = 0; i < g.nt; ++i) s += f.row(i) * Q * f.row(i).transpose();
  return s * g.dt();
}

struct BdgReport {
  double p = 2.0;
  long n_samples = 0;
  double lhs = 0.0;  // (E|∫f dW|^p)^{1/p}, Monte Carlo
  double rhs = 0.0;  // √(4p) (∫∫ [𝒩 f]² dy ds)^{1/2}, constant taken as 1
  double ratio = 0.0;
};

/// Moment inequality report for a deterministic integrand (nt rows).
inline BdgReport bdg_check(const RowMat& f, const HurstParam& hp, const Grid& g, double p, long n_samples,
                           std::uint64_t seed, NoiseMethod method = NoiseMethod::exact_cholesky, int jobs = 1) {
  if (!(p >= 2.0)) throw ConfigError("bdg_check: p must be >= 2");
  if (n_samples < 1) throw ConfigError("bdg_check: n_samples must be positive");
  if (f.rows() != g.nt || f.cols() != g.nodes()) throw ConfigError("bdg_check: integrand shape");
  BdgReport r;
  r.p = p;
  r.n_samples = n_samples;
  double ns = 0.0;
  for (int i = 0; i < g.nt; ++i) {
    const GridFunction row(g, f.row(i).transpose());
    const double a = frac_seminorm_N_aggregated(row, hp);
    ns += g.dt() * a * a;
  }
  r.rhs = std::sqrt(4.0 * p) * std::sqrt(ns);
  if (r.rhs == 0.0) return r;
  const NoiseSampler sampler(hp, g, method);
  std::vector<double> m(n_samples);
  parallel_for(n_samples, jobs, [&](std::int64_t s) {
    RowMat dW;
    sampler.sample_into(dW, seed, static_cast<std::uint64_t>(s));
    m[s] = std::pow(std::abs(f.cwiseProduct(dW).sum()), p);
  });
  double mean = 0.0;
  for (double v : m) mean += v;
  mean /= static_cast<double>(n_samples);
  r.lhs = std::pow(mean, 1.0 / p);
  r.ratio = r.lhs / r.rhs;
  return r;
}

}  // namespace rwld
