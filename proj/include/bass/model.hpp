// State construction, joint density evaluation and covariance assembly.
#ifndef BASS_MODEL_HPP_
#define BASS_MODEL_HPP_

#include "bass/core.hpp"

#include <random>

namespace bass {

/// Builds a starting state with k_init factors.
///
/// Loadings are 0.1 * N(0, 1); every shrinkage variable starts at 1,
/// indicators at 1 (responsibilities at 0.5), pi at 0.5 and the residual
/// variances at the per-feature sample variance (floored at 1e-6).
inline ModelState init_state(const GroupedDataset& data, Eigen::Index k_init,
                             const HyperParams& hyper, Seed seed) {
  if (k_init < 1) throw InvalidInput("init_state: k_init must be at least 1");
  hyper.validate();
  const auto p = data.p(), m = data.m(), n = data.n();

  ModelState s;
  s.hyper = hyper;
  s.offsets = data.offsets;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  s.lambda.resize(p, k_init);
  for (Eigen::Index h = 0; h < k_init; ++h) {
    for (Eigen::Index j = 0; j < p; ++j) s.lambda(j, h) = 0.1 * normal(rng);
  }
  s.theta = Matrix::Ones(p, k_init);
  s.delta = Matrix::Ones(p, k_init);
  s.phi = Matrix::Ones(m, k_init);
  s.tau = Matrix::Ones(m, k_init);
  s.eta = Vector::Ones(m);
  s.gamma = Vector::Ones(m);
  s.z = IntMatrix::Ones(m, k_init);
  s.rho = Matrix::Constant(m, k_init, 0.5);
  s.pi = Vector::Constant(m, 0.5);

  s.sigma2.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto row = data.y.row(j);
    const double mean = row.mean();
    const double ss = (row.array() - mean).square().sum();
    const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    s.sigma2(j) = std::max(var, 1e-6);
  }
  return s;
}

/// Lambda Lambda^T + diag(sigma2).
inline Matrix marginal_covariance(const ModelState& s) {
  Matrix omega = s.lambda * s.lambda.transpose();
  omega.diagonal() += s.sigma2;
  return omega;
}

namespace detail {

/// Cholesky factor of I + Lambda^T Sigma^{-1} Lambda.
inline Eigen::LLT<Matrix> factor_precision(const Matrix& lambda, const Vector& sigma2) {
  const Vector inv = sigma2.cwiseInverse();
  Matrix m = lambda.transpose() * inv.asDiagonal() * lambda;
  m.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericFailure("posterior precision of factors is not positive definite");
  return llt;
}

}  // namespace detail

/// Marginal data log-likelihood log N(Y; 0, Lambda Lambda^T + Sigma), with X
/// integrated out. Evaluated through the k x k capacitance matrix.
inline double log_likelihood(const Matrix& lambda, const Vector& sigma2, const Matrix& y) {
  if (lambda.rows() != y.rows() || sigma2.size() != y.rows()) {
    throw DimensionError("log_likelihood: loading/data shapes disagree");
  }
  if ((sigma2.array() <= 0.0).any()) throw NumericFailure("log_likelihood: non-positive residual variance");
  const auto n = static_cast<double>(y.cols());
  const auto p = static_cast<double>(y.rows());
  const Vector inv = sigma2.cwiseInverse();

  double logdet = sigma2.array().log().sum();
  double quad = (y.array().square().colwise() * inv.array()).sum();
  if (lambda.cols() > 0) {
    const auto llt = detail::factor_precision(lambda, sigma2);
    const Matrix l = llt.matrixL();
    logdet += 2.0 * l.diagonal().array().log().sum();
    const Matrix proj = lambda.transpose() * inv.asDiagonal() * y;  // k x n
    const Matrix solved = llt.matrixL().solve(proj);
    quad -= solved.squaredNorm();
  }
  const double ll = -0.5 * (n * p * detail::kLog2Pi + n * logdet + quad);
  if (!std::isfinite(ll)) throw NumericFailure("log_likelihood: non-finite value");
  return ll;
}

inline double log_likelihood(const ModelState& s, const GroupedDataset& data) {
  return log_likelihood(s.lambda, s.sigma2, data.y);
}

/// log p(Y | Lambda, X, Sigma) + log p(X).
inline double log_complete_likelihood(const ModelState& s, const GroupedDataset& data, const Matrix& x) {
  if (x.rows() != s.k() || x.cols() != data.n()) throw DimensionError("log_complete_likelihood: bad factor shape");
  const auto n = static_cast<double>(data.n());
  const Matrix resid = data.y - s.lambda * x;
  double out = 0.0;
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    out += -0.5 * (n * (detail::kLog2Pi + std::log(s.sigma2(j))) + resid.row(j).squaredNorm() / s.sigma2(j));
  }
  out += -0.5 * (static_cast<double>(x.size()) * detail::kLog2Pi + x.squaredNorm());
  return out;
}

/// Sum over rows of block w of log N(lambda; 0, theta) + log Ga(theta; a, delta)
/// + log Ga(delta; b, phi): the sparse (z = 1) branch for column h.
inline double log_sparse_branch(const ModelState& s, Eigen::Index w, Eigen::Index h) {
  const auto& hp = s.hyper;
  const double phi = s.phi(w, h);
  double out = 0.0;
  for (Eigen::Index j = s.offsets[w]; j < s.offsets[w + 1]; ++j) {
    const double th = s.theta(j, h), de = s.delta(j, h);
    out += log_normal_pdf(s.lambda(j, h), th) + log_gamma_pdf(th, hp.a, de) + log_gamma_pdf(de, hp.b, phi);
  }
  return out;
}

/// Sparse branch with each delta measured on the log scale (an extra
/// sum_j log delta), the form the EM responsibilities and objective use.
inline double log_sparse_branch_log_delta(const ModelState& s, Eigen::Index w, Eigen::Index h) {
  return log_sparse_branch(s, w, h) + s.delta.col(h).segment(s.offsets[w], s.block_size(w)).array().log().sum();
}

/// Sum over rows of block w of log N(lambda; 0, phi): the dense (z = 0) branch.
inline double log_dense_branch(const ModelState& s, Eigen::Index w, Eigen::Index h) {
  const double phi = s.phi(w, h);
  double out = 0.0;
  for (Eigen::Index j = s.offsets[w]; j < s.offsets[w + 1]; ++j) out += log_normal_pdf(s.lambda(j, h), phi);
  return out;
}

/// How the mixture indicators enter a prior evaluation.
enum class IndicatorMode {
  kSampled,      // use the 0/1 values in ModelState::z
  kMarginalized  // sum z out of the two-component mixture
};

namespace detail {

inline double log_prior_impl(const ModelState& s, IndicatorMode mode, bool log_delta) {
  const auto& hp = s.hyper;
  double out = 0.0;
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const double log_pi = std::log(s.pi(w)), log_1m_pi = std::log1p(-s.pi(w));
    for (Eigen::Index h = 0; h < s.k(); ++h) {
      if (mode == IndicatorMode::kSampled) {
        out += s.z(w, h) == 1 ? log_pi + log_sparse_branch(s, w, h) : log_1m_pi + log_dense_branch(s, w, h);
      } else {
        const double sparse = log_delta ? log_sparse_branch_log_delta(s, w, h) : log_sparse_branch(s, w, h);
        out += log_sum_exp(log_pi + sparse, log_1m_pi + log_dense_branch(s, w, h));
      }
      out += log_gamma_pdf(s.phi(w, h), hp.c, s.tau(w, h));
      out += log_gamma_pdf(s.tau(w, h), hp.d, s.eta(w));
    }
    out += log_gamma_pdf(s.eta(w), hp.e, s.gamma(w));
    out += log_gamma_pdf(s.gamma(w), hp.f, hp.nu);
    out += log_beta_pdf(s.pi(w), 1.0, 1.0);
  }
  for (Eigen::Index j = 0; j < s.p(); ++j) out += log_gamma_pdf(1.0 / s.sigma2(j), hp.a_sigma, hp.b_sigma);
  return out;
}

}  // namespace detail

/// Log prior density of every parameter except the factors.
///
/// Under z = 0 the local pair (theta, delta) of that block column carries no
/// density: theta collapses onto phi and delta integrates out.
inline double log_prior(const ModelState& s, IndicatorMode mode = IndicatorMode::kSampled) {
  return detail::log_prior_impl(s, mode, false);
}

/// log p(Y | Lambda, Sigma) + log prior, with X integrated out and z taken
/// from the state. Throws NumericFailure when the covariance is not positive
/// definite.
inline double log_joint(const ModelState& s, const GroupedDataset& data) {
  return log_likelihood(s, data) + log_prior(s, IndicatorMode::kSampled);
}

/// Complete-data log joint: log p(Y, X, Lambda, ..., Z, Sigma, pi).
inline double log_joint(const ModelState& s, const GroupedDataset& data, const Matrix& x) {
  return log_complete_likelihood(s, data, x) + log_prior(s, IndicatorMode::kSampled);
}

/// Log posterior (up to a constant) with X and Z both integrated out; this is
/// what the EM engines track and what restarts are ranked by. The rate-like
/// variables delta, tau, eta and gamma are measured on the log scale, which is
/// the scale on which their closed-form EM updates are exact modes.
inline double log_posterior(const ModelState& s, const GroupedDataset& data) {
  double out = log_likelihood(s, data) + detail::log_prior_impl(s, IndicatorMode::kMarginalized, true);
  out += s.tau.array().log().sum() + s.eta.array().log().sum() + s.gamma.array().log().sum();
  return out;
}

}  // namespace bass

#endif  // BASS_MODEL_HPP_
