// Block Gibbs sampler over every full conditional of the model.
#ifndef BASS_GIBBS_HPP_
#define BASS_GIBBS_HPP_

#include "bass/core.hpp"
#include "bass/gig.hpp"
#include "bass/model.hpp"

#include <random>
#include <vector>

namespace bass {

using Rng = std::mt19937_64;

struct GibbsConfig {
  int n_iter = 1000;
  int burn_in = 500;
  int thin = 1;
  Seed seed = 1;

  void validate() const {
    if (!(n_iter > burn_in && burn_in >= 0)) throw InvalidInput("GibbsConfig: need n_iter > burn_in >= 0");
    if (thin < 1) throw InvalidInput("GibbsConfig: thin must be at least 1");
  }

  int retained() const { return (n_iter - burn_in) / thin; }
};

/// Summary of one retained sweep.
struct ChainSample {
  int sweep = 0;
  Matrix lambda;
  IntMatrix z;
  Vector sigma2;
  Vector pi;
};

struct Chain {
  std::vector<ChainSample> samples;
  std::vector<double> log_joint_trace;  // one entry per sweep, X integrated out
  ModelState last;
};

namespace detail {

inline double positive_or_min(double x) { return std::max(x, std::numeric_limits<double>::min()); }

inline double draw_gamma(double shape, double rate, Rng& rng) {
  return positive_or_min(std::gamma_distribution<double>(shape, 1.0 / rate)(rng));
}

inline double draw_beta(double alpha, double beta, Rng& rng) {
  const double x = std::gamma_distribution<double>(alpha, 1.0)(rng);
  const double y = std::gamma_distribution<double>(beta, 1.0)(rng);
  return std::clamp(x / (x + y), kProbFloor, 1.0 - kProbFloor);
}

inline Vector draw_standard_normal(Eigen::Index size, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = normal(rng);
  return out;
}

/// Prior variance of lambda_jh under the current indicator.
inline double loading_prior_variance(const ModelState& s, Eigen::Index j, Eigen::Index w, Eigen::Index h) {
  return s.z(w, h) == 1 ? s.theta(j, h) : s.phi(w, h);
}

}  // namespace detail

/// Parameters of the full conditionals. Ga(shape, rate); GIG(p, a, b) with
/// density proportional to x^(p-1) exp(-(a x + b / x) / 2); Be(alpha, beta);
/// Gaussians are given by mean and precision.
struct GammaLaw {
  double shape = 1.0;
  double rate = 1.0;
};

struct GigLaw {
  double p = 0.0;
  double a = 1.0;
  double b = 1.0;
};

struct BetaLaw {
  double alpha = 1.0;
  double beta = 1.0;
};

struct GaussianLaw {
  Vector mean;
  Matrix precision;
};

/// X given everything else: column i ~ N(M^{-1} Lambda^T Sigma^{-1} y_i, M^{-1})
/// with M = Lambda^T Sigma^{-1} Lambda + I. `mean` is k x n.
struct FactorLaw {
  Matrix mean;
  Matrix precision;
};

inline FactorLaw factor_law(const ModelState& s, const GroupedDataset& data) {
  const auto k = s.k(), n = data.n();
  if (k == 0) return {Matrix(0, n), Matrix(0, 0)};
  const auto llt = detail::factor_precision(s.lambda, s.sigma2);
  return {llt.solve(s.lambda.transpose() * s.sigma2.cwiseInverse().asDiagonal() * data.y),
          Matrix::Identity(k, k) + s.lambda.transpose() * s.sigma2.cwiseInverse().asDiagonal() * s.lambda};
}

/// Row j of Lambda given X: N(P^{-1} sigma_j^{-2} X y_j^T, P^{-1}) with
/// P = sigma_j^{-2} X X^T + D_j^{-1}, D_j the prior variances under z.
/// `xxt` may be passed to reuse X X^T across rows.
inline GaussianLaw loading_row_law(const ModelState& s, const GroupedDataset& data, const Matrix& x, Eigen::Index j,
                                   const Matrix* xxt = nullptr) {
  Eigen::Index w = 0;
  while (s.offsets[w + 1] <= j) ++w;
  const double prec = 1.0 / s.sigma2(j);
  GaussianLaw law;
  law.precision = xxt ? Matrix(prec * *xxt) : Matrix(prec * (x * x.transpose()));
  for (Eigen::Index h = 0; h < s.k(); ++h) law.precision(h, h) += 1.0 / detail::loading_prior_variance(s, j, w, h);
  Eigen::LLT<Matrix> llt(law.precision);
  if (llt.info() != Eigen::Success) throw NumericFailure("loading_row_law: precision not positive definite");
  law.mean = llt.solve(prec * (x * data.y.row(j).transpose()));
  return law;
}

/// delta_jh ~ Ga(a + b, phi + theta) on a sparse column.
inline GammaLaw delta_law(const ModelState& s, Eigen::Index j, Eigen::Index w, Eigen::Index h) {
  return {s.hyper.a + s.hyper.b, s.phi(w, h) + s.theta(j, h)};
}

/// theta_jh ~ GIG(a - 1/2, 2 delta, lambda^2) on a sparse column.
inline GigLaw theta_law(const ModelState& s, Eigen::Index j, Eigen::Index h) {
  return {s.hyper.a - 0.5, 2.0 * s.delta(j, h), s.lambda(j, h) * s.lambda(j, h)};
}

/// phi^w_h ~ Ga(p_w b + c, sum_j delta + tau) when sparse, returned as the
/// equivalent GIG(p_w b + c, 2 (sum_j delta + tau), 0); otherwise
/// GIG(c - p_w / 2, 2 tau, sum_j lambda^2).
inline GigLaw phi_law(const ModelState& s, Eigen::Index w, Eigen::Index h) {
  const auto& hp = s.hyper;
  const auto begin = s.offsets[w];
  const auto pw = s.block_size(w);
  if (s.z(w, h) == 1) {
    return {static_cast<double>(pw) * hp.b + hp.c, 2.0 * (s.delta.col(h).segment(begin, pw).sum() + s.tau(w, h)), 0.0};
  }
  return {hp.c - 0.5 * static_cast<double>(pw), 2.0 * s.tau(w, h), s.lambda.col(h).segment(begin, pw).squaredNorm()};
}

inline GammaLaw tau_law(const ModelState& s, Eigen::Index w, Eigen::Index h) {
  return {s.hyper.c + s.hyper.d, s.phi(w, h) + s.eta(w)};
}

inline GammaLaw eta_law(const ModelState& s, Eigen::Index w) {
  return {static_cast<double>(s.k()) * s.hyper.d + s.hyper.e, s.gamma(w) + s.tau.row(w).sum()};
}

inline GammaLaw gamma_law(const ModelState& s, Eigen::Index w) {
  return {s.hyper.e + s.hyper.f, s.eta(w) + s.hyper.nu};
}

/// pi_w ~ Be(1 + sum_h z, 1 + k - sum_h z).
inline BetaLaw pi_law(const ModelState& s, Eigen::Index w) {
  const double ones = s.z.row(w).cast<double>().sum();
  return {1.0 + ones, 1.0 + static_cast<double>(s.k()) - ones};
}

/// sigma_j^{-2} ~ Ga(n/2 + a_sigma, ||y_j - lambda_j X||^2 / 2 + b_sigma).
inline GammaLaw precision_law(const ModelState& s, const GroupedDataset& data, const Matrix& x, Eigen::Index j) {
  const double ss = (data.y.row(j) - s.lambda.row(j) * x).squaredNorm();
  return {0.5 * static_cast<double>(data.n()) + s.hyper.a_sigma, 0.5 * ss + s.hyper.b_sigma};
}

/// Draws X from factor_law.
inline Matrix sample_factors(const ModelState& s, const GroupedDataset& data, Rng& rng) {
  const auto k = s.k(), n = data.n();
  if (k == 0) return Matrix(0, n);
  const FactorLaw law = factor_law(s, data);
  const Eigen::LLT<Matrix> llt(law.precision);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noise(k, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index h = 0; h < k; ++h) noise(h, i) = normal(rng);
  }
  // L^{-T} e has covariance (L L^T)^{-1}
  return law.mean + llt.matrixU().solve(noise);
}

/// Draws row j of Lambda from loading_row_law.
inline Vector sample_loading_row(const ModelState& s, const GroupedDataset& data, const Matrix& x, Eigen::Index j,
                                 Rng& rng, const Matrix* xxt = nullptr) {
  const GaussianLaw law = loading_row_law(s, data, x, j, xxt);
  const Eigen::LLT<Matrix> llt(law.precision);
  return law.mean + llt.matrixU().solve(detail::draw_standard_normal(s.k(), rng));
}

/// log N(lambda; 0, theta) + log of the delta-integrated local prior
/// Gamma(a+b) / (Gamma(a) Gamma(b)) * theta^(a-1) phi^b / (theta + phi)^(a+b).
inline double log_marginal_sparse_term(double lambda, double theta, double phi, double a, double b) {
  return log_normal_pdf(lambda, theta) + std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
         (a - 1.0) * std::log(theta) + b * std::log(phi) - (a + b) * std::log(theta + phi);
}

/// Log odds of z^w_h = 1 against 0 with delta integrated out of the sparse branch.
inline double indicator_log_odds(const ModelState& s, Eigen::Index w, Eigen::Index h) {
  const auto& hp = s.hyper;
  const double phi = s.phi(w, h);
  double lo = std::log(s.pi(w)) - std::log1p(-s.pi(w));
  for (Eigen::Index j = s.offsets[w]; j < s.offsets[w + 1]; ++j) {
    const double lam = s.lambda(j, h);
    lo += log_marginal_sparse_term(lam, s.theta(j, h), phi, hp.a, hp.b) - log_normal_pdf(lam, phi);
  }
  return lo;
}

/// Resamples every z^w_h from its delta-marginalized conditional.
inline void sample_indicators(ModelState& s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index h = 0; h < s.k(); ++h) {
    for (Eigen::Index w = 0; w < s.m(); ++w) {
      const double p1 = detail::logistic(indicator_log_odds(s, w, h));
      s.z(w, h) = u(rng) < p1 ? 1 : 0;
    }
  }
}

/// delta then theta from delta_law and theta_law. Delta goes first because
/// the indicator step integrated it out. Dense block columns are refreshed
/// from the same conditionals, acting as a pseudo-prior, so that theta
/// tracks lambda and the sparse branch stays a live option at the next
/// indicator step.
inline void sample_local_shrinkage(ModelState& s, Rng& rng) {
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    for (Eigen::Index h = 0; h < s.k(); ++h) {
      for (Eigen::Index j = s.offsets[w]; j < s.offsets[w + 1]; ++j) {
        const GammaLaw dl = delta_law(s, j, w, h);
        s.delta(j, h) = std::max(detail::draw_gamma(dl.shape, dl.rate, rng), 1e-300);
        const GigLaw tl = theta_law(s, j, h);
        s.theta(j, h) = std::max(sample_gig(tl.p, tl.a, std::max(tl.b, 1e-300), rng), kVarianceFloor);
      }
    }
  }
}

/// phi from phi_law, floored at kVarianceFloor.
inline void sample_column_scales(ModelState& s, Rng& rng) {
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    for (Eigen::Index h = 0; h < s.k(); ++h) {
      GigLaw law = phi_law(s, w, h);
      const double phi = s.z(w, h) == 1 ? detail::draw_gamma(law.p, 0.5 * law.a, rng)
                                        : sample_gig(law.p, law.a, std::max(law.b, 1e-300), rng);
      s.phi(w, h) = std::max(phi, kVarianceFloor);
    }
  }
}

/// tau, eta, gamma and pi in that order.
inline void sample_upper_levels(ModelState& s, Rng& rng) {
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    for (Eigen::Index h = 0; h < s.k(); ++h) {
      const GammaLaw law = tau_law(s, w, h);
      s.tau(w, h) = detail::draw_gamma(law.shape, law.rate, rng);
    }
  }
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const GammaLaw law = eta_law(s, w);
    s.eta(w) = detail::draw_gamma(law.shape, law.rate, rng);
  }
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const GammaLaw law = gamma_law(s, w);
    s.gamma(w) = detail::draw_gamma(law.shape, law.rate, rng);
  }
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const BetaLaw law = pi_law(s, w);
    s.pi(w) = detail::draw_beta(law.alpha, law.beta, rng);
  }
}

/// sigma_j^2 = 1 / draw from precision_law, floored at kVarianceFloor.
inline void sample_residual_variances(ModelState& s, const GroupedDataset& data, const Matrix& x, Rng& rng) {
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const GammaLaw law = precision_law(s, data, x, j);
    s.sigma2(j) = std::max(1.0 / detail::draw_gamma(law.shape, law.rate, rng), kVarianceFloor);
  }
}

/// One systematic scan: X, Lambda rows, Z, (Delta, Theta) on every column,
/// Phi, T, eta, gamma, pi, Sigma. Returns the factor draw of this sweep.
inline Matrix sweep(ModelState& s, const GroupedDataset& data, Rng& rng) {
  Matrix x = sample_factors(s, data, rng);
  if (s.k() > 0) {
    const Matrix xxt = x * x.transpose();
    for (Eigen::Index j = 0; j < s.p(); ++j) s.lambda.row(j) = sample_loading_row(s, data, x, j, rng, &xxt);
  }
  sample_indicators(s, rng);
  sample_local_shrinkage(s, rng);
  sample_column_scales(s, rng);
  sample_upper_levels(s, rng);
  sample_residual_variances(s, data, x, rng);
  s.rho = s.z.cast<double>();
  return x;
}

/// Runs cfg.n_iter sweeps from `state`, keeping every thin-th sweep after
/// burn-in. Deterministic given cfg.seed.
inline Chain run_gibbs(ModelState state, const GroupedDataset& data, const GibbsConfig& cfg) {
  cfg.validate();
  state.validate();
  Rng rng(cfg.seed);
  Chain chain;
  chain.samples.reserve(static_cast<std::size_t>(cfg.retained()));
  chain.log_joint_trace.reserve(static_cast<std::size_t>(cfg.n_iter));
  for (int t = 1; t <= cfg.n_iter; ++t) {
    sweep(state, data, rng);
    chain.log_joint_trace.push_back(log_joint(state, data));
    if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) {
      chain.samples.push_back({t, state.lambda, state.z, state.sigma2, state.pi});
    }
  }
  chain.last = std::move(state);
  return chain;
}

}  // namespace bass

#endif  // BASS_GIBBS_HPP_
