// EM for MAP estimation: E-step moments and responsibilities, closed-form
// M-step updates, factor pruning and the convergence loop.
#ifndef BASS_EM_HPP_
#define BASS_EM_HPP_

#include "bass/core.hpp"
#include "bass/model.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace bass {

struct EmConfig {
  int max_iter = 5000;
  double ll_tol = 1e-5;
  int window_t = 50;
  double prune_eps = 1e-4;
  Seed seed = 1;

  void validate() const {
    if (max_iter < 1) throw InvalidInput("EmConfig: max_iter must be at least 1");
    if (!(ll_tol > 0.0)) throw InvalidInput("EmConfig: ll_tol must be positive");
    if (window_t < 1) throw InvalidInput("EmConfig: window_t must be at least 1");
    if (prune_eps < 0.0) throw InvalidInput("EmConfig: prune_eps must be non-negative");
  }
};

struct FitReport {
  ModelState state;
  std::vector<double> log_posterior;  // after each iteration
  std::vector<Eigen::Index> k_trace;  // factor count after each iteration
  std::vector<int> pruned;            // columns dropped at each iteration
  int iterations = 0;
  bool converged = false;
  double wall_seconds = 0.0;
  Seed seed = 0;
  std::string initializer = "EM";
};

/// Posterior responsibilities rho^w_h = <z^w_h>, evaluated in log space, with
/// delta on the log scale as in log_posterior.
inline Matrix indicator_responsibilities(const ModelState& s) {
  Matrix rho(s.m(), s.k());
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const double log_pi = std::log(s.pi(w)), log_1m_pi = std::log1p(-s.pi(w));
    for (Eigen::Index h = 0; h < s.k(); ++h) {
      const double sparse = log_pi + log_sparse_branch_log_delta(s, w, h);
      const double dense = log_1m_pi + log_dense_branch(s, w, h);
      rho(w, h) = detail::logistic(sparse - dense);
    }
  }
  return rho;
}

/// Moments of X under its conditional Gaussian, plus responsibilities.
inline FactorMoments e_step(const ModelState& s, const GroupedDataset& data) {
  const auto k = s.k(), n = data.n();
  FactorMoments mom;
  mom.rho = indicator_responsibilities(s);
  if (k == 0) {
    mom.ex.resize(0, n);
    mom.exx.resize(0, 0);
    mom.sxy.resize(0, data.p());
    mom.cov.resize(0, 0);
    return mom;
  }
  const auto llt = detail::factor_precision(s.lambda, s.sigma2);
  mom.cov = llt.solve(Matrix::Identity(k, k));
  mom.cov = 0.5 * (mom.cov + mom.cov.transpose());
  mom.ex = llt.solve(s.lambda.transpose() * s.sigma2.cwiseInverse().asDiagonal() * data.y);
  mom.exx = mom.ex * mom.ex.transpose() + static_cast<double>(n) * mom.cov;
  mom.sxy = mom.ex * data.y.transpose();
  return mom;
}

/// Coordinate update of the loading columns h = 1..k in order:
/// lambda_h = (S^XX_hh I + Sigma D_h)^{-1} (S^YX_h - sum_{h' != h} lambda_h' S^XX_h'h)
/// with D_h = diag(rho / theta + (1 - rho) / phi).
inline void m_step_loading(ModelState& s, const FactorMoments& mom) {
  const auto rows = s.row_block();
  for (Eigen::Index h = 0; h < s.k(); ++h) {
    const double sxx_hh = mom.exx(h, h);
    Vector rhs = mom.sxy.row(h).transpose() - s.lambda * mom.exx.col(h) + s.lambda.col(h) * sxx_hh;
    for (Eigen::Index j = 0; j < s.p(); ++j) {
      const auto w = rows[static_cast<std::size_t>(j)];
      const double r = mom.rho(w, h);
      const double prior_prec = r / s.theta(j, h) + (1.0 - r) / s.phi(w, h);
      s.lambda(j, h) = rhs(j) / (sxx_hh + s.sigma2(j) * prior_prec);
    }
  }
}

namespace detail {

/// (lin + sqrt(lin^2 + q c0)) / q, rearranged to avoid cancellation when lin < 0.
inline double positive_root(double lin, double q, double c0) {
  const double disc = std::sqrt(lin * lin + q * c0);
  return lin >= 0.0 ? (lin + disc) / q : c0 / (disc - lin);
}

}  // namespace detail

/// Closed-form updates of Theta, Delta, Phi, T, eta, gamma, pi and Sigma,
/// in that order, each using the freshest values of the others.
inline void m_step_shrinkage(ModelState& s, const FactorMoments& mom, const GroupedDataset& data) {
  const auto& hp = s.hyper;
  const auto rows = s.row_block();
  const auto k = s.k();
  s.rho = mom.rho;

  // theta = (2a - 3 + sqrt((2a - 3)^2 + 8 lambda^2 delta)) / (4 delta)
  for (Eigen::Index h = 0; h < k; ++h) {
    for (Eigen::Index j = 0; j < s.p(); ++j) {
      const double de = s.delta(j, h), lam = s.lambda(j, h);
      const double th = detail::positive_root(2.0 * hp.a - 3.0, 4.0 * de, 2.0 * lam * lam);
      s.theta(j, h) = std::max(th, kVarianceFloor);
    }
  }
  // delta = (a + b) / (theta + phi)
  for (Eigen::Index h = 0; h < k; ++h) {
    for (Eigen::Index j = 0; j < s.p(); ++j) {
      const auto w = rows[static_cast<std::size_t>(j)];
      s.delta(j, h) = (hp.a + hp.b) / (s.theta(j, h) + s.phi(w, h));
    }
  }
  // phi = (p' - 1 + sqrt((p' - 1)^2 + a' b')) / a'
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const auto begin = s.offsets[w];
    const auto pw = static_cast<double>(s.block_size(w));
    for (Eigen::Index h = 0; h < k; ++h) {
      const double r = s.rho(w, h);
      const double pp = r * pw * hp.b - (1.0 - r) * pw / 2.0 + hp.c;
      const double ap = 2.0 * (r * s.delta.col(h).segment(begin, s.block_size(w)).sum() + s.tau(w, h));
      const double bp = (1.0 - r) * s.lambda.col(h).segment(begin, s.block_size(w)).squaredNorm();
      s.phi(w, h) = std::max(detail::positive_root(pp - 1.0, ap, bp), kVarianceFloor);
    }
  }
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    for (Eigen::Index h = 0; h < k; ++h) s.tau(w, h) = (hp.c + hp.d) / (s.phi(w, h) + s.eta(w));
  }
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    s.eta(w) = (hp.d * static_cast<double>(k) + hp.e) / (s.gamma(w) + s.tau.row(w).sum());
  }
  for (Eigen::Index w = 0; w < s.m(); ++w) s.gamma(w) = (hp.e + hp.f) / (s.eta(w) + hp.nu);
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const double pi = k > 0 ? s.rho.row(w).sum() / static_cast<double>(k) : 0.5;
    s.pi(w) = std::clamp(pi, kProbFloor, 1.0 - kProbFloor);
  }

  // sigma^-2 = (n/2 + a_sigma - 1) / (<||y_j - lambda_j X||^2> / 2 + b_sigma),
  // the expectation keeping the n lambda_j Cov lambda_j^T term
  const Matrix resid = k > 0 ? Matrix(data.y - s.lambda * mom.ex) : data.y;
  const double shape = 0.5 * static_cast<double>(data.n()) + hp.a_sigma - 1.0;
  for (Eigen::Index j = 0; j < s.p(); ++j) {
    double ss = resid.row(j).squaredNorm();
    if (k > 0) ss += static_cast<double>(data.n()) * s.lambda.row(j).dot(mom.cov * s.lambda.row(j).transpose());
    const double prec = shape / (0.5 * ss + hp.b_sigma);
    s.sigma2(j) = std::max(1.0 / prec, kVarianceFloor);
  }
}

/// Drops every column whose largest absolute loading is below eps, together
/// with its per-column shrinkage variables. Returns the number dropped.
inline int prune_factors(ModelState& s, double eps) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index h = 0; h < s.k(); ++h) {
    if (s.lambda.col(h).cwiseAbs().maxCoeff() >= eps) keep.push_back(h);
  }
  const int dropped = static_cast<int>(s.k() - static_cast<Eigen::Index>(keep.size()));
  if (dropped == 0) return 0;
  auto take = [&](auto& mat) {
    using M = std::decay_t<decltype(mat)>;
    M out(mat.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = mat.col(keep[i]);
    mat = std::move(out);
  };
  take(s.lambda);
  take(s.theta);
  take(s.delta);
  take(s.phi);
  take(s.tau);
  take(s.z);
  take(s.rho);
  return dropped;
}

/// Number of loadings with |lambda| > eps.
inline Eigen::Index count_nonzero_loadings(const ModelState& s, double eps) {
  return (s.lambda.array().abs() > eps).count();
}

/// One E-step followed by the full M-step (no pruning).
inline void em_iteration(ModelState& s, const GroupedDataset& data) {
  const FactorMoments mom = e_step(s, data);
  m_step_loading(s, mom);
  m_step_shrinkage(s, mom, data);
}

namespace detail {

/// Tracks the windowed stopping rule shared by the EM engines.
class ConvergenceMonitor {
 public:
  ConvergenceMonitor(int window, double tol) : window_(window), tol_(tol) {}

  bool update(double log_post, Eigen::Index nonzero) {
    lp_.push_back(log_post);
    nz_.push_back(nonzero);
    const auto t = lp_.size();
    if (t <= static_cast<std::size_t>(window_)) return false;
    for (std::size_t i = t - static_cast<std::size_t>(window_) - 1; i < t; ++i) {
      if (nz_[i] != nonzero) return false;
    }
    return std::abs(log_post - lp_[t - static_cast<std::size_t>(window_) - 1]) < tol_;
  }

 private:
  int window_;
  double tol_;
  std::vector<double> lp_;
  std::vector<Eigen::Index> nz_;
};

}  // namespace detail

/// Iterates e_step, m_step_loading, m_step_shrinkage and prune_factors until
/// the nonzero-loading count has been stable for window_t iterations and the
/// log posterior moved less than ll_tol over the same window, or max_iter.
inline FitReport run_em(ModelState state, const GroupedDataset& data, const EmConfig& cfg) {
  cfg.validate();
  state.validate();
  const auto start = std::chrono::steady_clock::now();
  FitReport report;
  report.seed = cfg.seed;
  detail::ConvergenceMonitor monitor(cfg.window_t, cfg.ll_tol);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    em_iteration(state, data);
    const int dropped = prune_factors(state, cfg.prune_eps);
    const double lp = log_posterior(state, data);
    report.log_posterior.push_back(lp);
    report.k_trace.push_back(state.k());
    report.pruned.push_back(dropped);
    report.iterations = it;
    if (monitor.update(lp, count_nonzero_loadings(state, cfg.prune_eps))) {
      report.converged = true;
      break;
    }
  }
  report.state = std::move(state);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace bass

#endif  // BASS_EM_HPP_
