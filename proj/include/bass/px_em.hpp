// Parameter-expanded EM. The factors are given covariance R, so the model is
// y = Lambda* x + e with x ~ N(0, R); the shrinkage prior sits on Lambda*.
// Each expanded iteration starts from R = I in the original space, fits
// Lambda* and R and maps back to Lambda = Lambda* R_L. After n_px_iter such
// iterations plain EM takes over.
#ifndef BASS_PX_EM_HPP_
#define BASS_PX_EM_HPP_

#include "bass/core.hpp"
#include "bass/em.hpp"
#include "bass/model.hpp"

#include <chrono>

namespace bass {

struct PxConfig {
  int n_px_iter = 20;
  EmConfig em;

  void validate() const {
    if (n_px_iter < 0) throw InvalidInput("PxConfig: n_px_iter must be non-negative");
    em.validate();
  }
};

inline constexpr double kRotationJitter = 1e-10;

/// R = S^XX / n, symmetrized. A jitter of 1e-10 I is added when the result
/// does not admit a Cholesky factorization.
inline Matrix update_rotation(const FactorMoments& mom, Eigen::Index n) {
  if (n < 1) throw InvalidInput("update_rotation: n must be positive");
  if (mom.exx.rows() != mom.exx.cols()) throw DimensionError("update_rotation: S^XX must be square");
  Matrix r = mom.exx / static_cast<double>(n);
  r = 0.5 * (r + r.transpose()).eval();
  if (r.size() > 0 && Eigen::LLT<Matrix>(r).info() != Eigen::Success) r.diagonal().array() += kRotationJitter;
  return r;
}

/// Lambda = Lambda* R_L with R_L the lower Cholesky factor of R.
inline Matrix apply_rotation(const Matrix& lambda_star, const Matrix& r) {
  if (r.rows() != r.cols() || r.cols() != lambda_star.cols()) throw DimensionError("apply_rotation: R must be k x k");
  if (r.size() == 0) return lambda_star;
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) {
    Matrix jittered = r;
    jittered.diagonal().array() += kRotationJitter;
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) throw NumericFailure("apply_rotation: R is not positive definite");
  }
  return lambda_star * Matrix(llt.matrixL());
}

/// One expanded iteration. With R = I at the start, the expanded M-step for
/// Lambda* and the shrinkage variables coincides with the EM M-step; then
/// R = S^XX / n and the loadings are mapped back, Lambda = Lambda* R_L. The
/// mapped loadings no longer match the theta, delta, phi fitted to Lambda*,
/// so a fresh E-step and shrinkage M-step follow on Lambda. Returns R.
/// With rotate == false this is em_iteration and R = I.
inline Matrix px_em_iteration(ModelState& s, const GroupedDataset& data, bool rotate = true) {
  const FactorMoments mom = e_step(s, data);
  m_step_loading(s, mom);
  m_step_shrinkage(s, mom, data);
  if (!rotate) return Matrix::Identity(s.k(), s.k());
  Matrix r = update_rotation(mom, data.n());
  s.lambda = apply_rotation(s.lambda, r);
  m_step_shrinkage(s, e_step(s, data), data);
  return r;
}

/// n_px_iter expanded iterations without pruning, then run_em from the
/// resulting state with every shrinkage variable carried over. The traces of
/// both phases are concatenated; n_px_iter = 0 is run_em.
inline FitReport run_px_em(ModelState state, const GroupedDataset& data, const PxConfig& cfg) {
  cfg.validate();
  state.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> lp;
  std::vector<Eigen::Index> ks;
  for (int it = 0; it < cfg.n_px_iter; ++it) {
    px_em_iteration(state, data);
    lp.push_back(log_posterior(state, data));
    ks.push_back(state.k());
  }
  FitReport report = run_em(std::move(state), data, cfg.em);
  if (cfg.n_px_iter > 0) {
    report.log_posterior.insert(report.log_posterior.begin(), lp.begin(), lp.end());
    report.k_trace.insert(report.k_trace.begin(), ks.begin(), ks.end());
    report.pruned.insert(report.pruned.begin(), static_cast<std::size_t>(cfg.n_px_iter), 0);
    report.iterations += cfg.n_px_iter;
    report.initializer = "PX-EM";
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace bass

#endif  // BASS_PX_EM_HPP_
