// Scoring of recovered loadings: stability indices, factor labels, matching
// against ground truth, held-out prediction and variance explained.
#ifndef BASS_METRICS_HPP_
#define BASS_METRICS_HPP_

#include "bass/core.hpp"
#include "bass/simulate.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>
#include <vector>

namespace bass {

/// |corr| between every column of a (p x k1) and of b (p x k2). Columns with
/// zero variance correlate 0 with everything.
inline Matrix abs_column_correlation(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("abs_column_correlation: row counts differ");
  auto standardize = [](const Matrix& m) {
    Matrix out = m.rowwise() - m.colwise().mean();
    for (Eigen::Index h = 0; h < out.cols(); ++h) {
      const double norm = out.col(h).norm();
      if (norm > 0.0) {
        out.col(h) /= norm;
      } else {
        out.col(h).setZero();
      }
    }
    return out;
  };
  Matrix c = (standardize(a).transpose() * standardize(b)).cwiseAbs();
  return c.cwiseMin(1.0);
}

/// Sparse stability index. For each row of C the score is its maximum minus
/// the mass of entries strictly above the row mean divided by (k2 - 1), and
/// symmetrically for columns; the two averages are halved and summed. The
/// maximum itself is part of that penalty sum. A single column on the other
/// side makes the penalty 0/0, taken as 0.
inline double ssi(const Matrix& l1, const Matrix& l2) {
  if (l1.rows() != l2.rows()) throw DimensionError("ssi: loading matrices must share p");
  if (l1.cols() == 0 || l2.cols() == 0) throw InvalidInput("ssi: empty loading matrix");
  const Matrix c = abs_column_correlation(l1, l2);
  const auto k1 = c.rows(), k2 = c.cols();
  double rows = 0.0;
  for (Eigen::Index i = 0; i < k1; ++i) {
    const auto r = c.row(i);
    const double mean = r.mean();
    double excess = 0.0;
    for (Eigen::Index j = 0; j < k2; ++j) {
      if (r(j) > mean) excess += r(j);
    }
    rows += r.maxCoeff() - (k2 > 1 ? excess / static_cast<double>(k2 - 1) : 0.0);
  }
  double cols = 0.0;
  for (Eigen::Index j = 0; j < k2; ++j) {
    const auto col = c.col(j);
    const double mean = col.mean();
    double excess = 0.0;
    for (Eigen::Index i = 0; i < k1; ++i) {
      if (col(i) > mean) excess += col(i);
    }
    cols += col.maxCoeff() - (k1 > 1 ? excess / static_cast<double>(k1 - 1) : 0.0);
  }
  return rows / (2.0 * static_cast<double>(k1)) + cols / (2.0 * static_cast<double>(k2));
}

/// Dense stability index |tr(M1 M1^T - M2 M2^T)| / p^2.
inline double dsi(const Matrix& m1, const Matrix& m2) {
  if (m1.rows() != m2.rows()) throw DimensionError("dsi: matrices must share p");
  const auto p = static_cast<double>(m1.rows());
  if (p == 0.0) return 0.0;
  return std::abs(m1.squaredNorm() - m2.squaredNorm()) / (p * p);
}

/// Labels from a BASS fit: (w, h) is Inactive when max |lambda| over block w
/// is at most eps, otherwise Sparse when rho^w_h > 0.5 and Dense when not.
inline FactorLabel classify_factors(const ModelState& s, double eps = 1e-4) {
  FactorLabel out(s.m(), s.k());
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    for (Eigen::Index h = 0; h < s.k(); ++h) {
      const auto blk = s.lambda.col(h).segment(s.offsets[w], s.block_size(w));
      if (blk.size() == 0 || blk.cwiseAbs().maxCoeff() <= eps) {
        out(w, h) = Activity::kInactive;
      } else {
        out(w, h) = s.rho(w, h) > 0.5 ? Activity::kSparse : Activity::kDense;
      }
    }
  }
  return out;
}

/// Columns of `lambda` (rows of block w) whose label in block w is `act`.
inline Matrix block_columns(const Matrix& lambda, const FactorLabel& labels, const std::vector<Eigen::Index>& off,
                            Eigen::Index w, Activity act) {
  if (w < 0 || w + 1 >= static_cast<Eigen::Index>(off.size())) throw InvalidInput("block_columns: bad block index");
  if (labels.k() != lambda.cols()) throw DimensionError("block_columns: labels do not fit lambda");
  std::vector<Eigen::Index> cols;
  for (Eigen::Index h = 0; h < labels.k(); ++h) {
    if (labels(w, h) == act) cols.push_back(h);
  }
  const auto begin = off[static_cast<std::size_t>(w)], len = off[static_cast<std::size_t>(w) + 1] - begin;
  Matrix out(len, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = lambda.col(cols[c]).segment(begin, len);
  return out;
}

struct ThresholdLabels {
  FactorLabel labels;
  std::vector<Eigen::Index> sparse_cols;  // by increasing nonzero count
  std::vector<Eigen::Index> dense_cols;
  Matrix thresholded;                     // |lambda| < thresh set to 0
};

/// Method-agnostic labelling: loadings below global_thresh in absolute value
/// are zeroed, the n_sparse columns with the fewest remaining nonzeros are
/// called sparse and the rest dense. A sparse column is Sparse in blocks
/// where it keeps a nonzero after thresholding; a dense column is Dense in
/// blocks where its unthresholded loadings exceed eps.
inline ThresholdLabels classify_by_threshold(const Matrix& lambda, const std::vector<Eigen::Index>& offsets,
                                             Eigen::Index n_sparse, double global_thresh = 0.15,
                                             double eps = 1e-4) {
  const auto k = lambda.cols();
  if (n_sparse < 0 || n_sparse > k) throw InvalidInput("classify_by_threshold: sparse count exceeds k");
  if (offsets.size() < 2 || offsets.back() != lambda.rows()) throw DimensionError("classify_by_threshold: bad offsets");
  const auto m = static_cast<Eigen::Index>(offsets.size()) - 1;
  ThresholdLabels out;
  out.thresholded = (lambda.array().abs() < global_thresh).select(0.0, lambda);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::Index> nnz(static_cast<std::size_t>(k));
  for (Eigen::Index h = 0; h < k; ++h) nnz[static_cast<std::size_t>(h)] = (out.thresholded.col(h).array() != 0.0).count();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return nnz[static_cast<std::size_t>(x)] < nnz[static_cast<std::size_t>(y)];
  });
  out.sparse_cols.assign(order.begin(), order.begin() + n_sparse);
  out.dense_cols.assign(order.begin() + n_sparse, order.end());

  out.labels = FactorLabel(m, k);
  for (Eigen::Index w = 0; w < m; ++w) {
    const auto begin = offsets[static_cast<std::size_t>(w)];
    const auto len = offsets[static_cast<std::size_t>(w) + 1] - begin;
    for (auto h : out.sparse_cols) {
      if ((out.thresholded.col(h).segment(begin, len).array() != 0.0).any()) out.labels(w, h) = Activity::kSparse;
    }
    for (auto h : out.dense_cols) {
      if (len > 0 && lambda.col(h).segment(begin, len).cwiseAbs().maxCoeff() > eps) out.labels(w, h) = Activity::kDense;
    }
  }
  return out;
}

struct FactorMatch {
  Eigen::Index truth = 0;
  Eigen::Index estimate = 0;
  double abs_corr = 0.0;
};

/// Greedy one-to-one matching of true to estimated columns by descending
/// |corr|. Returns one entry per matched pair (min(k_true, k_est) of them).
inline std::vector<FactorMatch> match_factors(const Matrix& truth, const Matrix& estimate) {
  const Matrix c = abs_column_correlation(truth, estimate);
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index t = 0; t < c.rows(); ++t) {
    for (Eigen::Index e = 0; e < c.cols(); ++e) pairs.emplace_back(c(t, e), t, e);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
  std::vector<bool> used_t(static_cast<std::size_t>(c.rows())), used_e(static_cast<std::size_t>(c.cols()));
  std::vector<FactorMatch> out;
  for (const auto& [corr, t, e] : pairs) {
    if (used_t[static_cast<std::size_t>(t)] || used_e[static_cast<std::size_t>(e)]) continue;
    used_t[static_cast<std::size_t>(t)] = used_e[static_cast<std::size_t>(e)] = true;
    out.push_back({t, e, corr});
  }
  return out;
}

/// Fraction of true factors that are identified: matched (greedily) with
/// |corr| >= corr_thresh and carrying exactly the true activity pattern.
inline double recovery_rate(const Matrix& est_lambda, const FactorLabel& est_labels, const GroundTruth& truth,
                            double corr_thresh = 0.9) {
  if (est_lambda.rows() != truth.lambda.rows()) throw DimensionError("recovery_rate: p differs from truth");
  if (est_labels.k() != est_lambda.cols() || est_labels.m() != truth.activity.m()) {
    throw DimensionError("recovery_rate: label table does not fit the estimate");
  }
  const auto k_true = truth.lambda.cols();
  if (k_true == 0) return 1.0;
  int hits = 0;
  for (const auto& mt : match_factors(truth.lambda, est_lambda)) {
    if (mt.abs_corr >= corr_thresh && est_labels.column(mt.estimate) == truth.activity.column(mt.truth)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k_true);
}

/// E(y^w | y^{-w}) for every column of `data`, with the rows of block w
/// ignored: Lambda^w M^{-1} (Lambda^{-w})^T (Sigma^{-w})^{-1} y^{-w} where
/// M = I + (Lambda^{-w})^T (Sigma^{-w})^{-1} Lambda^{-w}.
inline Matrix predict_block(const ModelState& s, const GroupedDataset& data, Eigen::Index w) {
  if (w < 0 || w >= s.m()) throw InvalidInput("predict_block: block index out of range");
  if (data.offsets != s.offsets) throw DimensionError("predict_block: data blocks do not match the fit");
  const auto begin = s.offsets[w], len = s.block_size(w), k = s.k(), p = s.p();
  std::vector<Eigen::Index> rest;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (j < begin || j >= begin + len) rest.push_back(j);
  }
  const auto r = static_cast<Eigen::Index>(rest.size());
  if (k == 0 || r == 0) return Matrix::Zero(len, data.n());
  Matrix lam_rest(r, k), y_rest(r, data.n());
  Vector sig_rest(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    lam_rest.row(i) = s.lambda.row(rest[static_cast<std::size_t>(i)]);
    y_rest.row(i) = data.y.row(rest[static_cast<std::size_t>(i)]);
    sig_rest(i) = s.sigma2(rest[static_cast<std::size_t>(i)]);
  }
  const auto llt = detail::factor_precision(lam_rest, sig_rest);
  const Matrix scores = llt.solve(lam_rest.transpose() * sig_rest.cwiseInverse().asDiagonal() * y_rest);
  return s.lambda.middleRows(begin, len) * scores;
}

/// Mean of squared entrywise differences.
inline double mse(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw DimensionError("mse: shapes differ");
  if (pred.size() == 0) return 0.0;
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

/// Share of tr(Lambda Lambda^T + Sigma) carried by each factor.
inline Vector pve(const ModelState& s) {
  const double total = s.lambda.squaredNorm() + s.sigma2.sum();
  Vector out(s.k());
  for (Eigen::Index h = 0; h < s.k(); ++h) out(h) = s.lambda.col(h).squaredNorm() / total;
  return out;
}

/// Per-feature centring and scaling fitted on one dataset and reusable on
/// another with the same layout.
struct Standardizer {
  Vector mean;
  Vector sd;

  static Standardizer fit(const GroupedDataset& data) {
    Standardizer out;
    out.mean = data.y.rowwise().mean();
    const auto n = static_cast<double>(data.n());
    out.sd.resize(data.p());
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      const double ss = (data.y.row(j).array() - out.mean(j)).square().sum();
      const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      out.sd(j) = sd > 0.0 ? sd : 1.0;
    }
    return out;
  }

  GroupedDataset apply(const GroupedDataset& data) const {
    if (data.p() != mean.size()) throw DimensionError("Standardizer: feature count differs");
    GroupedDataset out = data;
    out.y = (data.y.colwise() - mean).array().colwise() / sd.array();
    return out;
  }
};

}  // namespace bass

#endif  // BASS_METRICS_HPP_
