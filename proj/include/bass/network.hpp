// Observation-specific covariance from sparse factors, partial correlations
// and consensus edge sets over repeated fits.
#ifndef BASS_NETWORK_HPP_
#define BASS_NETWORK_HPP_

#include "bass/core.hpp"

#include <algorithm>
#include <vector>

namespace bass {

struct BlockCovariance {
  Matrix omega;                       // p_w x p_w
  std::vector<Eigen::Index> factors;  // columns used for B^w_s
  bool no_sparse_factors = false;     // omega is then diag(Sigma^w)
};

/// Omega^w = B B^T + Sigma^w where B holds the loadings (block w rows) of the
/// factors labelled Sparse in w and Inactive in every other block.
inline BlockCovariance observation_covariance(const ModelState& s, const FactorLabel& labels, Eigen::Index w) {
  if (w < 0 || w >= s.m()) throw InvalidInput("observation_covariance: block index out of range");
  if (labels.m() != s.m() || labels.k() != s.k()) throw DimensionError("observation_covariance: labels do not fit state");
  BlockCovariance out;
  for (Eigen::Index h = 0; h < s.k(); ++h) {
    if (labels(w, h) != Activity::kSparse) continue;
    bool specific = true;
    for (Eigen::Index v = 0; v < s.m(); ++v) {
      if (v != w && labels(v, h) != Activity::kInactive) specific = false;
    }
    if (specific) out.factors.push_back(h);
  }
  const auto begin = s.offsets[w], len = s.block_size(w);
  out.omega = Matrix::Zero(len, len);
  for (auto h : out.factors) {
    const Vector b = s.lambda.col(h).segment(begin, len);
    out.omega.noalias() += b * b.transpose();
  }
  out.omega.diagonal() += s.sigma2.segment(begin, len);
  out.no_sparse_factors = out.factors.empty();
  return out;
}

/// -r_ij / sqrt(r_ii r_jj) with R = Omega^{-1}; the diagonal comes out as -1.
inline Matrix partial_correlation(const Matrix& omega) {
  if (omega.rows() != omega.cols()) throw DimensionError("partial_correlation: matrix must be square");
  Eigen::LLT<Matrix> llt(omega);
  if (llt.info() != Eigen::Success) throw NumericFailure("partial_correlation: covariance is not positive definite");
  Matrix r = llt.solve(Matrix::Identity(omega.rows(), omega.cols()));
  r = 0.5 * (r + r.transpose()).eval();
  const Vector scale = r.diagonal().cwiseSqrt().cwiseInverse();
  Matrix out = -(scale.asDiagonal() * r * scale.asDiagonal());
  out.diagonal().setConstant(-1.0);
  return out;
}

struct Edge {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double weight = 0.0;            // median partial correlation over supporting runs
  double support_fraction = 0.0;  // share of runs where |rho_ij| > edge_thresh
};

struct EdgeList {
  Eigen::Index nodes = 0;
  double edge_thresh = 0.01;
  double min_frac = 0.5;
  std::size_t runs = 0;
  std::vector<Edge> edges;  // i < j, lexicographic
};

/// Keeps (i, j) when |rho_ij| > edge_thresh in at least min_frac of the runs
/// (ties at exactly min_frac are kept).
inline EdgeList consensus_network(const std::vector<Matrix>& runs, double edge_thresh = 0.01, double min_frac = 0.5) {
  if (runs.empty()) throw InvalidInput("consensus_network: no runs");
  if (!(min_frac >= 0.0 && min_frac <= 1.0) || !(edge_thresh >= 0.0)) {
    throw InvalidInput("consensus_network: bad thresholds");
  }
  const auto q = runs.front().rows();
  for (const auto& r : runs) {
    if (r.rows() != q || r.cols() != q) throw DimensionError("consensus_network: runs differ in size");
  }
  EdgeList out;
  out.nodes = q;
  out.edge_thresh = edge_thresh;
  out.min_frac = min_frac;
  out.runs = runs.size();
  const double total = static_cast<double>(runs.size());
  std::vector<double> present;
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i + 1; j < q; ++j) {
      present.clear();
      for (const auto& r : runs) {
        if (std::abs(r(i, j)) > edge_thresh) present.push_back(r(i, j));
      }
      const double frac = static_cast<double>(present.size()) / total;
      if (present.empty() || static_cast<double>(present.size()) < min_frac * total - 1e-9) continue;
      std::sort(present.begin(), present.end());
      const auto c = present.size();
      const double median = c % 2 == 1 ? present[c / 2] : 0.5 * (present[c / 2 - 1] + present[c / 2]);
      out.edges.push_back({i, j, median, frac});
    }
  }
  return out;
}

}  // namespace bass

#endif  // BASS_NETWORK_HPP_
