// Shared domain types for the BASS group factor model: grouped data,
// hyperparameters, the parameter state and E-step moments.
#ifndef BASS_CORE_HPP_
#define BASS_CORE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bass {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;
using Seed = std::uint64_t;

/// Raised when a caller breaks an input contract.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when matrix shapes disagree.
class DimensionError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Raised when a factorization or density evaluation breaks down numerically.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lower bound applied to variance-like quantities (Theta, Phi, SigmaDiag).
inline constexpr double kVarianceFloor = 1e-10;

/// Bound keeping mixture weights strictly inside (0, 1).
inline constexpr double kProbFloor = 1e-12;

/// Shape/rate pairs of the three-level Gamma chain plus the noise prior.
///
/// Local level:   theta ~ Ga(a, delta),  delta ~ Ga(b, phi)
/// Factor level:  phi   ~ Ga(c, tau),    tau   ~ Ga(d, eta)
/// Global level:  eta   ~ Ga(e, gamma),  gamma ~ Ga(f, nu)
/// Noise:         sigma^-2 ~ Ga(a_sigma, b_sigma)
///
/// a = b = ... = f = 1/2 gives the horseshoe at every level.
struct HyperParams {
  double a = 0.5;
  double b = 0.5;
  double c = 0.5;
  double d = 0.5;
  double e = 0.5;
  double f = 0.5;
  double nu = 1.0;
  double a_sigma = 1.0;
  double b_sigma = 0.3;

  void validate() const {
    for (double v : {a, b, c, d, e, f, nu, a_sigma, b_sigma}) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidInput("hyperparameters must be strictly positive and finite");
      }
    }
  }
};

/// m observation blocks sharing n samples, stored as one p x n matrix.
///
/// Block w occupies rows [offsets[w], offsets[w+1]) of `y`.
struct GroupedDataset {
  Matrix y;                          // p x n, rows are features
  std::vector<Eigen::Index> offsets; // m + 1 entries, offsets.back() == p

  Eigen::Index n() const { return y.cols(); }
  Eigen::Index p() const { return y.rows(); }
  Eigen::Index m() const { return static_cast<Eigen::Index>(offsets.size()) - 1; }
  Eigen::Index block_size(Eigen::Index w) const { return offsets[w + 1] - offsets[w]; }
  Eigen::Index block_begin(Eigen::Index w) const { return offsets[w]; }

  auto block(Eigen::Index w) const { return y.middleRows(offsets[w], block_size(w)); }

  /// Observation index that joint row j belongs to.
  std::vector<Eigen::Index> row_block() const {
    std::vector<Eigen::Index> out(static_cast<std::size_t>(p()));
    for (Eigen::Index w = 0; w < m(); ++w) {
      for (Eigen::Index j = offsets[w]; j < offsets[w + 1]; ++j) out[static_cast<std::size_t>(j)] = w;
    }
    return out;
  }
};

/// Stacks blocks (each p_w x n) vertically. Data are stored unmodified.
inline GroupedDataset assemble_dataset(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) throw InvalidInput("assemble_dataset: no blocks given");
  const Eigen::Index n = blocks.front().cols();
  Eigen::Index p = 0;
  for (const auto& b : blocks) {
    if (b.rows() == 0) throw InvalidInput("assemble_dataset: empty block");
    if (b.cols() != n) throw DimensionError("assemble_dataset: blocks disagree on sample count");
    p += b.rows();
  }
  GroupedDataset data;
  data.y.resize(p, n);
  data.offsets.reserve(blocks.size() + 1);
  data.offsets.push_back(0);
  for (const auto& b : blocks) {
    data.y.middleRows(data.offsets.back(), b.rows()) = b;
    data.offsets.push_back(data.offsets.back() + b.rows());
  }
  return data;
}

/// Every model parameter. Shapes for p features, m blocks, k factors:
///   lambda, theta, delta : p x k
///   phi, tau, z, rho     : m x k
///   eta, gamma, pi       : m
///   sigma2               : p   (residual variances, not precisions)
///
/// `z` holds the sampled indicators used by the Gibbs sampler; `rho` holds
/// the EM responsibilities <z>. Both are kept in step with k.
struct ModelState {
  HyperParams hyper;
  std::vector<Eigen::Index> offsets;

  Matrix lambda;
  Matrix theta;
  Matrix delta;
  Matrix phi;
  Matrix tau;
  Vector eta;
  Vector gamma;
  IntMatrix z;
  Matrix rho;
  Vector pi;
  Vector sigma2;

  Eigen::Index k() const { return lambda.cols(); }
  Eigen::Index p() const { return lambda.rows(); }
  Eigen::Index m() const { return static_cast<Eigen::Index>(offsets.size()) - 1; }
  Eigen::Index block_size(Eigen::Index w) const { return offsets[w + 1] - offsets[w]; }

  /// Throws DimensionError/InvalidInput when shapes or positivity are broken.
  void validate() const {
    const auto p_ = p(), k_ = k(), m_ = m();
    if (m_ < 1 || offsets.front() != 0 || offsets.back() != p_) {
      throw DimensionError("ModelState: block offsets do not cover the loading rows");
    }
    auto shape = [](const auto& mat, Eigen::Index r, Eigen::Index c, const char* name) {
      if (mat.rows() != r || mat.cols() != c) {
        throw DimensionError(std::string("ModelState: bad shape for ") + name);
      }
    };
    shape(theta, p_, k_, "theta");
    shape(delta, p_, k_, "delta");
    shape(phi, m_, k_, "phi");
    shape(tau, m_, k_, "tau");
    shape(z, m_, k_, "z");
    shape(rho, m_, k_, "rho");
    if (eta.size() != m_ || gamma.size() != m_ || pi.size() != m_ || sigma2.size() != p_) {
      throw DimensionError("ModelState: bad vector length");
    }
    auto positive = [](const auto& mat) { return mat.size() == 0 || (mat.array() > 0.0).all(); };
    if (!positive(theta) || !positive(delta) || !positive(phi) || !positive(tau) ||
        !positive(eta) || !positive(gamma) || !positive(sigma2)) {
      throw InvalidInput("ModelState: variance and rate parameters must be positive");
    }
    if (!((pi.array() > 0.0).all() && (pi.array() < 1.0).all())) {
      throw InvalidInput("ModelState: pi must lie in (0, 1)");
    }
    if (rho.size() > 0 && !((rho.array() >= 0.0).all() && (rho.array() <= 1.0).all())) {
      throw InvalidInput("ModelState: rho must lie in [0, 1]");
    }
  }

  /// Block index for every joint row.
  std::vector<Eigen::Index> row_block() const {
    std::vector<Eigen::Index> out(static_cast<std::size_t>(p()));
    for (Eigen::Index w = 0; w < m(); ++w) {
      for (Eigen::Index j = offsets[w]; j < offsets[w + 1]; ++j) out[static_cast<std::size_t>(j)] = w;
    }
    return out;
  }
};

/// Role of factor h in observation w.
enum class Activity : char { kSparse = 'S', kDense = 'D', kInactive = '-' };

/// m x k table of activities, row-major by block.
class FactorLabel {
 public:
  FactorLabel() = default;
  FactorLabel(Eigen::Index m, Eigen::Index k, Activity fill = Activity::kInactive)
      : m_(m), k_(k), cells_(static_cast<std::size_t>(m * k), fill) {}

  Eigen::Index m() const { return m_; }
  Eigen::Index k() const { return k_; }
  Activity& operator()(Eigen::Index w, Eigen::Index h) { return cells_[static_cast<std::size_t>(w * k_ + h)]; }
  Activity operator()(Eigen::Index w, Eigen::Index h) const { return cells_[static_cast<std::size_t>(w * k_ + h)]; }

  /// Activity pattern of factor h across blocks, e.g. "SS" or "D-".
  std::string column(Eigen::Index h) const {
    std::string out;
    for (Eigen::Index w = 0; w < m_; ++w) out.push_back(static_cast<char>((*this)(w, h)));
    return out;
  }
  /// Row w as text, one character per factor.
  std::string row(Eigen::Index w) const {
    std::string out;
    for (Eigen::Index h = 0; h < k_; ++h) out.push_back(static_cast<char>((*this)(w, h)));
    return out;
  }

  /// Builds a table from one string per block over the alphabet {S, D, -}.
  static FactorLabel from_rows(const std::vector<std::string>& rows) {
    if (rows.empty()) throw InvalidInput("FactorLabel: no rows");
    FactorLabel out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t w = 0; w < rows.size(); ++w) {
      if (static_cast<Eigen::Index>(rows[w].size()) != out.k_) throw DimensionError("FactorLabel: ragged rows");
      for (std::size_t h = 0; h < rows[w].size(); ++h) {
        const char c = rows[w][h];
        if (c != 'S' && c != 'D' && c != '-') throw InvalidInput(std::string("FactorLabel: bad symbol '") + c + "'");
        out(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(h)) = static_cast<Activity>(c);
      }
    }
    return out;
  }

  bool operator==(const FactorLabel&) const = default;

 private:
  Eigen::Index m_ = 0;
  Eigen::Index k_ = 0;
  std::vector<Activity> cells_;
};

/// E-step sufficient statistics.
struct FactorMoments {
  Matrix ex;   // k x n, <x_i> in columns
  Matrix exx;  // k x k, S^XX = sum_i <x_i x_i^T>
  Matrix sxy;  // k x p, S^XY = sum_i <x_i> y_i^T
  Matrix cov;  // k x k, shared posterior covariance of each x_i
  Matrix rho;  // m x k
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// Logistic of a log-odds value without overflow.
inline double logistic(double log_odds) {
  if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
  const double e = std::exp(log_odds);
  return e / (1.0 + e);
}

}  // namespace detail

/// log N(x; 0, var)
inline double log_normal_pdf(double x, double var) {
  return -0.5 * (detail::kLog2Pi + std::log(var) + x * x / var);
}

/// log Ga(x; shape, rate)
inline double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// log Beta(x; alpha, beta)
inline double log_beta_pdf(double x, double alpha, double beta) {
  return std::lgamma(alpha + beta) - std::lgamma(alpha) - std::lgamma(beta) +
         (alpha - 1.0) * std::log(x) + (beta - 1.0) * std::log1p(-x);
}

/// log GIG(x; p, a, b), density proportional to x^(p-1) exp(-(a x + b / x) / 2).
inline double log_gig_pdf(double x, double p, double a, double b) {
  const double omega = std::sqrt(a * b);
  const double log_norm = 0.5 * p * std::log(a / b) - std::log(2.0 * std::cyl_bessel_k(std::abs(p), omega));
  return log_norm + (p - 1.0) * std::log(x) - 0.5 * (a * x + b / x);
}

}  // namespace bass

#endif  // BASS_CORE_HPP_
