// Synthetic group-factor data with known loadings, for the six built-in
// regimes or any user-declared activity table.
#ifndef BASS_SIMULATE_HPP_
#define BASS_SIMULATE_HPP_

#include "bass/core.hpp"

#include <cctype>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace bass {

struct SimSpec {
  std::vector<Eigen::Index> block_dims;
  Eigen::Index k = 0;
  FactorLabel activity;  // m x k
  double sparsity_frac = 0.9;
  double loading_sd = 2.0;
  double zero_clip = 0.5;
  double noise_low = 0.5;
  double noise_high = 1.5;
  Eigen::Index n = 0;
  Seed seed = 1;

  Eigen::Index m() const { return static_cast<Eigen::Index>(block_dims.size()); }
  Eigen::Index p() const {
    Eigen::Index out = 0;
    for (auto d : block_dims) out += d;
    return out;
  }

  void validate() const {
    if (block_dims.empty()) throw InvalidInput("SimSpec: no blocks");
    for (auto d : block_dims) {
      if (d < 1) throw InvalidInput("SimSpec: block dimensions must be positive");
    }
    if (k < 1) throw InvalidInput("SimSpec: k must be positive");
    if (activity.m() != m() || activity.k() != k) throw DimensionError("SimSpec: activity table must be m x k");
    if (!(sparsity_frac >= 0.0 && sparsity_frac < 1.0)) throw InvalidInput("SimSpec: sparsity_frac must lie in [0, 1)");
    if (!(loading_sd > 0.0) || !(zero_clip >= 0.0)) throw InvalidInput("SimSpec: bad loading scale");
    if (!(noise_low > 0.0 && noise_high >= noise_low)) throw InvalidInput("SimSpec: noise range must be positive");
    if (n < 1) throw InvalidInput("SimSpec: n must be positive");
  }
};

struct GroundTruth {
  Matrix lambda;       // p x k
  FactorLabel activity;
  Matrix x;            // k x n
  Vector sigma2;       // p
  std::vector<Eigen::Index> offsets;
};

/// Sim1..Sim6 (case-insensitive id). Throws InvalidInput for other ids.
inline SimSpec builtin_spec(const std::string& id, Eigen::Index n, Seed seed) {
  std::string key;
  for (char c : id) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  SimSpec spec;
  std::vector<std::string> rows;
  if (key == "sim1") {
    spec.block_dims = {100, 120};
    rows = {"SSSS--",
            "SS--SS"};
  } else if (key == "sim2") {
    spec.block_dims = {100, 120};
    rows = {"SDSSD---",
            "SD---SSD"};
  } else if (key == "sim3") {
    spec.block_dims = {70, 60, 50, 40};
    rows = {"S--S--",
            "-S-SSS",
            "--S-SS",
            "-----S"};
  } else if (key == "sim4") {
    spec.block_dims = {70, 60, 50, 40};
    rows = {"S---D---",
            "-S-S-D--",
            "--SS--D-",
            "--S----D"};
  } else if (key == "sim5") {
    spec.block_dims.assign(10, 50);
    rows = {"S-------",
            "S--S----",
            "S--SS---",
            "SS-SS-S-",
            "-S-SS-S-",
            "-S----SS",
            "--S---SS",
            "--S---SS",
            "--S----S",
            "--S--S--"};
  } else if (key == "sim6") {
    spec.block_dims.assign(10, 50);
    rows = {"S-----D---",
            "S--S--D---",
            "---S--DD--",
            "-S-S--DD--",
            "-S-SS--DD-",
            "-S--S--DD-",
            "-SS-S---DD",
            "--S-S---DD",
            "--S------D",
            "--S--S---D"};
  } else {
    throw InvalidInput("unknown builtin simulation '" + id + "'");
  }
  spec.activity = FactorLabel::from_rows(rows);
  spec.k = spec.activity.k();
  spec.n = n;
  spec.seed = seed;
  return spec;
}

namespace detail {

inline std::vector<Eigen::Index> offsets_of(const std::vector<Eigen::Index>& dims) {
  std::vector<Eigen::Index> off{0};
  for (auto d : dims) off.push_back(off.back() + d);
  return off;
}

inline Matrix draw_normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = normal(rng);
  }
  return out;
}

/// Y = Lambda X + E with X ~ N(0, I) and E_j ~ N(0, sigma2_j).
inline GroupedDataset draw_observations(const Matrix& lambda, const Vector& sigma2,
                                        const std::vector<Eigen::Index>& offsets, Eigen::Index n,
                                        std::mt19937_64& rng, Matrix* x_out) {
  Matrix x = draw_normal_matrix(lambda.cols(), n, 1.0, rng);
  Matrix e = draw_normal_matrix(lambda.rows(), n, 1.0, rng);
  e = sigma2.cwiseSqrt().asDiagonal() * e;
  GroupedDataset data;
  data.y = lambda * x + e;
  data.offsets = offsets;
  if (x_out) *x_out = std::move(x);
  return data;
}

}  // namespace detail

/// Draws loadings, noise variances, factors and observations from `spec`.
///
/// Sparse block columns: N(0, sd^2) entries, ceil(sparsity_frac * p_w) of them
/// set to zero at random, then every entry with |lambda| < zero_clip zeroed.
/// Dense block columns are N(0, sd^2) throughout; inactive ones are zero.
inline std::pair<GroupedDataset, GroundTruth> generate(const SimSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, spec.loading_sd);
  const auto offsets = detail::offsets_of(spec.block_dims);

  GroundTruth truth;
  truth.activity = spec.activity;
  truth.offsets = offsets;
  truth.lambda = Matrix::Zero(spec.p(), spec.k);
  for (Eigen::Index h = 0; h < spec.k; ++h) {
    for (Eigen::Index w = 0; w < spec.m(); ++w) {
      const auto act = spec.activity(w, h);
      if (act == Activity::kInactive) continue;
      const auto pw = spec.block_dims[static_cast<std::size_t>(w)];
      auto col = truth.lambda.col(h).segment(offsets[static_cast<std::size_t>(w)], pw);
      for (Eigen::Index j = 0; j < pw; ++j) col(j) = normal(rng);
      if (act == Activity::kSparse) {
        const auto n_zero = static_cast<Eigen::Index>(std::ceil(spec.sparsity_frac * static_cast<double>(pw)));
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(pw));
        for (Eigen::Index j = 0; j < pw; ++j) idx[static_cast<std::size_t>(j)] = j;
        // partial Fisher-Yates: the first n_zero slots form a uniform subset
        for (Eigen::Index j = 0; j < n_zero; ++j) {
          std::uniform_int_distribution<Eigen::Index> pick(j, pw - 1);
          std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick(rng))]);
          col(idx[static_cast<std::size_t>(j)]) = 0.0;
        }
        for (Eigen::Index j = 0; j < pw; ++j) {
          if (std::abs(col(j)) < spec.zero_clip) col(j) = 0.0;
        }
      }
    }
  }
  std::uniform_real_distribution<double> unif(spec.noise_low, spec.noise_high);
  truth.sigma2.resize(spec.p());
  for (Eigen::Index j = 0; j < spec.p(); ++j) truth.sigma2(j) = spec.noise_low == spec.noise_high ? spec.noise_low : unif(rng);

  GroupedDataset data = detail::draw_observations(truth.lambda, truth.sigma2, offsets, spec.n, rng, &truth.x);
  return {std::move(data), std::move(truth)};
}

/// Fresh samples from the true model: same loadings and noise variances,
/// new factors and noise.
inline GroupedDataset generate_test(const GroundTruth& truth, Eigen::Index n_test, Seed seed,
                                    Matrix* x_out = nullptr) {
  if (n_test < 1) throw InvalidInput("generate_test: n_test must be positive");
  std::mt19937_64 rng(seed);
  return detail::draw_observations(truth.lambda, truth.sigma2, truth.offsets, n_test, rng, x_out);
}

}  // namespace bass

#endif  // BASS_SIMULATE_HPP_
