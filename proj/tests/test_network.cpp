#include "checks.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bass;

namespace {

// One 3-feature block plus a 2-feature block; only lambda, sigma2 and the
// offsets matter for the covariance.
ModelState two_blocks(const Matrix& lambda) {
  ModelState s;
  s.offsets = {0, 3, 5};
  s.lambda = lambda;
  s.sigma2 = Vector::Ones(5);
  return s;
}

Matrix symmetric_pd(Eigen::Index q, Seed seed) {
  const Matrix a = checks::random_matrix(q, q, seed);
  return a * a.transpose() + Matrix::Identity(q, q);
}

}  // namespace

TEST(ObservationCovariance, NoSparseFactorsGivesNoiseDiagonal) {
  Matrix lambda = Matrix::Ones(5, 2);
  ModelState s = two_blocks(lambda);
  s.sigma2 << 0.5, 1.5, 2.5, 3.0, 4.0;
  const auto cov = observation_covariance(s, FactorLabel::from_rows({"DD", "SD"}), 0);
  EXPECT_TRUE(cov.no_sparse_factors);
  EXPECT_TRUE(cov.factors.empty());
  EXPECT_EQ(cov.omega, Matrix(s.sigma2.head(3).asDiagonal()));
}

TEST(ObservationCovariance, SingleSpecificFactor) {
  Matrix lambda = Matrix::Zero(5, 1);
  lambda.col(0).head(3) << 1, 1, 0;
  const auto cov = observation_covariance(two_blocks(lambda), FactorLabel::from_rows({"S", "-"}), 0);
  Matrix expect(3, 3);
  expect << 2, 1, 0, 1, 2, 0, 0, 0, 1;
  EXPECT_EQ(cov.omega, expect);
  EXPECT_EQ(cov.factors, std::vector<Eigen::Index>{0});
}

TEST(ObservationCovariance, SharedSparseFactorExcluded) {
  // Sparse here but also loaded in block 2: not specific to block 1.
  Matrix lambda = Matrix::Ones(5, 1);
  const auto cov = observation_covariance(two_blocks(lambda), FactorLabel::from_rows({"S", "S"}), 0);
  EXPECT_TRUE(cov.no_sparse_factors);
}

TEST(ObservationCovariance, PositiveDefiniteOnFits) {
  auto [data, truth] = generate(builtin_spec("sim2", 40, 9));
  ModelState s = init_state(data, 6, HyperParams{}, 9);
  s.lambda = truth.lambda;
  s.sigma2 = truth.sigma2;
  for (Eigen::Index w = 0; w < s.m(); ++w) {
    const auto cov = observation_covariance(s, truth.activity, w);
    EXPECT_TRUE(cov.omega.isApprox(cov.omega.transpose()));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.omega);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(ObservationCovariance, BadBlockIndex) {
  const ModelState s = two_blocks(Matrix::Ones(5, 1));
  EXPECT_THROW(observation_covariance(s, FactorLabel::from_rows({"S", "-"}), 2), InvalidInput);
  EXPECT_THROW(observation_covariance(s, FactorLabel::from_rows({"S"}), 0), DimensionError);
}

TEST(PartialCorrelation, DiagonalHasNoEdges) {
  Vector d(4);
  d << 1.0, 2.0, 0.5, 3.0;
  const Matrix r = partial_correlation(Matrix(d.asDiagonal()));
  EXPECT_EQ(r.diagonal(), Vector::Constant(4, -1.0));
  Matrix off = r;
  off.diagonal().setZero();
  EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PartialCorrelation, TwoByTwoRecoversCorrelation) {
  for (double rho : {-0.7, 0.2, 0.55}) {
    Matrix c(2, 2);
    c << 1, rho, rho, 1;
    EXPECT_NEAR(partial_correlation(c)(0, 1), rho, 1e-14);
  }
}

TEST(PartialCorrelation, ChainHasNoEndToEndEdge) {
  // Precision of a 1-2-3 chain: r13 = 0.
  Matrix prec(3, 3);
  prec << 2, -0.8, 0, -0.8, 2, -0.6, 0, -0.6, 2;
  const Matrix r = partial_correlation(prec.inverse());
  EXPECT_NEAR(r(0, 2), 0.0, 1e-14);
  EXPECT_NEAR(r(0, 1), 0.8 / 2.0, 1e-14);
}

TEST(PartialCorrelation, SymmetricAndBounded) {
  const Matrix r = partial_correlation(symmetric_pd(8, 3));
  EXPECT_LT((r - r.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(r.cwiseAbs().maxCoeff(), 1.0 + 1e-14);
}

TEST(PartialCorrelation, IsolatedFeature) {
  Matrix omega = symmetric_pd(5, 4);
  omega.row(2).setZero();
  omega.col(2).setZero();
  omega(2, 2) = 1.7;
  const Matrix r = partial_correlation(omega);
  for (Eigen::Index j = 0; j < 5; ++j) {
    if (j != 2) {
      EXPECT_NEAR(r(2, j), 0.0, 1e-15);
    }
  }
}

TEST(PartialCorrelation, MatchesExplicitInverse) {
  EXPECT_LT(checks::metric_properties().partial_corr, 1e-12);
}

TEST(PartialCorrelation, RejectsIndefinite) {
  Matrix c(2, 2);
  c << 1, 2, 2, 1;
  EXPECT_THROW(partial_correlation(c), NumericFailure);
  EXPECT_THROW(partial_correlation(Matrix::Identity(2, 3)), DimensionError);
}

TEST(Consensus, SingleRunKeepsAboveThreshold) {
  Matrix r = -Matrix::Identity(3, 3);
  r(0, 1) = r(1, 0) = 0.3;
  r(1, 2) = r(2, 1) = 0.005;
  const auto net = consensus_network({r});
  ASSERT_EQ(net.edges.size(), 1u);
  EXPECT_EQ(net.edges[0].i, 0);
  EXPECT_EQ(net.edges[0].j, 1);
  EXPECT_EQ(net.edges[0].weight, 0.3);
  EXPECT_EQ(net.edges[0].support_fraction, 1.0);
}

TEST(Consensus, HalfSupportBoundary) {
  Matrix on = -Matrix::Identity(2, 2), off = on;
  on(0, 1) = on(1, 0) = 0.2;
  for (int support : {49, 50}) {
    std::vector<Matrix> runs(100, off);
    for (int i = 0; i < support; ++i) runs[static_cast<std::size_t>(i)] = on;
    EXPECT_EQ(consensus_network(runs).edges.size(), support == 50 ? 1u : 0u) << support;
  }
}

TEST(Consensus, MedianOverSupportingRuns) {
  std::vector<Matrix> runs;
  for (double v : {0.1, -0.4, 0.3, 0.0}) {
    Matrix r = -Matrix::Identity(2, 2);
    r(0, 1) = r(1, 0) = v;
    runs.push_back(r);
  }
  const auto net = consensus_network(runs);
  ASSERT_EQ(net.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(net.edges[0].weight, 0.1);
  EXPECT_DOUBLE_EQ(net.edges[0].support_fraction, 0.75);
}

TEST(Consensus, AllZeroIsEmpty) {
  const auto net = consensus_network(std::vector<Matrix>(5, Matrix::Zero(4, 4)));
  EXPECT_TRUE(net.edges.empty());
  EXPECT_EQ(net.nodes, 4);
}

TEST(Consensus, RejectsBadInput) {
  EXPECT_THROW(consensus_network({}), InvalidInput);
  EXPECT_THROW(consensus_network({Matrix::Zero(2, 2), Matrix::Zero(3, 3)}), DimensionError);
  EXPECT_THROW(consensus_network({Matrix::Zero(2, 2)}, 0.01, 1.5), InvalidInput);
}
