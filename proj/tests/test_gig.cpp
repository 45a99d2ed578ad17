#include "checks.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bass;

namespace {

double mean_of(double p, double a, double b, int draws, Seed seed) {
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += sample_gig(p, a, b, rng);
  return sum / draws;
}

}  // namespace

TEST(Gig, InverseGaussianMean) {
  EXPECT_NEAR(mean_of(-0.5, 1.0, 1.0, 100000, 1), 1.0, 0.01);
}

TEST(Gig, GammaLimitForTinyB) {
  EXPECT_NEAR(mean_of(1.0, 2.0, 1e-12, 100000, 2), 1.0, 0.02);
}

TEST(Gig, BesselMeanAtPZero) {
  const double want = oracle::gig_mean(0.0, 1.0, 1.0);
  EXPECT_NEAR(mean_of(0.0, 1.0, 1.0, 100000, 3), want, 0.01 * want);
}

TEST(Gig, RandomTriplesWithinThreeSe) {
  for (const auto& t : checks::gig_moment_checks(20, 100000, 77)) EXPECT_LT(t.mean_z, 3.0);
}

TEST(Gig, ExactZeroBoundaries) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(sample_gig(0.0, 1.0, 0.0, rng), InvalidInput);
  EXPECT_THROW(sample_gig(-1.0, 1.0, 0.0, rng), InvalidInput);
  EXPECT_THROW(sample_gig(1.0, -1.0, 1.0, rng), InvalidInput);
  EXPECT_THROW(sample_gig(NAN, 1.0, 1.0, rng), InvalidInput);
  EXPECT_GT(sample_gig(2.0, 1.0, 0.0, rng), 0.0);
  EXPECT_GT(sample_gig(-2.0, 0.0, 1.0, rng), 0.0);
}

TEST(Gig, TinyBStaysFiniteAndPositive) {
  std::mt19937_64 rng(5);
  for (double b : {1e-14, 1e-60, 1e-200}) {
    for (int i = 0; i < 1000; ++i) {
      const double x = sample_gig(0.0, 1.0, b, rng);
      ASSERT_TRUE(std::isfinite(x) && x > 0.0) << "b=" << b;
    }
  }
}

TEST(Gig, DensityNormalizes) {
  // log_gig_pdf integrates to one (trapezoid in log x)
  for (auto [p, a, b] : {std::tuple{-1.3, 0.7, 2.2}, std::tuple{0.4, 3.0, 0.2}, std::tuple{1.8, 1.1, 4.0}}) {
    double sum = 0.0;
    const double du = 1e-3;
    for (double u = -30.0; u <= 10.0; u += du) sum += std::exp(log_gig_pdf(std::exp(u), p, a, b) + u) * du;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}
