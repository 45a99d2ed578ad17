#include "checks.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

using namespace bass;

namespace {

// 4 features in two blocks of 2, 2 factors, 6 samples.
std::pair<ModelState, GroupedDataset> small_instance() {
  ModelState s;
  s.offsets = {0, 2, 4};
  s.lambda = checks::random_matrix(4, 2, 41);
  s.theta = (checks::random_matrix(4, 2, 42).array().abs() + 0.3).matrix();
  s.delta = (checks::random_matrix(4, 2, 43).array().abs() + 0.2).matrix();
  s.phi = (checks::random_matrix(2, 2, 44).array().abs() + 0.5).matrix();
  s.tau = Matrix::Constant(2, 2, 0.8);
  s.eta = Vector::Constant(2, 1.3);
  s.gamma = Vector::Constant(2, 0.7);
  s.z = IntMatrix::Ones(2, 2);
  s.rho = Matrix::Constant(2, 2, 0.5);
  s.pi = Vector::Constant(2, 0.4);
  s.sigma2 = Vector::Constant(4, 0.9);
  GroupedDataset d;
  d.offsets = s.offsets;
  d.y = checks::random_matrix(4, 6, 45);
  return {s, d};
}

ModelState one_block(Eigen::Index p, Eigen::Index k) {
  ModelState s;
  s.offsets = {0, p};
  s.lambda = Matrix::Zero(p, k);
  s.theta = Matrix::Ones(p, k);
  s.delta = Matrix::Ones(p, k);
  s.phi = Matrix::Ones(1, k);
  s.tau = Matrix::Ones(1, k);
  s.eta = Vector::Ones(1);
  s.gamma = Vector::Ones(1);
  s.z = IntMatrix::Ones(1, k);
  s.rho = Matrix::Constant(1, k, 0.5);
  s.pi = Vector::Constant(1, 0.5);
  s.sigma2 = Vector::Ones(p);
  return s;
}

}  // namespace

TEST(EStep, ZeroLoadings) {
  ModelState s = one_block(3, 2);
  const auto d = assemble_dataset({checks::random_matrix(3, 7, 1)});
  const FactorMoments mom = e_step(s, d);
  EXPECT_EQ(mom.ex, Matrix::Zero(2, 7));
  EXPECT_LT((mom.exx - 7.0 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EStep, ScalarByHand) {
  ModelState s = one_block(1, 1);
  s.lambda(0, 0) = 1.0;
  const auto d = assemble_dataset({Matrix::Constant(1, 1, 2.0)});
  const FactorMoments mom = e_step(s, d);
  EXPECT_NEAR(mom.ex(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(mom.exx(0, 0), 1.5, 1e-15);
}

TEST(EStep, MomentsAgainstMonteCarlo) {
  const auto r = checks::estep_vs_monte_carlo();
  EXPECT_LT(r.max_z, 3.0);
  EXPECT_GT(r.compared, 0);
}

TEST(EStep, SecondMomentsArePsd) {
  auto [s, d] = small_instance();
  const FactorMoments mom = e_step(s, d);
  Eigen::SelfAdjointEigenSolver<Matrix> a(mom.exx), b(mom.exx - mom.ex * mom.ex.transpose());
  EXPECT_GT(a.eigenvalues().minCoeff(), -1e-12);
  EXPECT_GT(b.eigenvalues().minCoeff(), -1e-12);
}

TEST(EStep, ResponsibilityByDirectDensities) {
  ModelState s = one_block(2, 1);
  s.lambda << 40.0, -25.0;
  s.theta << 1e-3, 2e-3;
  s.delta << 1.5, 0.7;
  s.phi(0, 0) = 3.0;
  s.pi(0) = 0.3;
  double sparse = std::log(0.3), dense = std::log(0.7);
  const auto& hp = s.hyper;
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double lam = s.lambda(j, 0), th = s.theta(j, 0), de = s.delta(j, 0);
    sparse += checks::log_normal_density(lam, th) + checks::log_gamma_density(th, hp.a, de) +
              checks::log_gamma_density(de, hp.b, 3.0) + std::log(de);
    dense += checks::log_normal_density(lam, 3.0);
  }
  const double want = 1.0 / (1.0 + std::exp(dense - sparse));
  EXPECT_NEAR(indicator_responsibilities(s)(0, 0), want, 1e-12);
  EXPECT_TRUE(std::isfinite(indicator_responsibilities(s)(0, 0)));
}

TEST(MStepLoading, LeastSquaresLimit) {
  ModelState s = one_block(5, 2);
  s.theta.setConstant(1e300);
  s.rho.setOnes();
  FactorMoments mom;
  mom.exx = 10.0 * Matrix::Identity(2, 2);
  mom.sxy = checks::random_matrix(2, 5, 3);
  mom.rho = s.rho;
  m_step_loading(s, mom);
  EXPECT_LT((s.lambda - mom.sxy.transpose() / 10.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MStepLoading, InfiniteShrinkage) {
  ModelState s = one_block(5, 2);
  s.theta.setConstant(1e-200);
  s.phi.setConstant(1e-200);
  FactorMoments mom;
  mom.exx = 10.0 * Matrix::Identity(2, 2);
  mom.sxy = checks::random_matrix(2, 5, 3);
  mom.rho = s.rho;
  m_step_loading(s, mom);
  EXPECT_LT(s.lambda.cwiseAbs().maxCoeff(), 1e-150);
}

TEST(MStepShrinkage, ThetaByHandAndGrid) {
  ModelState s = one_block(1, 1);
  s.lambda(0, 0) = 1.0;
  auto d = assemble_dataset({Matrix::Ones(1, 3)});
  m_step_shrinkage(s, e_step(s, d), d);
  const double want = (-2.0 + 2.0 * std::sqrt(3.0)) / 4.0;
  EXPECT_NEAR(s.theta(0, 0), want, 1e-12);
  // theta^(a - 3/2) exp(-delta theta - lambda^2 / (2 theta)) on a grid
  double best = 0.0, best_v = -1e300;
  for (double t = 1e-3; t < 3.0; t += 1e-5) {
    const double v = -1.0 * std::log(t) - t - 1.0 / (2.0 * t);
    if (v > best_v) {
      best_v = v;
      best = t;
    }
  }
  EXPECT_NEAR(s.theta(0, 0), best, 1e-4);
}

TEST(MStepShrinkage, ThetaFloorAtZeroLoading) {
  ModelState s = one_block(1, 1);
  auto d = assemble_dataset({Matrix::Ones(1, 3)});
  m_step_shrinkage(s, e_step(s, d), d);
  EXPECT_EQ(s.theta(0, 0), kVarianceFloor);
}

TEST(MStepShrinkage, PiIsMeanResponsibility) {
  ModelState s = one_block(2, 5);
  s.lambda.setOnes();
  auto d = assemble_dataset({Matrix::Ones(2, 3)});
  FactorMoments mom = e_step(s, d);
  mom.rho << 1, 0, 1, 0, 1;
  m_step_shrinkage(s, mom, d);
  EXPECT_NEAR(s.pi(0), 0.6, 1e-15);
}

TEST(MStep, StationaryAtEveryClosedForm) {
  auto [s, d] = small_instance();
  for (const auto& g : checks::mstep_gradients(s, d)) EXPECT_LT(g.value, 1e-4) << g.name;
  for (const auto& g : checks::mstep_gradients(oracle::tiny_state(), oracle::tiny_data())) EXPECT_LT(g.value, 1e-4) << g.name;
  auto [mid, data] = checks::sim1_midrun_state();
  for (const auto& g : checks::mstep_gradients(mid, data)) EXPECT_LT(g.value, 1e-4) << g.name;
}

TEST(MStep, PhiBothBranches) {
  auto [s, d] = small_instance();
  for (double r : {0.0, 1.0}) {
    ModelState t = s;
    t.pi.setConstant(r == 1.0 ? 1.0 - 1e-12 : 1e-12);
    for (const auto& g : checks::mstep_gradients(t, d)) {
      if (g.name == "phi") {
        EXPECT_LT(g.value, 1e-4) << "rho=" << r;
      }
    }
  }
}

TEST(Prune, DropsZeroColumn) {
  auto [s, d] = small_instance();
  s.lambda.col(1).setZero();
  EXPECT_EQ(prune_factors(s, 1e-4), 1);
  EXPECT_EQ(s.k(), 1);
  EXPECT_NO_THROW(s.validate());
}

TEST(Prune, ZeroEpsKeepsEverything) {
  auto [s, d] = small_instance();
  s.lambda.col(1).setZero();
  EXPECT_EQ(prune_factors(s, 0.0), 0);
  EXPECT_EQ(s.k(), 2);
}

TEST(Prune, LikelihoodBarelyMoves) {
  auto [s, d] = small_instance();
  s.lambda.col(0) *= 1e-5;
  const double before = log_likelihood(s, d);
  prune_factors(s, 1e-4);
  EXPECT_EQ(s.k(), 1);
  EXPECT_LT(std::abs(log_likelihood(s, d) - before) / std::abs(before), 1e-6);
}

TEST(RunEm, PureNoisePrunesEverything) {
  SimSpec spec;
  spec.block_dims = {30, 20};
  spec.activity = FactorLabel::from_rows({"-", "-"});
  spec.k = 1;
  spec.n = 100;
  spec.seed = 4;
  auto [data, truth] = generate(spec);
  EmConfig cfg;
  const auto rep = run_em(init_state(data, 5, HyperParams{}, 4), data, cfg);
  EXPECT_EQ(rep.state.k(), 0);
}

TEST(RunEm, SameSeedSameReport) {
  auto [data, truth] = generate(builtin_spec("sim1", 40, 3));
  EmConfig cfg;
  cfg.seed = 3;
  const auto a = run_em(init_state(data, 10, HyperParams{}, 3), data, cfg);
  const auto b = run_em(init_state(data, 10, HyperParams{}, 3), data, cfg);
  EXPECT_EQ(a.log_posterior, b.log_posterior);
  EXPECT_EQ(a.k_trace, b.k_trace);
  EXPECT_TRUE(checks::same_state(a.state, b.state));
  EXPECT_EQ(a.log_posterior.size(), static_cast<std::size_t>(a.iterations));
}

TEST(RunEm, TraceNonDecreasing) {
  EXPECT_LE(checks::em_worst_decrease(), 1e-6);
}

// A run is successful when every true factor is recovered. Some of those
// keep one spurious extra column, so the check is on the majority.
TEST(RunEm, SuccessfulSim1FitsMostlyEndWithSixFactors) {
  int successes = 0, six = 0;
  for (Seed seed = 100; seed < 120; ++seed) {
    auto [data, truth] = generate(builtin_spec("sim1", 40, seed));
    FitOptions opt;
    opt.engine = Engine::kMcmcEm;
    const auto rep = fit_once(data, opt, seed);
    if (recovery_rate(rep.state.lambda, classify_factors(rep.state), truth) == 1.0) {
      ++successes;
      if (rep.state.k() == 6) ++six;
    }
  }
  EXPECT_GE(successes, 5);
  EXPECT_GE(4 * six, 3 * successes);
}

TEST(RunEm, BadConfig) {
  EmConfig cfg;
  cfg.max_iter = 0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = EmConfig{};
  cfg.ll_tol = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

// Per-iteration cost with k and n fixed should grow about linearly in p.
TEST(RunEm, CostLinearInFeatures) {
  auto time_for = [](Eigen::Index p) {
    SimSpec spec;
    spec.block_dims = {p / 2, p / 2};
    spec.activity = FactorLabel::from_rows({"SD", "DS"});
    spec.k = 2;
    spec.n = 200;
    auto [data, truth] = generate(spec);
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      ModelState s = init_state(data, 10, HyperParams{}, 1);
      const auto t0 = std::chrono::steady_clock::now();
      for (int it = 0; it < 10; ++it) em_iteration(s, data);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double t1 = time_for(1000), t2 = time_for(2000);
  EXPECT_LT(t2 / t1, 2.6) << t1 << " s vs " << t2 << " s";
}
