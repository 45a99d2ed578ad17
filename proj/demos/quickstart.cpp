// Simulate the two-block benchmark, fit it with PX-EM from a few random
// starts, and look at what came back.
#include "bass/bass.hpp"

#include <cstdio>

using namespace bass;

int main() {
  auto [data, truth] = generate(builtin_spec("sim1", 200, 7));
  std::printf("data: %ld blocks, %ld features, %ld samples\n", static_cast<long>(data.m()),
              static_cast<long>(data.p()), static_cast<long>(data.n()));

  FitOptions opt;
  opt.engine = Engine::kPxEm;
  opt.k_init = 10;
  FitReport best;
  for (Seed seed = 1; seed <= 5; ++seed) {
    FitReport rep = fit_once(data, opt, seed);
    std::printf("seed %llu: %d iterations, k = %ld, log posterior %.2f\n", static_cast<unsigned long long>(seed),
                rep.iterations, static_cast<long>(rep.state.k()), rep.log_posterior.back());
    if (best.log_posterior.empty() || rep.log_posterior.back() > best.log_posterior.back()) best = std::move(rep);
  }

  const FactorLabel labels = classify_factors(best.state);
  // fit columns come back in arbitrary order; line them up with the truth
  std::printf("\nactivity per true factor (S sparse, D dense, - off; blocks top to bottom):\n");
  for (const auto& mt : match_factors(truth.lambda, best.state.lambda)) {
    std::printf("  factor %ld: truth %s, fit column %ld %s, |corr| %.3f\n", static_cast<long>(mt.truth + 1),
                truth.activity.column(mt.truth).c_str(), static_cast<long>(mt.estimate + 1),
                labels.column(mt.estimate).c_str(), mt.abs_corr);
  }
  std::printf("recovery rate %.3f, SSI %.3f\n", recovery_rate(best.state.lambda, labels, truth),
              ssi(truth.lambda, best.state.lambda));

  // predict block 2 from block 1 on fresh samples
  const GroupedDataset test = generate_test(truth, 200, 1007);
  ModelState oracle = best.state;
  oracle.lambda = truth.lambda;
  oracle.sigma2 = truth.sigma2;
  std::printf("block 2 MSE: fit %.4f, true parameters %.4f\n", mse(predict_block(best.state, test, 1), test.block(1)),
              mse(predict_block(oracle, test, 1), test.block(1)));

  const Vector share = pve(best.state);
  std::printf("variance explained per factor:");
  for (Eigen::Index h = 0; h < share.size(); ++h) std::printf(" %.3f", share(h));
  std::printf("\n");
}
