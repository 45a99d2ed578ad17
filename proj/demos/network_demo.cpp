// Block-specific partial-correlation network: fit a two-block simulation
// several times, keep the edges that show up in most runs.
#include "bass/bass.hpp"

#include <algorithm>
#include <cstdio>

using namespace bass;

int main() {
  auto [data, truth] = generate(builtin_spec("sim2", 200, 3));
  const Eigen::Index w = 0;

  FitOptions opt;
  opt.engine = Engine::kPxEm;
  opt.k_init = 15;
  std::vector<Matrix> runs;
  for (Seed seed = 1; seed <= 10; ++seed) {
    const FitReport rep = fit_once(data, opt, seed);
    const BlockCovariance cov = observation_covariance(rep.state, classify_factors(rep.state), w);
    std::printf("seed %2llu: k = %ld, %zu block-specific sparse factor(s)\n", static_cast<unsigned long long>(seed),
                static_cast<long>(rep.state.k()), cov.factors.size());
    runs.push_back(partial_correlation(cov.omega));
  }

  const EdgeList net = consensus_network(runs, 0.01, 0.5);
  std::printf("\n%zu consensus edges among %ld features of block %ld\n", net.edges.size(),
              static_cast<long>(net.nodes), static_cast<long>(w + 1));
  auto edges = net.edges;
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return std::abs(a.weight) > std::abs(b.weight); });
  for (std::size_t i = 0; i < std::min<std::size_t>(edges.size(), 10); ++i) {
    std::printf("  %3ld -- %3ld  weight %+.3f  support %.1f\n", static_cast<long>(edges[i].i + 1),
                static_cast<long>(edges[i].j + 1), edges[i].weight, edges[i].support_fraction);
  }

  // the same network from the true loadings, for comparison
  ModelState s;
  s.offsets = truth.offsets;
  s.lambda = truth.lambda;
  s.sigma2 = truth.sigma2;
  const auto true_net = consensus_network({partial_correlation(observation_covariance(s, truth.activity, w).omega)});
  std::size_t shared = 0;
  for (const auto& e : net.edges) {
    for (const auto& t : true_net.edges) shared += (e.i == t.i && e.j == t.j);
  }
  std::printf("true loadings give %zu edges; %zu of the consensus edges are among them\n", true_net.edges.size(), shared);
}
