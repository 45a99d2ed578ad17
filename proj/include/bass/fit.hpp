// Engine selection: random-start EM, Gibbs-initialized EM, PX-EM, or a
// plain Gibbs chain summarized by its final state.
#ifndef BASS_FIT_HPP_
#define BASS_FIT_HPP_

#include "bass/core.hpp"
#include "bass/em.hpp"
#include "bass/gibbs.hpp"
#include "bass/model.hpp"
#include "bass/px_em.hpp"

#include <chrono>
#include <string>

namespace bass {

enum class Engine { kGibbs, kEm, kMcmcEm, kPxEm };

inline std::string engine_name(Engine e) {
  switch (e) {
    case Engine::kGibbs: return "gibbs";
    case Engine::kEm: return "em";
    case Engine::kMcmcEm: return "mcmc-em";
    case Engine::kPxEm: return "px-em";
  }
  return "?";
}

inline Engine parse_engine(const std::string& name) {
  if (name == "gibbs") return Engine::kGibbs;
  if (name == "em") return Engine::kEm;
  if (name == "mcmc-em") return Engine::kMcmcEm;
  if (name == "px-em") return Engine::kPxEm;
  throw InvalidInput("unknown engine '" + name + "'");
}

/// Runs n_sweeps Gibbs sweeps from `state` (seeded with cfg.seed), then EM.
inline FitReport run_mcmc_em(ModelState state, const GroupedDataset& data, int n_sweeps, const EmConfig& cfg) {
  if (n_sweeps < 1) throw InvalidInput("run_mcmc_em: n_sweeps must be positive");
  const auto start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  state.validate();
  for (int t = 0; t < n_sweeps; ++t) sweep(state, data, rng);
  FitReport report = run_em(std::move(state), data, cfg);
  report.initializer = "MCMC-EM";
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

struct FitOptions {
  Engine engine = Engine::kPxEm;
  Eigen::Index k_init = 10;
  HyperParams hyper;
  EmConfig em;
  int n_px_iter = 20;
  int n_mcmc_sweeps = 50;
  GibbsConfig gibbs;
};

/// One fit from a random start drawn with `seed`. The seed drives both the
/// initial loadings and any sampling inside the engine.
inline FitReport fit_once(const GroupedDataset& data, const FitOptions& opt, Seed seed) {
  ModelState init = init_state(data, opt.k_init, opt.hyper, seed);
  EmConfig em = opt.em;
  em.seed = seed;
  switch (opt.engine) {
    case Engine::kEm: return run_em(std::move(init), data, em);
    case Engine::kMcmcEm: return run_mcmc_em(std::move(init), data, opt.n_mcmc_sweeps, em);
    case Engine::kPxEm: {
      return run_px_em(std::move(init), data, PxConfig{opt.n_px_iter, em});
    }
    case Engine::kGibbs: {
      GibbsConfig g = opt.gibbs;
      g.seed = seed;
      const auto start = std::chrono::steady_clock::now();
      Chain chain = run_gibbs(std::move(init), data, g);
      FitReport r;
      r.log_posterior = chain.log_joint_trace;
      r.k_trace.assign(chain.log_joint_trace.size(), chain.last.k());
      r.pruned.assign(chain.log_joint_trace.size(), 0);
      r.iterations = g.n_iter;
      r.state = std::move(chain.last);
      r.seed = seed;
      r.initializer = "Gibbs";
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return r;
    }
  }
  throw InvalidInput("fit_once: unknown engine");
}

}  // namespace bass

#endif  // BASS_FIT_HPP_
