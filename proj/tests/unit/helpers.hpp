#pragma once

#include <random>
#include <vector>

#include "mamex/discrepancy.hpp"
#include "mamex/game.hpp"
#include "mamex/generators.hpp"
#include "mamex/policy.hpp"

namespace mamex::test {

/// Random stochastic joint policy, each (h, s) row a normalized uniform draw.
inline MarkovJointPolicy random_joint_policy(const MarkovGame& game, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  MarkovJointPolicy pi(game.horizon(), game.num_states(), game.num_joint_actions());
  for (std::size_t h = 0; h < game.horizon(); ++h) {
    for (std::size_t s = 0; s < game.num_states(); ++s) {
      auto row = pi.at(h, s);
      double t = 0.0;
      for (auto& x : row) t += (x = u(eng));
      for (auto& x : row) x /= t;
    }
  }
  return pi;
}

/// Ledger filled with `episodes` trajectories of `pi`.
inline TransitionLedger collect(const MarkovGame& game, const MarkovJointPolicy& pi,
                                std::size_t episodes, std::uint64_t seed) {
  TransitionLedger ledger(game.horizon(), game.num_states(), game.num_joint_actions());
  for (std::size_t e = 0; e < episodes; ++e) {
    ledger.ingest(sample_episode(game, pi, derive_seed(seed, e), e));
  }
  return ledger;
}

/// Random table in [0, upper], [h][s][a].
inline std::vector<double> random_table(std::size_t size, double upper, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, upper);
  std::vector<double> t(size);
  for (auto& x : t) x = u(eng);
  return t;
}

/// Random kernel with rows drawn from normalized uniforms.
inline TransitionKernel random_kernel(std::size_t H, std::size_t S, std::size_t A,
                                      std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(H * S * A * S);
  for (std::size_t r = 0; r < H * S * A; ++r) {
    double t = 0.0;
    for (std::size_t s = 0; s < S; ++s) t += (p[r * S + s] = u(eng));
    for (std::size_t s = 0; s < S; ++s) p[r * S + s] /= t;
  }
  return TransitionKernel(H, S, A, std::move(p));
}

inline PurePolicySpace sampled_space(const MarkovGame& game, std::size_t size,
                                     std::uint64_t seed) {
  std::vector<std::vector<PurePolicy>> per;
  for (std::size_t i = 0; i < game.num_agents(); ++i) {
    EnumerateOptions o;
    o.subsample = size;
    o.seed = derive_seed(seed, i);
    per.push_back(enumerate_deterministic(game, i, o));
  }
  return PurePolicySpace(std::move(per));
}

}  // namespace mamex::test
