#pragma once

#include <cstdint>
#include <vector>

#include "mamex/game.hpp"

namespace mamex {

/// Random tabular game with Dirichlet(1) transition rows and uniform rewards
/// in [0, reward_scale], rescaled so every agent's worst-case return is at
/// most 1 (reward_cap R = 1). Throws InputError when the joint action space
/// exceeds `joint_action_cap`.
MarkovGame make_random_tabular(std::size_t states, std::size_t horizon,
                               const std::vector<std::size_t>& actions,
                               double reward_scale, std::uint64_t seed,
                               std::size_t joint_action_cap = kDefaultJointCap);

/// Tabular game whose transitions factor as P_h(s'|s,a) = <theta_h, phi(s'|s,a)>.
struct LinearMixtureGame {
  MarkovGame game;
  std::size_t dim = 0;
  std::vector<std::vector<double>> theta;  // [h][j]
  std::vector<double> features;            // phi_j(s'|s,a), indexed [s][a][s'][j]

  double feature(std::size_t s, std::size_t a, std::size_t next,
                 std::size_t j) const {
    const std::size_t S = game.num_states();
    const std::size_t A = game.num_joint_actions();
    return features[((s * A + a) * S + next) * dim + j];
  }
  /// <theta_h, phi(s'|s,a)> recomputed from the stored parameters.
  double reconstruct(std::size_t h, std::size_t s, std::size_t a,
                     std::size_t next) const;
};

/// Samples basis kernels phi_j and mixing weights theta_h (a simplex point
/// plus zero-sum noise), retrying each step until every induced row is a
/// distribution and ||theta_h||_2 <= sqrt(d). Throws ComputeError when
/// `retry_budget` attempts fail for some step.
LinearMixtureGame make_linear_mixture(std::size_t dim, std::size_t states,
                                      std::size_t horizon,
                                      const std::vector<std::size_t>& actions,
                                      std::uint64_t seed,
                                      std::size_t retry_budget = 1000);

/// Builds a linear mixture game from given parameters. Rows are validated by
/// the MarkovGame constructor.
LinearMixtureGame linear_mixture_from(std::size_t dim, std::size_t states,
                                      const std::vector<std::size_t>& actions,
                                      std::vector<double> features,
                                      std::vector<std::vector<double>> theta,
                                      RewardTable rewards, std::vector<double> rho,
                                      double reward_cap);

/// Two-agent zero-sum linear game. A shared feature map phi(s,a,b) on the
/// probability simplex (so ||phi||_2 <= 1) drives both rewards
/// r^{(1)}_h = phi^T theta_h and transitions P_h(s'|s,a,b) = phi^T mu_h(s').
/// Agent 2 receives 1/H - r^{(1)}_h, so r^{(1)} + r^{(2)} is constant.
struct ZeroSumLinearGame {
  MarkovGame game;
  std::size_t dim = 0;
  std::vector<double> features;           // [s][a][j], shared across steps
  std::vector<std::vector<double>> theta;  // [h][j], agent-1 reward weights
  std::vector<double> mu;                 // [h][s'][j]
  double step_total = 0.0;

  double feature(std::size_t s, std::size_t a, std::size_t j) const {
    return features[(s * game.num_joint_actions() + a) * dim + j];
  }
  double reconstruct_reward(std::size_t h, std::size_t s, std::size_t a) const;
  double reconstruct_transition(std::size_t h, std::size_t s, std::size_t a,
                                std::size_t next) const;
};

ZeroSumLinearGame make_zero_sum_linear(std::size_t dim, std::size_t states,
                                       std::size_t horizon, std::size_t actions_a,
                                       std::size_t actions_b, std::uint64_t seed,
                                       std::size_t retry_budget = 100);

/// Sparse-reward "combination lock". State 0 is the lock path, state 1 an
/// absorbing failure state. At every step the path continues only if the
/// agents play the hidden joint action key[h]; playing it at the last step
/// on the path pays 1 to every agent. Each agent also earns `bonus` per step
/// for playing its action 0, a myopic lure that competes with the lock.
struct LockGame {
  MarkovGame game;
  std::vector<std::size_t> key;  // joint action per step
};

LockGame make_lock_game(std::size_t horizon, const std::vector<std::size_t>& actions,
                        std::uint64_t seed, double bonus = 0.05);

/// One-state, one-step game from per-agent payoff tensors in [0, 1]
/// (flattened joint-action layout).
MarkovGame make_matrix_game(const std::vector<std::size_t>& actions,
                            const std::vector<std::vector<double>>& payoffs);

}  // namespace mamex
