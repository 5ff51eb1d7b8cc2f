#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mamex/common.hpp"

namespace mamex {

// Steps are 0-based in code: h = 0..H-1 corresponds to the usual 1..H.
// Joint actions are flattened with MixedRadix over per-agent action counts
// (agent 0 most significant); transition and reward tables share that layout.

/// Dense table P_h(s' | s, a) indexed [h][s][a][s'].
class TransitionKernel {
 public:
  TransitionKernel() = default;
  TransitionKernel(std::size_t horizon, std::size_t states,
                   std::size_t joint_actions);
  TransitionKernel(std::size_t horizon, std::size_t states,
                   std::size_t joint_actions, std::vector<double> probs);

  std::size_t horizon() const { return horizon_; }
  std::size_t num_states() const { return states_; }
  std::size_t num_joint_actions() const { return actions_; }
  std::size_t num_rows() const { return horizon_ * states_ * actions_; }

  std::size_t row_index(std::size_t h, std::size_t s, std::size_t a) const {
    return (h * states_ + s) * actions_ + a;
  }
  std::span<const double> row(std::size_t h, std::size_t s, std::size_t a) const {
    return {probs_.data() + row_index(h, s, a) * states_, states_};
  }
  std::span<double> row(std::size_t h, std::size_t s, std::size_t a) {
    return {probs_.data() + row_index(h, s, a) * states_, states_};
  }
  std::span<const double> row(std::size_t r) const {
    return {probs_.data() + r * states_, states_};
  }
  std::span<double> row(std::size_t r) { return {probs_.data() + r * states_, states_}; }
  double operator()(std::size_t h, std::size_t s, std::size_t a,
                    std::size_t next) const {
    return probs_[row_index(h, s, a) * states_ + next];
  }
  const std::vector<double>& data() const { return probs_; }

  /// Throws InputError naming the first row that is not a distribution.
  void validate(double tol = 1e-12) const;

 private:
  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> probs_;
};

/// Deterministic rewards r_h^{(i)}(s, a) indexed [i][h][s][a].
class RewardTable {
 public:
  RewardTable() = default;
  RewardTable(std::size_t agents, std::size_t horizon, std::size_t states,
              std::size_t joint_actions);
  RewardTable(std::size_t agents, std::size_t horizon, std::size_t states,
              std::size_t joint_actions, std::vector<double> values);

  std::size_t num_agents() const { return agents_; }
  double operator()(std::size_t i, std::size_t h, std::size_t s,
                    std::size_t a) const {
    return values_[index(i, h, s, a)];
  }
  double& at(std::size_t i, std::size_t h, std::size_t s, std::size_t a) {
    return values_[index(i, h, s, a)];
  }
  /// Rewards of agent i at step h as a [s][a] table.
  std::span<const double> step(std::size_t i, std::size_t h) const {
    return {values_.data() + index(i, h, 0, 0), states_ * actions_};
  }
  const std::vector<double>& data() const { return values_; }
  std::vector<double>& data() { return values_; }

 private:
  std::size_t index(std::size_t i, std::size_t h, std::size_t s,
                    std::size_t a) const {
    return ((i * horizon_ + h) * states_ + s) * actions_ + a;
  }
  std::size_t agents_ = 0;
  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> values_;
};

/// Markov joint policy materialized as joint-action probabilities per (h, s),
/// indexed [h][s][a]. Pure joint policies are turned into this form before
/// evaluation or sampling.
class MarkovJointPolicy {
 public:
  MarkovJointPolicy() = default;
  MarkovJointPolicy(std::size_t horizon, std::size_t states,
                    std::size_t joint_actions)
      : horizon_(horizon), states_(states), actions_(joint_actions),
        probs_(horizon * states * joint_actions, 0.0) {}

  std::size_t horizon() const { return horizon_; }
  std::size_t num_states() const { return states_; }
  std::size_t num_joint_actions() const { return actions_; }

  std::span<const double> at(std::size_t h, std::size_t s) const {
    return {probs_.data() + (h * states_ + s) * actions_, actions_};
  }
  std::span<double> at(std::size_t h, std::size_t s) {
    return {probs_.data() + (h * states_ + s) * actions_, actions_};
  }
  const std::vector<double>& data() const { return probs_; }

 private:
  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> probs_;
};

/// General-sum episodic Markov game with known deterministic rewards.
/// Immutable after construction; the constructor checks every invariant.
class MarkovGame {
 public:
  MarkovGame(std::vector<std::size_t> actions_per_agent, std::size_t states,
             TransitionKernel transition, RewardTable rewards,
             std::vector<double> rho, double reward_cap,
             std::optional<double> zero_sum_total = std::nullopt,
             std::size_t joint_action_cap = kDefaultJointCap);

  std::size_t num_agents() const { return layout_.num_components(); }
  std::size_t horizon() const { return transition_.horizon(); }
  std::size_t num_states() const { return transition_.num_states(); }
  std::size_t num_joint_actions() const { return layout_.size(); }
  const MixedRadix& action_layout() const { return layout_; }
  const TransitionKernel& transition() const { return transition_; }
  const RewardTable& rewards() const { return rewards_; }
  std::span<const double> rho() const { return rho_; }
  double reward_cap() const { return reward_cap_; }
  /// Set for two-agent games with r^{(1)} + r^{(2)} equal to a constant per step.
  std::optional<double> zero_sum_total() const { return zero_sum_total_; }

  /// Largest return agent i can collect along any trajectory that has
  /// positive probability under some policy (max-over-actions DP).
  double worst_case_return(std::size_t agent) const;

 private:
  MixedRadix layout_;
  TransitionKernel transition_;
  RewardTable rewards_;
  std::vector<double> rho_;
  double reward_cap_ = 1.0;
  std::optional<double> zero_sum_total_;
};

struct Step {
  std::size_t state = 0;
  std::size_t joint_action = 0;
  std::vector<double> rewards;
};

struct Trajectory {
  std::vector<Step> steps;  // exactly H entries
  std::size_t final_state = 0;  // s_{H+1}
  std::size_t episode_index = 0;
  std::uint64_t seed = 0;
};

/// Draws s_1 ~ rho, then actions from `policy` and next states from P.
/// Deterministic given `seed`.
Trajectory sample_episode(const MarkovGame& game, const MarkovJointPolicy& policy,
                          std::uint64_t seed, std::size_t episode_index = 0);

}  // namespace mamex
