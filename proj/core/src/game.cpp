#include "mamex/game.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace mamex {
namespace {

constexpr double kSimplexTol = 1e-12;

std::string at_index(std::size_t h, std::size_t s, std::size_t a) {
  return "[h=" + std::to_string(h) + "][s=" + std::to_string(s) + "][a=" +
         std::to_string(a) + "]";
}

}  // namespace

TransitionKernel::TransitionKernel(std::size_t horizon, std::size_t states,
                                   std::size_t joint_actions)
    : horizon_(horizon), states_(states), actions_(joint_actions),
      probs_(horizon * states * joint_actions * states, 0.0) {}

TransitionKernel::TransitionKernel(std::size_t horizon, std::size_t states,
                                   std::size_t joint_actions,
                                   std::vector<double> probs)
    : horizon_(horizon), states_(states), actions_(joint_actions),
      probs_(std::move(probs)) {
  if (probs_.size() != horizon * states * joint_actions * states) {
    throw InputError("transition table has " + std::to_string(probs_.size()) +
                     " entries, expected " +
                     std::to_string(horizon * states * joint_actions * states));
  }
}

void TransitionKernel::validate(double tol) const {
  for (std::size_t h = 0; h < horizon_; ++h) {
    for (std::size_t s = 0; s < states_; ++s) {
      for (std::size_t a = 0; a < actions_; ++a) {
        double sum = 0.0;
        const auto p = row(h, s, a);
        for (std::size_t next = 0; next < states_; ++next) {
          if (!(p[next] >= 0.0)) {
            throw InputError("transition" + at_index(h, s, a) + "[s'=" +
                             std::to_string(next) + "] is negative or NaN");
          }
          sum += p[next];
        }
        if (std::abs(sum - 1.0) > tol) {
          throw InputError("transition" + at_index(h, s, a) + " sums to " +
                           std::to_string(sum) + ", not 1");
        }
      }
    }
  }
}

RewardTable::RewardTable(std::size_t agents, std::size_t horizon,
                         std::size_t states, std::size_t joint_actions)
    : agents_(agents), horizon_(horizon), states_(states), actions_(joint_actions),
      values_(agents * horizon * states * joint_actions, 0.0) {}

RewardTable::RewardTable(std::size_t agents, std::size_t horizon,
                         std::size_t states, std::size_t joint_actions,
                         std::vector<double> values)
    : agents_(agents), horizon_(horizon), states_(states), actions_(joint_actions),
      values_(std::move(values)) {
  if (values_.size() != agents * horizon * states * joint_actions) {
    throw InputError("reward table has " + std::to_string(values_.size()) +
                     " entries, expected " +
                     std::to_string(agents * horizon * states * joint_actions));
  }
}

MarkovGame::MarkovGame(std::vector<std::size_t> actions_per_agent,
                       std::size_t states, TransitionKernel transition,
                       RewardTable rewards, std::vector<double> rho,
                       double reward_cap, std::optional<double> zero_sum_total,
                       std::size_t joint_action_cap)
    : layout_(std::move(actions_per_agent), joint_action_cap),
      transition_(std::move(transition)),
      rewards_(std::move(rewards)),
      rho_(std::move(rho)),
      reward_cap_(reward_cap),
      zero_sum_total_(zero_sum_total) {
  const std::size_t H = transition_.horizon();
  if (H == 0) throw InputError("horizon must be at least 1");
  if (states == 0) throw InputError("game needs at least one state");
  if (transition_.num_states() != states ||
      transition_.num_joint_actions() != layout_.size()) {
    throw InputError("transition table shape does not match states/actions");
  }
  if (rewards_.num_agents() != layout_.num_components() ||
      rewards_.data().size() != layout_.num_components() * H * states * layout_.size()) {
    throw InputError("reward table shape does not match agents/horizon/states/actions");
  }
  transition_.validate(kSimplexTol);

  if (rho_.size() != states) {
    throw InputError("rho has " + std::to_string(rho_.size()) +
                     " entries, expected " + std::to_string(states));
  }
  double rho_sum = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    if (!(rho_[s] >= 0.0)) {
      throw InputError("rho[" + std::to_string(s) + "] is negative or NaN");
    }
    rho_sum += rho_[s];
  }
  if (std::abs(rho_sum - 1.0) > kSimplexTol) {
    throw InputError("rho sums to " + std::to_string(rho_sum) + ", not 1");
  }

  if (!(reward_cap_ >= 1.0) || reward_cap_ > static_cast<double>(H)) {
    throw InputError("reward_cap must lie in [1, H]");
  }
  const std::size_t A = layout_.size();
  for (std::size_t i = 0; i < num_agents(); ++i) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
          const double r = rewards_(i, h, s, a);
          if (!(r >= 0.0 && r <= 1.0)) {
            throw InputError("rewards[i=" + std::to_string(i) + "]" +
                             at_index(h, s, a) + " = " + std::to_string(r) +
                             " outside [0, 1]");
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < num_agents(); ++i) {
    const double worst = worst_case_return(i);
    if (worst > reward_cap_ + 1e-12) {
      throw InputError("agent " + std::to_string(i) +
                       " can collect return " + std::to_string(worst) +
                       " above reward_cap " + std::to_string(reward_cap_));
    }
  }
  if (zero_sum_total_) {
    if (num_agents() != 2) throw InputError("zero-sum flag requires two agents");
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
          if (std::abs(rewards_(0, h, s, a) + rewards_(1, h, s, a) -
                       *zero_sum_total_) > 1e-12) {
            throw InputError("rewards" + at_index(h, s, a) +
                             " violate the declared zero-sum total");
          }
        }
      }
    }
  }
}

double MarkovGame::worst_case_return(std::size_t agent) const {
  const std::size_t H = horizon();
  const std::size_t S = num_states();
  const std::size_t A = num_joint_actions();
  std::vector<double> next(S, 0.0);
  std::vector<double> cur(S, 0.0);
  for (std::size_t h = H; h-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double best = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        double tail = 0.0;
        const auto p = transition_.row(h, s, a);
        for (std::size_t sn = 0; sn < S; ++sn) {
          if (p[sn] > 0.0) tail = std::max(tail, next[sn]);
        }
        best = std::max(best, rewards_(agent, h, s, a) + tail);
      }
      cur[s] = best;
    }
    std::swap(cur, next);
  }
  double worst = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (rho_[s] > 0.0) worst = std::max(worst, next[s]);
  }
  return worst;
}

Trajectory sample_episode(const MarkovGame& game, const MarkovJointPolicy& policy,
                          std::uint64_t seed, std::size_t episode_index) {
  const std::size_t H = game.horizon();
  if (policy.horizon() != H || policy.num_states() != game.num_states() ||
      policy.num_joint_actions() != game.num_joint_actions()) {
    throw InputError("sample_episode: policy shape does not match game");
  }
  std::mt19937_64 rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.episode_index = episode_index;
  traj.steps.reserve(H);
  std::size_t s = sample_categorical(rng, game.rho());
  for (std::size_t h = 0; h < H; ++h) {
    Step step;
    step.state = s;
    step.joint_action = sample_categorical(rng, policy.at(h, s));
    step.rewards.resize(game.num_agents());
    for (std::size_t i = 0; i < game.num_agents(); ++i) {
      step.rewards[i] = game.rewards()(i, h, s, step.joint_action);
    }
    s = sample_categorical(rng, game.transition().row(h, s, step.joint_action));
    traj.steps.push_back(std::move(step));
  }
  traj.final_state = s;
  return traj;
}

}  // namespace mamex
