#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mamex/common.hpp"
#include "mamex/game.hpp"

namespace mamex {

enum class PolicyKind { deterministic, parametric };

/// Markov policy of one agent: per-(h, s) distribution over its own actions.
class PurePolicy {
 public:
  /// `actions` is indexed [h][s].
  static PurePolicy deterministic(std::size_t horizon, std::size_t states,
                                  std::size_t num_actions,
                                  const std::vector<std::size_t>& actions);
  /// `probs` is indexed [h][s][a]; `parameters` records the generating
  /// parameter of a parametric family (may be empty).
  static PurePolicy stochastic(std::size_t horizon, std::size_t states,
                               std::size_t num_actions, std::vector<double> probs,
                               std::vector<double> parameters = {});

  std::size_t horizon() const { return horizon_; }
  std::size_t num_states() const { return states_; }
  std::size_t num_actions() const { return actions_; }
  PolicyKind kind() const { return kind_; }
  bool is_deterministic() const { return kind_ == PolicyKind::deterministic; }

  std::span<const double> at(std::size_t h, std::size_t s) const {
    return {probs_.data() + (h * states_ + s) * actions_, actions_};
  }
  double prob(std::size_t h, std::size_t s, std::size_t a) const {
    return probs_[(h * states_ + s) * actions_ + a];
  }
  /// Action of a deterministic policy; lowest-index mode otherwise.
  std::size_t action(std::size_t h, std::size_t s) const;
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& parameters() const { return parameters_; }

  bool operator==(const PurePolicy&) const = default;

 private:
  PurePolicy() = default;
  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  PolicyKind kind_ = PolicyKind::deterministic;
  std::vector<double> probs_;
  std::vector<double> parameters_;
};

/// Finite per-agent pure policy sets and their joint (product) index.
class PurePolicySpace {
 public:
  explicit PurePolicySpace(std::vector<std::vector<PurePolicy>> per_agent,
                           std::size_t joint_cap = kDefaultJointCap);

  std::size_t num_agents() const { return per_agent_.size(); }
  std::size_t size(std::size_t agent) const { return per_agent_[agent].size(); }
  std::size_t joint_size() const { return layout_.size(); }
  const MixedRadix& layout() const { return layout_; }
  const PurePolicy& policy(std::size_t agent, std::size_t index) const {
    return per_agent_[agent][index];
  }
  const std::vector<PurePolicy>& policies(std::size_t agent) const {
    return per_agent_[agent];
  }

  /// Joint-action probabilities of the joint pure policy `joint_index`
  /// (product of the members' action distributions).
  MarkovJointPolicy materialize(std::size_t joint_index,
                                const MixedRadix& action_layout) const;
  /// Every joint pure policy materialized, in joint-index order.
  std::vector<MarkovJointPolicy> materialize_all(const MixedRadix& action_layout) const;

  /// Throws InputError unless every policy matches the game's H, S and A_i.
  void check_compatible(const MarkovGame& game) const;

 private:
  std::vector<std::vector<PurePolicy>> per_agent_;
  MixedRadix layout_;
};

/// Probability mass over joint pure-policy indices. Correlated in general;
/// product policies additionally keep their per-agent marginals.
class JointMixedPolicy {
 public:
  JointMixedPolicy() = default;
  static JointMixedPolicy from_mass(MixedRadix layout, std::vector<double> mass);
  static JointMixedPolicy product(MixedRadix layout,
                                  std::vector<std::vector<double>> marginals);
  static JointMixedPolicy point_mass(MixedRadix layout, std::size_t index);
  static JointMixedPolicy uniform(MixedRadix layout);
  /// Uniform average of policies sharing one layout.
  static JointMixedPolicy uniform_mixture(std::span<const JointMixedPolicy> parts);

  const MixedRadix& layout() const { return layout_; }
  std::span<const double> mass() const { return mass_; }
  double mass(std::size_t joint) const { return mass_[joint]; }
  bool is_product() const { return is_product_; }
  std::size_t num_agents() const { return layout_.num_components(); }

  /// Marginal over one agent's pure policies.
  std::vector<double> marginal(std::size_t agent) const;
  /// Distribution over the other agents' joint indices (MixedRadix order
  /// with `agent` removed) given that `agent` plays `own`. Empty when the
  /// conditioning event has zero mass.
  std::vector<double> conditional_of_others(std::size_t agent, std::size_t own) const;
  /// Joint distribution of all agents but `agent` (the "others' marginal").
  std::vector<double> others_marginal(std::size_t agent) const;

 private:
  MixedRadix layout_;
  std::vector<double> mass_;
  bool is_product_ = false;
  std::vector<std::vector<double>> marginals_;
};

struct EnumerateOptions {
  std::size_t cap = kDefaultJointCap;
  /// When set, draw this many distinct policies uniformly without
  /// replacement (returned in draw order) instead of enumerating.
  std::optional<std::size_t> subsample;
  std::uint64_t seed = 0;
};

/// Deterministic Markov policies of `agent`. Full enumeration lists codes in
/// increasing order, where the code's base-|A_i| digits are the actions at
/// (h, s) in row-major order with (0, 0) most significant.
std::vector<PurePolicy> enumerate_deterministic(const MarkovGame& game,
                                                std::size_t agent,
                                                const EnumerateOptions& options = {});

/// Feature map psi(s, a) in R^d for the log-linear class, indexed [s][a][j].
struct LogLinearFeatures {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::size_t dim = 0;
  std::vector<double> psi;

  double operator()(std::size_t s, std::size_t a, std::size_t j) const {
    return psi[(s * actions + a) * dim + j];
  }
};

/// Softmax(theta^T psi(s, .)) for every theta on the eps-grid inside the
/// unit ball. Policies are stationary across steps.
std::vector<PurePolicy> log_linear_cover(const LogLinearFeatures& features,
                                         std::size_t horizon, double eps,
                                         std::size_t cap = kDefaultJointCap);

/// Draws a joint pure-policy index from `joint`. Deterministic given seed.
std::size_t sample_pure(const JointMixedPolicy& joint, std::uint64_t seed);

}  // namespace mamex
