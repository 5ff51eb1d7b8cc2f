#pragma once

#include <string>
#include <vector>

#include "mamex/common.hpp"

namespace mamex {

enum class EquilibriumKind { ne, cce, ce };

EquilibriumKind parse_equilibrium_kind(const std::string& text);
std::string to_string(EquilibriumKind kind);

/// Finite normal-form game: one payoff tensor per agent over flattened joint
/// strategy indices (MixedRadix layout, agent 0 most significant).
class NormalFormGame {
 public:
  NormalFormGame() = default;
  NormalFormGame(MixedRadix layout, std::vector<std::vector<double>> payoffs);

  std::size_t num_agents() const { return layout_.num_components(); }
  std::size_t num_strategies(std::size_t agent) const { return layout_.size_of(agent); }
  std::size_t joint_size() const { return layout_.size(); }
  const MixedRadix& layout() const { return layout_; }
  const std::vector<double>& payoffs(std::size_t agent) const { return payoffs_[agent]; }
  double payoff(std::size_t agent, std::size_t joint) const { return payoffs_[agent][joint]; }

  /// max - min over all agents' entries (1 when every entry is equal).
  double payoff_range() const;
  double payoff_range(std::size_t agent) const;
  /// True for two agents whose payoffs sum to one constant within `tol`.
  bool is_zero_sum(double tol = 1e-9) const;

 private:
  MixedRadix layout_;
  std::vector<std::vector<double>> payoffs_;
};

}  // namespace mamex
