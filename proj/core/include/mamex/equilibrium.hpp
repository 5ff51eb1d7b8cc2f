#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mamex/normal_form.hpp"
#include "mamex/policy.hpp"

namespace mamex {

struct EquilibriumSolution {
  JointMixedPolicy policy;
  EquilibriumKind kind = EquilibriumKind::cce;
  std::string method;
  std::size_t iterations = 0;
  std::vector<double> gaps;  // certified per-agent gap of `kind`

  double max_gap() const;
};

/// Per-agent gap of `candidate` under `kind`: best pure deviation against
/// the others' marginal (NE, CCE) or best per-strategy swap under the
/// conditionals (CE). Exact tensor arithmetic.
std::vector<double> certify(const NormalFormGame& game, const JointMixedPolicy& candidate,
                            EquilibriumKind kind);

enum class HedgeOutput {
  expected,  // average over rounds of the product of the mixed strategies
  sampled,   // empirical distribution of seeded joint samples
};

/// Simultaneous Hedge self-play with full-information expected payoffs,
/// learning rate sqrt(8 ln m / T) on payoffs scaled by the agent's range.
/// Returns the correlated average of joint play.
EquilibriumSolution solve_cce(const NormalFormGame& game, std::size_t iters,
                              std::uint64_t seed, HedgeOutput output = HedgeOutput::expected);

/// Internal-regret dynamics: every agent runs one regret-matching+ learner
/// per own strategy (the swap reduction) and plays the stationary
/// distribution of the induced chain. Returns the average joint play.
EquilibriumSolution solve_ce(const NormalFormGame& game, std::size_t iters, std::uint64_t seed);

enum class NeMode { zero_sum_selfplay, bimatrix_support_enum };

NeMode parse_ne_mode(const std::string& text);
std::string to_string(NeMode mode);

inline constexpr std::size_t kSupportEnumMaxStrategies = 6;

/// Zero-sum two-agent games use self-play; other two-agent games with at most
/// six strategies each use support enumeration; anything else throws
/// ComputeError("NE mode unsupported; use CCE").
NeMode default_ne_mode(const NormalFormGame& game);

/// Product-form NE. Self-play returns the averaged Hedge marginals; support
/// enumeration returns the first equilibrium over equal-size supports in
/// lexicographic order (size, then own support, then the other's), skipping
/// singular indifference systems.
EquilibriumSolution solve_ne(const NormalFormGame& game, NeMode mode, std::uint64_t seed,
                             std::size_t iters = 10000);

/// max(10^4, 100 * joint size).
std::size_t default_eq_iters(std::size_t joint_size);

/// Dispatch on `kind` (NE uses default_ne_mode).
EquilibriumSolution solve_equilibrium(const NormalFormGame& game, EquilibriumKind kind,
                                      std::size_t iters, std::uint64_t seed);

}  // namespace mamex
