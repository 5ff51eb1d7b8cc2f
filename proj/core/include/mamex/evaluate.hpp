#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mamex/game.hpp"
#include "mamex/normal_form.hpp"
#include "mamex/policy.hpp"

namespace mamex {

/// V_h(s) for h = 0..H (V_H == 0) and Q_h(s, a) for h = 0..H-1.
struct ValueTables {
  std::size_t horizon = 0;
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<double> V;
  std::vector<double> Q;
  double value_at_rho = 0.0;

  double v(std::size_t h, std::size_t s) const { return V[h * states + s]; }
  double q(std::size_t h, std::size_t s, std::size_t a) const {
    return Q[(h * states + s) * actions + a];
  }
  std::span<const double> q_step(std::size_t h) const {
    return {Q.data() + h * states * actions, states * actions};
  }
};

/// Backward DP for agent `agent` under kernel `P`. With `clip_at`, every
/// V_h(s) is capped at that value (used for hypothesis models that may leave
/// the game's realizable trajectories).
ValueTables evaluate_pure(const TransitionKernel& P, const RewardTable& rewards,
                          std::span<const double> rho, const MarkovJointPolicy& pi,
                          std::size_t agent,
                          std::optional<double> clip_at = std::nullopt);
ValueTables evaluate_pure(const MarkovGame& game, const MarkovJointPolicy& pi,
                          std::size_t agent);

/// (T_h f_next)(s, a) = r_h(s, a) + E_{s'}<f_next(s', .), pi_{h+1}(.|s')>.
/// `f_next` is an [s][a] table for step h + 1; pass an empty span at the last
/// step (f_{H+1} == 0).
std::vector<double> bellman_apply(std::span<const double> f_next,
                                  const MarkovJointPolicy& pi, std::size_t agent,
                                  std::size_t h, const TransitionKernel& P,
                                  const RewardTable& rewards);

/// State-action occupancy d_h(s, a) of `pi` started from rho, [h][s][a].
std::vector<double> occupancy(const TransitionKernel& P, std::span<const double> rho,
                              const MarkovJointPolicy& pi);

/// V^{(i), upsilon}(rho) for every joint pure policy upsilon in `space`.
NormalFormGame true_payoffs(const MarkovGame& game, const PurePolicySpace& space);

/// E_{upsilon ~ mixed}[U_i(upsilon)].
double expected_payoff(const NormalFormGame& payoffs, const JointMixedPolicy& mixed,
                       std::size_t agent);

struct Deviation {
  std::size_t index = 0;
  double value = 0.0;
};

/// argmax over agent i's pure strategies of its payoff against the others'
/// marginal of `mixed`; ties go to the lowest index.
Deviation best_response(const NormalFormGame& payoffs, const JointMixedPolicy& mixed,
                        std::size_t agent);
Deviation best_response(const MarkovGame& game, const PurePolicySpace& space,
                        const JointMixedPolicy& mixed, std::size_t agent);

struct StrategyModification {
  std::vector<std::size_t> map;  // phi(u) for every own pure strategy u
  double value = 0.0;            // E_{upsilon ~ mixed}[U_i(phi(u_i), u_{-i})]
};

/// Best swap of agent i's recommended strategy given the conditional of the
/// others; zero-mass recommendations map to themselves.
StrategyModification strategy_mod_value(const NormalFormGame& payoffs,
                                        const JointMixedPolicy& mixed,
                                        std::size_t agent);

struct AgentGap {
  double cce_gap = 0.0;  // also the NE gap for product policies
  double ce_gap = 0.0;
  double value = 0.0;
};

struct GapReport {
  std::vector<AgentGap> agents;
  double aggregate_cce = 0.0;
  double aggregate_ce = 0.0;

  double gap(std::size_t agent, EquilibriumKind kind) const {
    return kind == EquilibriumKind::ce ? agents[agent].ce_gap : agents[agent].cce_gap;
  }
  double aggregate(EquilibriumKind kind) const {
    return kind == EquilibriumKind::ce ? aggregate_ce : aggregate_cce;
  }
};

/// Exact NE/CCE and CE gaps of `mixed`. Requesting `ne` for a non-product
/// policy throws InputError.
GapReport equilibrium_gaps(const NormalFormGame& payoffs, const JointMixedPolicy& mixed,
                           EquilibriumKind kind = EquilibriumKind::cce);
GapReport equilibrium_gaps(const MarkovGame& game, const PurePolicySpace& space,
                           const JointMixedPolicy& mixed,
                           EquilibriumKind kind = EquilibriumKind::cce);

/// Value of agent i's optimal history-dependent response to the others'
/// marginal of `mixed`, computed by expectimax over the posterior on the
/// others' pure policies. Upper-bounds every policy of agent i, so its gap
/// to best_response measures how expressive Pi_i^pur is. Throws ComputeError
/// when the search tree exceeds `node_cap`.
double unrestricted_best_response(const MarkovGame& game, const PurePolicySpace& space,
                                  const JointMixedPolicy& mixed, std::size_t agent,
                                  std::size_t node_cap = std::size_t{1} << 22);

}  // namespace mamex
