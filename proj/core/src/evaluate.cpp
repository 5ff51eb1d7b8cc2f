#include "mamex/evaluate.hpp"

#include <algorithm>
#include <cmath>

namespace mamex {

ValueTables evaluate_pure(const TransitionKernel& P, const RewardTable& rewards,
                          std::span<const double> rho, const MarkovJointPolicy& pi,
                          std::size_t agent, std::optional<double> clip_at) {
  const std::size_t H = P.horizon();
  const std::size_t S = P.num_states();
  const std::size_t A = P.num_joint_actions();
  ValueTables t;
  t.horizon = H;
  t.states = S;
  t.actions = A;
  t.V.assign((H + 1) * S, 0.0);
  t.Q.assign(H * S * A, 0.0);
  for (std::size_t h = H; h-- > 0;) {
    const double* v_next = t.V.data() + (h + 1) * S;
    for (std::size_t s = 0; s < S; ++s) {
      const auto dist = pi.at(h, s);
      double v = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        const auto row = P.row(h, s, a);
        double q = rewards(agent, h, s, a);
        for (std::size_t sn = 0; sn < S; ++sn) q += row[sn] * v_next[sn];
        t.Q[(h * S + s) * A + a] = q;
        v += dist[a] * q;
      }
      if (clip_at) v = std::min(v, *clip_at);
      t.V[h * S + s] = v;
    }
  }
  for (std::size_t s = 0; s < S; ++s) t.value_at_rho += rho[s] * t.V[s];
  return t;
}

ValueTables evaluate_pure(const MarkovGame& game, const MarkovJointPolicy& pi,
                          std::size_t agent) {
  return evaluate_pure(game.transition(), game.rewards(), game.rho(), pi, agent);
}

std::vector<double> bellman_apply(std::span<const double> f_next,
                                  const MarkovJointPolicy& pi, std::size_t agent,
                                  std::size_t h, const TransitionKernel& P,
                                  const RewardTable& rewards) {
  const std::size_t S = P.num_states();
  const std::size_t A = P.num_joint_actions();
  const bool last = h + 1 == P.horizon();
  if (!last && f_next.size() != S * A) {
    throw InputError("bellman_apply: f_next must be an [s][a] table");
  }
  std::vector<double> v_next(S, 0.0);
  if (!last) {
    for (std::size_t sn = 0; sn < S; ++sn) {
      const auto dist = pi.at(h + 1, sn);
      for (std::size_t a = 0; a < A; ++a) v_next[sn] += dist[a] * f_next[sn * A + a];
    }
  }
  std::vector<double> out(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const auto row = P.row(h, s, a);
      double q = rewards(agent, h, s, a);
      for (std::size_t sn = 0; sn < S; ++sn) q += row[sn] * v_next[sn];
      out[s * A + a] = q;
    }
  }
  return out;
}

std::vector<double> occupancy(const TransitionKernel& P, std::span<const double> rho,
                              const MarkovJointPolicy& pi) {
  const std::size_t H = P.horizon();
  const std::size_t S = P.num_states();
  const std::size_t A = P.num_joint_actions();
  std::vector<double> occ(H * S * A, 0.0);
  std::vector<double> d(rho.begin(), rho.end());
  std::vector<double> d_next(S);
  for (std::size_t h = 0; h < H; ++h) {
    std::fill(d_next.begin(), d_next.end(), 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      if (d[s] == 0.0) continue;
      const auto dist = pi.at(h, s);
      for (std::size_t a = 0; a < A; ++a) {
        const double w = d[s] * dist[a];
        if (w == 0.0) continue;
        occ[(h * S + s) * A + a] = w;
        const auto row = P.row(h, s, a);
        for (std::size_t sn = 0; sn < S; ++sn) d_next[sn] += w * row[sn];
      }
    }
    std::swap(d, d_next);
  }
  return occ;
}

NormalFormGame true_payoffs(const MarkovGame& game, const PurePolicySpace& space) {
  space.check_compatible(game);
  const std::size_t n = game.num_agents();
  std::vector<std::vector<double>> values(n, std::vector<double>(space.joint_size()));
  for (std::size_t j = 0; j < space.joint_size(); ++j) {
    const auto pi = space.materialize(j, game.action_layout());
    for (std::size_t i = 0; i < n; ++i) values[i][j] = evaluate_pure(game, pi, i).value_at_rho;
  }
  return NormalFormGame(space.layout(), std::move(values));
}

double expected_payoff(const NormalFormGame& payoffs, const JointMixedPolicy& mixed,
                       std::size_t agent) {
  const auto& u = payoffs.payoffs(agent);
  double total = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) total += mixed.mass(j) * u[j];
  return total;
}

namespace {

void check_shapes(const NormalFormGame& payoffs, const JointMixedPolicy& mixed) {
  if (!(payoffs.layout() == mixed.layout())) {
    throw InputError("mixed policy layout does not match the payoff tensors");
  }
}

// sum_{o} w[o] * U_i(u, o) for every own strategy u.
std::vector<double> deviation_values(const NormalFormGame& payoffs, std::size_t agent,
                                     std::span<const double> others_weights) {
  const auto& layout = payoffs.layout();
  const auto& u = payoffs.payoffs(agent);
  std::vector<double> out(layout.size_of(agent), 0.0);
  for (std::size_t j = 0; j < layout.size(); ++j) {
    const double w = others_weights[layout.others_index(j, agent)];
    if (w != 0.0) out[layout.digit(j, agent)] += w * u[j];
  }
  return out;
}

}  // namespace

Deviation best_response(const NormalFormGame& payoffs, const JointMixedPolicy& mixed,
                        std::size_t agent) {
  check_shapes(payoffs, mixed);
  const auto others = mixed.others_marginal(agent);
  const auto values = deviation_values(payoffs, agent, others);
  const std::size_t best = argmax_lowest(values);
  return {best, values[best]};
}

Deviation best_response(const MarkovGame& game, const PurePolicySpace& space,
                        const JointMixedPolicy& mixed, std::size_t agent) {
  return best_response(true_payoffs(game, space), mixed, agent);
}

StrategyModification strategy_mod_value(const NormalFormGame& payoffs,
                                        const JointMixedPolicy& mixed,
                                        std::size_t agent) {
  check_shapes(payoffs, mixed);
  const std::size_t m = payoffs.num_strategies(agent);
  const auto own = mixed.marginal(agent);
  StrategyModification out;
  out.map.resize(m);
  for (std::size_t u = 0; u < m; ++u) {
    out.map[u] = u;
    if (own[u] <= 0.0) continue;
    const auto cond = mixed.conditional_of_others(agent, u);
    if (cond.empty()) continue;
    const auto values = deviation_values(payoffs, agent, cond);
    const std::size_t best = argmax_lowest(values);
    out.map[u] = best;
    out.value += own[u] * values[best];
  }
  return out;
}

GapReport equilibrium_gaps(const NormalFormGame& payoffs, const JointMixedPolicy& mixed,
                           EquilibriumKind kind) {
  check_shapes(payoffs, mixed);
  if (kind == EquilibriumKind::ne && !mixed.is_product()) {
    throw InputError("NE gap requested for a non-product (correlated) policy");
  }
  GapReport report;
  for (std::size_t i = 0; i < payoffs.num_agents(); ++i) {
    AgentGap g;
    g.value = expected_payoff(payoffs, mixed, i);
    g.cce_gap = std::max(0.0, best_response(payoffs, mixed, i).value - g.value);
    g.ce_gap = std::max(0.0, strategy_mod_value(payoffs, mixed, i).value - g.value);
    report.aggregate_cce += g.cce_gap;
    report.aggregate_ce += g.ce_gap;
    report.agents.push_back(g);
  }
  return report;
}

GapReport equilibrium_gaps(const MarkovGame& game, const PurePolicySpace& space,
                           const JointMixedPolicy& mixed, EquilibriumKind kind) {
  return equilibrium_gaps(true_payoffs(game, space), mixed, kind);
}

namespace {

struct ResponseSearch {
  const MarkovGame& game;
  std::size_t agent;
  std::vector<std::size_t> others;  // agent ids other than `agent`
  MixedRadix others_actions;        // joint actions of the others
  std::vector<MarkovJointPolicy> profiles;  // others' joint pure profiles, as
                                            // distributions over others_actions
  std::size_t node_cap;
  std::size_t nodes = 0;

  double value(std::size_t h, std::size_t s, const std::vector<double>& weights) {
    if (h == game.horizon()) return 0.0;
    if (++nodes > node_cap) {
      throw ComputeError("unrestricted_best_response: search exceeds node cap");
    }
    const std::size_t S = game.num_states();
    const std::size_t Ao = others_actions.size();
    const auto& layout = game.action_layout();
    const std::size_t own_actions = layout.size_of(agent);

    std::vector<double> gain(own_actions, 0.0);
    std::vector<double> posterior(weights.size());
    std::vector<std::size_t> digits(layout.num_components());
    for (std::size_t ao = 0; ao < Ao; ++ao) {
      double q = 0.0;
      for (std::size_t o = 0; o < profiles.size(); ++o) {
        posterior[o] = weights[o] * profiles[o].at(h, s)[ao];
        q += posterior[o];
      }
      if (q <= 0.0) continue;
      for (double& w : posterior) w /= q;
      std::vector<double> cont(S, 0.0);
      bool cont_ready = false;
      for (std::size_t ai = 0; ai < own_actions; ++ai) {
        for (std::size_t k = 0; k < others.size(); ++k) {
          digits[others[k]] = others_actions.digit(ao, k);
        }
        digits[agent] = ai;
        const std::size_t a = layout.encode(digits);
        const auto row = game.transition().row(h, s, a);
        double v = game.rewards()(agent, h, s, a);
        for (std::size_t sn = 0; sn < S; ++sn) {
          if (row[sn] == 0.0) continue;
          if (!cont_ready) {
            for (std::size_t t = 0; t < S; ++t) cont[t] = -1.0;
            cont_ready = true;
          }
          if (cont[sn] < 0.0) cont[sn] = value(h + 1, sn, posterior);
          v += row[sn] * cont[sn];
        }
        gain[ai] += q * v;
      }
    }
    return *std::max_element(gain.begin(), gain.end());
  }
};

}  // namespace

double unrestricted_best_response(const MarkovGame& game, const PurePolicySpace& space,
                                  const JointMixedPolicy& mixed, std::size_t agent,
                                  std::size_t node_cap) {
  space.check_compatible(game);
  const auto& action_layout = game.action_layout();
  const std::size_t n = game.num_agents();

  std::vector<std::size_t> others;
  std::vector<std::size_t> other_action_sizes;
  std::vector<std::size_t> other_policy_sizes;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == agent) continue;
    others.push_back(k);
    other_action_sizes.push_back(action_layout.size_of(k));
    other_policy_sizes.push_back(space.size(k));
  }
  if (others.empty()) {
    // Single agent: plain DP over the agent's own actions.
    const std::size_t H = game.horizon();
    const std::size_t S = game.num_states();
    std::vector<double> v(S, 0.0), cur(S);
    for (std::size_t h = H; h-- > 0;) {
      for (std::size_t s = 0; s < S; ++s) {
        double best = -1.0;
        for (std::size_t a = 0; a < game.num_joint_actions(); ++a) {
          const auto row = game.transition().row(h, s, a);
          double q = game.rewards()(agent, h, s, a);
          for (std::size_t sn = 0; sn < S; ++sn) q += row[sn] * v[sn];
          best = std::max(best, q);
        }
        cur[s] = best;
      }
      std::swap(v, cur);
    }
    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) total += game.rho()[s] * v[s];
    return total;
  }

  ResponseSearch search{game, agent, others, MixedRadix(other_action_sizes), {}, node_cap};
  const MixedRadix profile_layout(other_policy_sizes);
  std::vector<std::vector<PurePolicy>> other_sets;
  for (std::size_t k : others) other_sets.push_back(space.policies(k));
  const PurePolicySpace others_space(std::move(other_sets));
  for (std::size_t o = 0; o < profile_layout.size(); ++o) {
    search.profiles.push_back(others_space.materialize(o, search.others_actions));
  }
  const auto weights = mixed.others_marginal(agent);
  double total = 0.0;
  for (std::size_t s = 0; s < game.num_states(); ++s) {
    if (game.rho()[s] > 0.0) total += game.rho()[s] * search.value(0, s, weights);
  }
  return total;
}

}  // namespace mamex
