#include "mamex/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace mamex {
namespace {

constexpr double kMassTol = 1e-10;

void check_distribution(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw InputError(what + " has a negative or NaN entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kMassTol) {
    throw InputError(what + " sums to " + std::to_string(sum) + ", not 1");
  }
}

// |A|^(S*H), saturating at max size_t.
std::size_t saturating_power(std::size_t base, std::size_t exponent) {
  std::size_t out = 1;
  for (std::size_t k = 0; k < exponent; ++k) {
    if (base != 0 && out > std::numeric_limits<std::size_t>::max() / base) {
      return std::numeric_limits<std::size_t>::max();
    }
    out *= base;
  }
  return out;
}

}  // namespace

PurePolicy PurePolicy::deterministic(std::size_t horizon, std::size_t states,
                                     std::size_t num_actions,
                                     const std::vector<std::size_t>& actions) {
  if (actions.size() != horizon * states) {
    throw InputError("deterministic policy needs one action per (h, s)");
  }
  PurePolicy p;
  p.horizon_ = horizon;
  p.states_ = states;
  p.actions_ = num_actions;
  p.kind_ = PolicyKind::deterministic;
  p.probs_.assign(horizon * states * num_actions, 0.0);
  for (std::size_t hs = 0; hs < horizon * states; ++hs) {
    if (actions[hs] >= num_actions) throw InputError("policy action out of range");
    p.probs_[hs * num_actions + actions[hs]] = 1.0;
  }
  return p;
}

PurePolicy PurePolicy::stochastic(std::size_t horizon, std::size_t states,
                                  std::size_t num_actions, std::vector<double> probs,
                                  std::vector<double> parameters) {
  if (probs.size() != horizon * states * num_actions) {
    throw InputError("stochastic policy table has the wrong size");
  }
  PurePolicy p;
  p.horizon_ = horizon;
  p.states_ = states;
  p.actions_ = num_actions;
  p.kind_ = PolicyKind::parametric;
  p.probs_ = std::move(probs);
  p.parameters_ = std::move(parameters);
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t s = 0; s < states; ++s) {
      check_distribution(p.at(h, s), "policy distribution at (h=" +
                                         std::to_string(h) + ", s=" +
                                         std::to_string(s) + ")");
    }
  }
  return p;
}

std::size_t PurePolicy::action(std::size_t h, std::size_t s) const {
  return argmax_lowest(at(h, s));
}

PurePolicySpace::PurePolicySpace(std::vector<std::vector<PurePolicy>> per_agent,
                                 std::size_t joint_cap)
    : per_agent_(std::move(per_agent)) {
  if (per_agent_.empty()) throw InputError("policy space needs at least one agent");
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < per_agent_.size(); ++i) {
    if (per_agent_[i].empty()) {
      throw InputError("policy space of agent " + std::to_string(i) + " is empty");
    }
    sizes.push_back(per_agent_[i].size());
  }
  layout_ = MixedRadix(std::move(sizes), joint_cap);
}

void PurePolicySpace::check_compatible(const MarkovGame& game) const {
  if (num_agents() != game.num_agents()) {
    throw InputError("policy space has " + std::to_string(num_agents()) +
                     " agents, game has " + std::to_string(game.num_agents()));
  }
  for (std::size_t i = 0; i < num_agents(); ++i) {
    for (std::size_t k = 0; k < size(i); ++k) {
      const auto& p = per_agent_[i][k];
      if (p.horizon() != game.horizon() || p.num_states() != game.num_states() ||
          p.num_actions() != game.action_layout().size_of(i)) {
        throw InputError("policy " + std::to_string(k) + " of agent " +
                         std::to_string(i) + " does not match the game shape");
      }
    }
  }
}

MarkovJointPolicy PurePolicySpace::materialize(std::size_t joint_index,
                                               const MixedRadix& action_layout) const {
  const auto members = layout_.decode(joint_index);
  const PurePolicy& first = per_agent_[0][members[0]];
  const std::size_t H = first.horizon();
  const std::size_t S = first.num_states();
  const std::size_t A = action_layout.size();
  MarkovJointPolicy out(H, S, A);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      auto dist = out.at(h, s);
      for (std::size_t a = 0; a < A; ++a) {
        double p = 1.0;
        for (std::size_t i = 0; i < members.size() && p > 0.0; ++i) {
          p *= per_agent_[i][members[i]].prob(h, s, action_layout.digit(a, i));
        }
        dist[a] = p;
      }
    }
  }
  return out;
}

std::vector<MarkovJointPolicy> PurePolicySpace::materialize_all(
    const MixedRadix& action_layout) const {
  std::vector<MarkovJointPolicy> out;
  out.reserve(joint_size());
  for (std::size_t j = 0; j < joint_size(); ++j) {
    out.push_back(materialize(j, action_layout));
  }
  return out;
}

JointMixedPolicy JointMixedPolicy::from_mass(MixedRadix layout, std::vector<double> mass) {
  if (mass.size() != layout.size()) {
    throw InputError("mixed policy has " + std::to_string(mass.size()) +
                     " masses, layout needs " + std::to_string(layout.size()));
  }
  check_distribution(mass, "mixed policy");
  JointMixedPolicy p;
  p.layout_ = std::move(layout);
  p.mass_ = std::move(mass);
  return p;
}

JointMixedPolicy JointMixedPolicy::product(MixedRadix layout,
                                           std::vector<std::vector<double>> marginals) {
  if (marginals.size() != layout.num_components()) {
    throw InputError("product policy needs one marginal per agent");
  }
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    if (marginals[i].size() != layout.size_of(i)) {
      throw InputError("marginal " + std::to_string(i) + " has the wrong size");
    }
    check_distribution(marginals[i], "marginal of agent " + std::to_string(i));
  }
  JointMixedPolicy p;
  p.mass_.assign(layout.size(), 1.0);
  for (std::size_t j = 0; j < layout.size(); ++j) {
    for (std::size_t i = 0; i < marginals.size(); ++i) {
      p.mass_[j] *= marginals[i][layout.digit(j, i)];
    }
  }
  p.layout_ = std::move(layout);
  p.is_product_ = true;
  p.marginals_ = std::move(marginals);
  return p;
}

JointMixedPolicy JointMixedPolicy::point_mass(MixedRadix layout, std::size_t index) {
  if (index >= layout.size()) throw InputError("point mass index out of range");
  std::vector<std::vector<double>> marginals;
  const auto digits = layout.decode(index);
  for (std::size_t i = 0; i < layout.num_components(); ++i) {
    std::vector<double> m(layout.size_of(i), 0.0);
    m[digits[i]] = 1.0;
    marginals.push_back(std::move(m));
  }
  return product(std::move(layout), std::move(marginals));
}

JointMixedPolicy JointMixedPolicy::uniform(MixedRadix layout) {
  std::vector<std::vector<double>> marginals;
  for (std::size_t i = 0; i < layout.num_components(); ++i) {
    marginals.emplace_back(layout.size_of(i),
                           1.0 / static_cast<double>(layout.size_of(i)));
  }
  return product(std::move(layout), std::move(marginals));
}

JointMixedPolicy JointMixedPolicy::uniform_mixture(std::span<const JointMixedPolicy> parts) {
  if (parts.empty()) throw InputError("uniform_mixture of no policies");
  if (parts.size() == 1) return parts[0];
  std::vector<double> mass(parts[0].layout().size(), 0.0);
  for (const auto& part : parts) {
    if (!(part.layout() == parts[0].layout())) {
      throw InputError("uniform_mixture: layouts differ");
    }
    for (std::size_t j = 0; j < mass.size(); ++j) mass[j] += part.mass(j);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (double& m : mass) m *= inv;
  return from_mass(parts[0].layout(), std::move(mass));
}

std::vector<double> JointMixedPolicy::marginal(std::size_t agent) const {
  if (is_product_) return marginals_[agent];
  std::vector<double> out(layout_.size_of(agent), 0.0);
  for (std::size_t j = 0; j < mass_.size(); ++j) out[layout_.digit(j, agent)] += mass_[j];
  return out;
}

std::vector<double> JointMixedPolicy::others_marginal(std::size_t agent) const {
  std::vector<double> out(layout_.others_size(agent), 0.0);
  for (std::size_t j = 0; j < mass_.size(); ++j) {
    out[layout_.others_index(j, agent)] += mass_[j];
  }
  return out;
}

std::vector<double> JointMixedPolicy::conditional_of_others(std::size_t agent,
                                                            std::size_t own) const {
  std::vector<double> out(layout_.others_size(agent), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < mass_.size(); ++j) {
    if (layout_.digit(j, agent) != own) continue;
    out[layout_.others_index(j, agent)] += mass_[j];
    total += mass_[j];
  }
  if (total <= 0.0) return {};
  for (double& x : out) x /= total;
  return out;
}

std::vector<PurePolicy> enumerate_deterministic(const MarkovGame& game,
                                                std::size_t agent,
                                                const EnumerateOptions& options) {
  if (agent >= game.num_agents()) throw InputError("agent index out of range");
  const std::size_t H = game.horizon();
  const std::size_t S = game.num_states();
  const std::size_t A = game.action_layout().size_of(agent);
  const std::size_t cells = H * S;
  const std::size_t total = saturating_power(A, cells);

  std::vector<PurePolicy> out;
  if (!options.subsample) {
    if (total > options.cap) {
      throw InputError("agent " + std::to_string(agent) + " has " +
                       (total == std::numeric_limits<std::size_t>::max()
                            ? std::string("too many")
                            : std::to_string(total)) +
                       " deterministic policies, above cap " +
                       std::to_string(options.cap) + "; request a subsample");
    }
    std::vector<std::size_t> actions(cells, 0);
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t rest = code;
      for (std::size_t c = cells; c-- > 0;) {
        actions[c] = rest % A;
        rest /= A;
      }
      out.push_back(PurePolicy::deterministic(H, S, A, actions));
    }
    return out;
  }

  const std::size_t want = *options.subsample;
  if (want == 0) throw InputError("subsample size must be positive");
  if (want > options.cap) throw InputError("subsample size exceeds cap");
  if (want > total) {
    throw InputError("subsample of " + std::to_string(want) +
                     " requested but only " + std::to_string(total) +
                     " deterministic policies exist");
  }
  std::mt19937_64 rng(derive_seed(options.seed, 0xde7, agent));
  std::set<std::vector<std::size_t>> seen;
  std::vector<std::size_t> actions(cells);
  while (out.size() < want) {
    for (auto& a : actions) a = uniform_index(rng, A);
    if (!seen.insert(actions).second) continue;
    out.push_back(PurePolicy::deterministic(H, S, A, actions));
  }
  return out;
}

std::vector<PurePolicy> log_linear_cover(const LogLinearFeatures& features,
                                         std::size_t horizon, double eps,
                                         std::size_t cap) {
  const std::size_t d = features.dim;
  if (d == 0 || features.states == 0 || features.actions == 0) {
    throw InputError("log-linear features need positive sizes");
  }
  if (features.psi.size() != features.states * features.actions * d) {
    throw InputError("log-linear feature table has the wrong size");
  }
  if (!(eps > 0.0)) throw InputError("grid step must be positive");
  for (std::size_t s = 0; s < features.states; ++s) {
    for (std::size_t a = 0; a < features.actions; ++a) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) norm2 += features(s, a, j) * features(s, a, j);
      if (norm2 > 1.0 + 1e-12) {
        throw InputError("||psi(s=" + std::to_string(s) + ", a=" +
                         std::to_string(a) + ")|| exceeds 1");
      }
    }
  }

  const auto steps = static_cast<long long>(std::floor(1.0 / eps + 1e-9));
  const std::size_t side = static_cast<std::size_t>(2 * steps + 1);
  if (saturating_power(side, d) > 64 * cap + 1024) {
    throw InputError("log-linear grid is far beyond the cap");
  }
  std::vector<std::vector<double>> grid;
  std::vector<long long> m(d, -steps);
  while (true) {
    double norm2 = 0.0;
    for (long long v : m) norm2 += static_cast<double>(v * v) * eps * eps;
    if (norm2 <= 1.0 + 1e-12) {
      std::vector<double> theta(d);
      for (std::size_t j = 0; j < d; ++j) theta[j] = static_cast<double>(m[j]) * eps;
      grid.push_back(std::move(theta));
      if (grid.size() > cap) {
        throw InputError("log-linear cover exceeds cap " + std::to_string(cap));
      }
    }
    std::size_t j = d;
    while (j-- > 0) {
      if (m[j] < steps) {
        ++m[j];
        break;
      }
      m[j] = -steps;
    }
    if (j == static_cast<std::size_t>(-1)) break;
  }

  const std::size_t S = features.states;
  const std::size_t A = features.actions;
  std::vector<PurePolicy> out;
  out.reserve(grid.size());
  for (const auto& theta : grid) {
    std::vector<double> probs(horizon * S * A);
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<double> logits(A);
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < A; ++a) {
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += theta[j] * features(s, a, j);
        logits[a] = z;
        top = std::max(top, z);
      }
      double total = 0.0;
      for (double& z : logits) {
        z = std::exp(z - top);
        total += z;
      }
      for (std::size_t h = 0; h < horizon; ++h) {
        for (std::size_t a = 0; a < A; ++a) {
          probs[(h * S + s) * A + a] = logits[a] / total;
        }
      }
    }
    out.push_back(PurePolicy::stochastic(horizon, S, A, std::move(probs), theta));
  }
  return out;
}

std::size_t sample_pure(const JointMixedPolicy& joint, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_categorical(rng, joint.mass());
}

}  // namespace mamex
