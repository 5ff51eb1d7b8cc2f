#include "mamex/discrepancy.hpp"

#include <algorithm>
#include <cmath>

#include "mamex/evaluate.hpp"

namespace mamex {

TransitionLedger::TransitionLedger(std::size_t horizon, std::size_t states,
                                   std::size_t joint_actions)
    : horizon_(horizon), states_(states), actions_(joint_actions),
      visits_(horizon * states * joint_actions, 0.0),
      counts_(horizon * states * joint_actions * states, 0.0), raw_(horizon) {}

void TransitionLedger::ingest(const Trajectory& trajectory) {
  if (trajectory.steps.size() != horizon_) {
    throw InputError("trajectory length " + std::to_string(trajectory.steps.size()) +
                     " does not match horizon " + std::to_string(horizon_));
  }
  for (std::size_t h = 0; h < horizon_; ++h) {
    const auto& step = trajectory.steps[h];
    const std::size_t next =
        h + 1 < horizon_ ? trajectory.steps[h + 1].state : trajectory.final_state;
    if (step.state >= states_ || step.joint_action >= actions_ || next >= states_) {
      throw InputError("trajectory index out of range at h=" + std::to_string(h));
    }
    const std::size_t r = (h * states_ + step.state) * actions_ + step.joint_action;
    visits_[r] += 1.0;
    counts_[r * states_ + next] += 1.0;
    raw_[h].push_back({step.state, step.joint_action, next});
  }
  ++episodes_;
}

TransitionKernel TransitionLedger::empirical_model() const {
  TransitionKernel k(horizon_, states_, actions_);
  for (std::size_t r = 0; r < k.num_rows(); ++r) {
    auto row = k.row(r);
    const double n = visits_[r];
    for (std::size_t sn = 0; sn < states_; ++sn) {
      row[sn] = n > 0.0 ? counts_[r * states_ + sn] / n : 1.0 / static_cast<double>(states_);
    }
  }
  return k;
}

namespace {

void check_ledger(const TransitionLedger& ledger, std::size_t H, std::size_t S,
                  std::size_t A) {
  if (ledger.horizon() != H || ledger.num_states() != S || ledger.num_joint_actions() != A) {
    throw InputError("ledger shape does not match the hypothesis");
  }
}

}  // namespace

std::vector<double> bucket_mean_targets(const TransitionLedger& ledger, const QHypothesis& f,
                                        const MarkovJointPolicy& pi, std::size_t agent,
                                        const RewardTable& rewards) {
  const std::size_t H = f.horizon();
  const std::size_t S = f.num_states();
  const std::size_t A = f.num_actions();
  check_ledger(ledger, H, S, A);
  std::vector<double> ybar(H * S * A, 0.0);
  std::vector<double> v_next(S);
  for (std::size_t h = 0; h < H; ++h) {
    std::fill(v_next.begin(), v_next.end(), 0.0);
    if (h + 1 < H) {
      for (std::size_t sn = 0; sn < S; ++sn) {
        const auto dist = pi.at(h + 1, sn);
        for (std::size_t a = 0; a < A; ++a) v_next[sn] += dist[a] * f(h + 1, sn, a);
      }
    }
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        const double n = ledger.visits(h, s, a);
        if (n == 0.0) continue;
        const auto c = ledger.next_counts(h, s, a);
        double acc = 0.0;
        for (std::size_t sn = 0; sn < S; ++sn) acc += c[sn] * v_next[sn];
        ybar[(h * S + s) * A + a] = rewards(agent, h, s, a) + acc / n;
      }
    }
  }
  return ybar;
}

double L_model_free(const TransitionLedger& ledger, const QHypothesis& f,
                    const MarkovJointPolicy& pi, std::size_t agent,
                    const RewardTable& rewards) {
  const auto ybar = bucket_mean_targets(ledger, f, pi, agent, rewards);
  const auto& n = ledger.visit_table();
  const auto& fv = f.data();
  double total = 0.0;
  for (std::size_t b = 0; b < ybar.size(); ++b) {
    if (n[b] == 0.0) continue;
    const double e = fv[b] - ybar[b];
    total += n[b] * e * e;
  }
  return total;
}

double L_model_based(const TransitionLedger& ledger, const TransitionKernel& model) {
  check_ledger(ledger, model.horizon(), model.num_states(), model.num_joint_actions());
  const auto& counts = ledger.count_table();
  const auto& probs = model.data();
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0.0) continue;
    total -= counts[k] * std::log(std::max(probs[k], kProbabilityFloor));
  }
  return total;
}

double mle_negative_log_likelihood(const TransitionLedger& ledger) {
  const std::size_t S = ledger.num_states();
  const auto& counts = ledger.count_table();
  const auto& visits = ledger.visit_table();
  double total = 0.0;
  for (std::size_t r = 0; r < visits.size(); ++r) {
    if (visits[r] == 0.0) continue;
    for (std::size_t sn = 0; sn < S; ++sn) {
      const double c = counts[r * S + sn];
      if (c > 0.0) total -= c * std::log(c / visits[r]);
    }
  }
  return total;
}

double L_model_based_excess(const TransitionLedger& ledger, const TransitionKernel& model) {
  return std::max(0.0, L_model_based(ledger, model) - mle_negative_log_likelihood(ledger));
}

double hellinger_sq(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("hellinger_sq: size mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = std::sqrt(std::max(p[k], 0.0)) - std::sqrt(std::max(q[k], 0.0));
    total += d * d;
  }
  return 0.5 * total;
}

double true_ell_model_free(const MarkovGame& game, const QHypothesis& f,
                           const MarkovJointPolicy& pi, std::size_t agent,
                           std::span<const double> weights) {
  const std::size_t H = game.horizon();
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_joint_actions();
  if (weights.size() != H * S * A) throw InputError("occupancy weights have the wrong size");
  double total = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    const auto target = bellman_apply(h + 1 < H ? f.step(h + 1) : std::span<const double>{},
                                      pi, agent, h, game.transition(), game.rewards());
    const auto fh = f.step(h);
    for (std::size_t sa = 0; sa < S * A; ++sa) {
      const double w = weights[h * S * A + sa];
      if (w == 0.0) continue;
      const double e = fh[sa] - target[sa];
      total += w * e * e;
    }
  }
  return total;
}

double true_ell_model_free(const MarkovGame& game, const QHypothesis& f,
                           const MarkovJointPolicy& pi, std::size_t agent,
                           const MarkovJointPolicy& executed) {
  const auto occ = occupancy(game.transition(), game.rho(), executed);
  return true_ell_model_free(game, f, pi, agent, occ);
}

double true_ell_hellinger(const MarkovGame& game, const TransitionKernel& model,
                          std::span<const double> weights) {
  const auto& P = game.transition();
  if (model.num_rows() != P.num_rows() || model.num_states() != P.num_states()) {
    throw InputError("model shape does not match the game");
  }
  if (weights.size() != P.num_rows()) throw InputError("occupancy weights have the wrong size");
  double total = 0.0;
  for (std::size_t r = 0; r < P.num_rows(); ++r) {
    if (weights[r] == 0.0) continue;
    total += weights[r] * hellinger_sq(model.row(r), P.row(r));
  }
  return total;
}

double true_ell_hellinger(const MarkovGame& game, const TransitionKernel& model,
                          const MarkovJointPolicy& executed) {
  const auto occ = occupancy(game.transition(), game.rho(), executed);
  return true_ell_hellinger(game, model, occ);
}

}  // namespace mamex
