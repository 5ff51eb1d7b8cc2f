#pragma once

#include <span>
#include <vector>

#include "mamex/game.hpp"
#include "mamex/hypothesis.hpp"

namespace mamex {

/// One observed step xi_h = (s_h, a_h, s_{h+1}).
struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  std::size_t next = 0;
};

/// Append-only record of every ingested transition, kept both as raw
/// per-step tuples and as next-state counts per (h, s, a). The model-free
/// loss only needs the counts: its targets depend on (s, a, s') alone, so
/// bucket means can be re-derived for any f_{h+1} and pi. One ledger serves
/// every agent and every joint policy.
class TransitionLedger {
 public:
  TransitionLedger() = default;
  TransitionLedger(std::size_t horizon, std::size_t states, std::size_t joint_actions);

  std::size_t horizon() const { return horizon_; }
  std::size_t num_states() const { return states_; }
  std::size_t num_joint_actions() const { return actions_; }
  std::size_t episodes() const { return episodes_; }

  void ingest(const Trajectory& trajectory);

  /// n_h(s, a).
  double visits(std::size_t h, std::size_t s, std::size_t a) const {
    return visits_[(h * states_ + s) * actions_ + a];
  }
  /// c_h(s' | s, a) over s'.
  std::span<const double> next_counts(std::size_t h, std::size_t s, std::size_t a) const {
    return {counts_.data() + ((h * states_ + s) * actions_ + a) * states_, states_};
  }
  const std::vector<double>& visit_table() const { return visits_; }
  const std::vector<double>& count_table() const { return counts_; }
  /// Raw tuples of step h in ingestion order.
  const std::vector<Transition>& transitions(std::size_t h) const { return raw_[h]; }

  /// Empirical kernel c / n; unvisited rows are uniform.
  TransitionKernel empirical_model() const;

 private:
  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::size_t episodes_ = 0;
  std::vector<double> visits_;
  std::vector<double> counts_;
  std::vector<std::vector<Transition>> raw_;
};

/// ybar_h(s, a) = r_h(s, a) + E_{s' ~ counts}<f_{h+1}(s', .), pi_{h+1}(.|s')>
/// for every bucket, [h][s][a]; 0 on unvisited buckets.
std::vector<double> bucket_mean_targets(const TransitionLedger& ledger, const QHypothesis& f,
                                        const MarkovJointPolicy& pi, std::size_t agent,
                                        const RewardTable& rewards);

/// Model-free empirical discrepancy
///   sum_h sum_{(s,a)} n_h(s, a) (f_h(s, a) - ybar_h(s, a))^2,
/// i.e. the squared-loss sum minus its infimum over f'_h, taken over
/// unconstrained tables so the infimum sits at the bucket means.
double L_model_free(const TransitionLedger& ledger, const QHypothesis& f,
                    const MarkovJointPolicy& pi, std::size_t agent,
                    const RewardTable& rewards);

inline constexpr double kProbabilityFloor = 1e-12;

/// Negative log-likelihood sum_{h,s,a,s'} c_h(s'|s,a) (-log max(P(s'|s,a), 1e-12)).
double L_model_based(const TransitionLedger& ledger, const TransitionKernel& model);
/// The same loss minus its minimum (attained at the empirical model). The
/// shift does not depend on the model or the policy.
double L_model_based_excess(const TransitionLedger& ledger, const TransitionKernel& model);
/// Negative log-likelihood of the empirical model.
double mle_negative_log_likelihood(const TransitionLedger& ledger);

/// D_H^2(p, q) = 1/2 sum (sqrt p - sqrt q)^2.
double hellinger_sq(std::span<const double> p, std::span<const double> q);

/// sum_h E_{(s,a) ~ weights_h}[(f_h - T_h^{pi} f_{h+1})(s, a)^2] with
/// `weights` an [h][s][a] occupancy (or a sum of occupancies).
double true_ell_model_free(const MarkovGame& game, const QHypothesis& f,
                           const MarkovJointPolicy& pi, std::size_t agent,
                           std::span<const double> weights);
/// Weights taken from the occupancy of the executed policy.
double true_ell_model_free(const MarkovGame& game, const QHypothesis& f,
                           const MarkovJointPolicy& pi, std::size_t agent,
                           const MarkovJointPolicy& executed);

/// sum_h sum_{(s,a)} weights_h(s, a) D_H^2(P_f(.|s,a), P(.|s,a)).
double true_ell_hellinger(const MarkovGame& game, const TransitionKernel& model,
                          std::span<const double> weights);
double true_ell_hellinger(const MarkovGame& game, const TransitionKernel& model,
                          const MarkovJointPolicy& executed);

}  // namespace mamex
