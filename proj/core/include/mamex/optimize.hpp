#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mamex/discrepancy.hpp"
#include "mamex/game.hpp"
#include "mamex/hypothesis.hpp"

namespace mamex {

enum class InnerMethod { exact_tabular, gradient_ascent, mirror_ascent };

InnerMethod parse_inner_method(const std::string& text);
std::string to_string(InnerMethod method);

struct InnerSolveConfig {
  InnerMethod method = InnerMethod::exact_tabular;
  double step = 0.5;          // mirror / gradient ascent base step
  std::size_t iters = 200;    // ascent iterations per restart
  std::size_t restarts = 3;   // starting points, the data fit included
  std::size_t sweeps = 200;   // cap on coordinate sweeps (exact solvers)
  double tol = 1e-12;         // stop once a sweep moves the iterate less than this

  /// Throws InputError on a non-positive step or a zero cap.
  void validate() const;
};

/// Everything one inner solve reads: the data, the known rewards and initial
/// distribution, the evaluated joint policy and agent, and eta.
struct PayoffProblem {
  const TransitionLedger& ledger;
  const RewardTable& rewards;
  std::span<const double> rho;
  double reward_cap;
  const MarkovJointPolicy& pi;
  std::size_t agent;
  double eta;
};

// ---- model-free ------------------------------------------------------------

struct ModelFreeSolution {
  double objective = 0.0;  // V_f(rho) - eta * L(f)
  double value = 0.0;      // V_f(rho)
  double loss = 0.0;       // L(f)
  QHypothesis f;
};

/// V_f(rho) - eta * L_model_free(f) for a tabular Q hypothesis.
double modelfree_objective(const PayoffProblem& problem, const QHypothesis& f);

/// Greedy backward fit f_h = clip(ybar_h(f_{h+1})), unvisited entries at R.
QHypothesis bucket_mean_fit(const PayoffProblem& problem);

/// The tabular objective is a concave quadratic in the table with a box
/// constraint, so projected Gauss-Seidel coordinate ascent reaches its
/// maximum. Entries that touch neither the data nor the initial value are set
/// to R. Starts from the bucket-mean fit.
ModelFreeSolution exact_tabular_modelfree(const PayoffProblem& problem,
                                          const InnerSolveConfig& config);

/// Accelerated projected gradient ascent (FISTA) on the same objective,
/// `config.iters` iterations from `start` (the bucket-mean fit by default).
ModelFreeSolution gradient_modelfree(const PayoffProblem& problem,
                                     const InnerSolveConfig& config,
                                     std::optional<QHypothesis> start = std::nullopt);

struct LinearQSolution {
  double objective = 0.0;
  double value = 0.0;
  double loss = 0.0;
  std::vector<std::vector<double>> theta;
  QHypothesis f;
};

/// Projected gradient ascent over theta_h with ||theta_h|| <= sqrt(d) and
/// values clipped into [0, R]; starts from theta = 0, the least-squares
/// projection of the bucket-mean fit, and `reference` when given.
LinearQSolution linear_q_ascent(const PayoffProblem& problem,
                                std::shared_ptr<const FeatureMap> features,
                                const InnerSolveConfig& config,
                                const QHypothesis* reference = nullptr);

// ---- model-based -----------------------------------------------------------

struct ModelBasedSolution {
  double objective = 0.0;  // V_P(rho) - eta * (NLL(P) - NLL(MLE))
  double value = 0.0;
  double loss = 0.0;       // excess negative log-likelihood
  TransitionKernel model;
};

/// V_P(rho) with per-step values capped at R, minus eta times the excess
/// negative log-likelihood (the likelihood shift changes no argmax).
double modelbased_objective(const PayoffProblem& problem, const TransitionKernel& model);

/// Exact layer-by-layer ascent. With the other steps fixed, V_P(rho) is
/// linear in each row of step h, so every row solves
///   max_p  w <p, v> + eta sum_{s'} c(s') log p(s')
/// in closed form up to a scalar root. Layer updates that lower the capped
/// objective are rejected, so the objective never decreases.
ModelBasedSolution block_ascent_modelbased(const PayoffProblem& problem,
                                           const InnerSolveConfig& config,
                                           const TransitionKernel& start);

/// Mirror ascent on row logits with per-row step step / (1 + eta * n_row);
/// keeps the best iterate.
ModelBasedSolution mirror_ascent_modelbased(const PayoffProblem& problem,
                                            const InnerSolveConfig& config,
                                            const TransitionKernel& start);

struct LinearMixtureSolution {
  double objective = 0.0;
  double value = 0.0;
  double loss = 0.0;
  std::vector<std::vector<double>> theta;
};

/// Projected gradient ascent over linear-mixture weights; steps are backed
/// off until every induced row stays a distribution. `base.theta` must be a
/// feasible starting point.
LinearMixtureSolution linear_mixture_ascent(const PayoffProblem& problem,
                                            const LinearMixtureModel& base,
                                            const InnerSolveConfig& config);

// ---- dispatch --------------------------------------------------------------

enum class HypothesisKind { tabular_q, linear_q, tabular_model, linear_mixture };

struct HypothesisClass {
  HypothesisKind kind = HypothesisKind::tabular_q;
  std::shared_ptr<const FeatureMap> q_features;          // linear_q
  std::shared_ptr<const LinearMixtureModel> mixture;     // linear_mixture

  bool model_based() const {
    return kind == HypothesisKind::tabular_model || kind == HypothesisKind::linear_mixture;
  }
};

/// Optional extra restart candidates used in tests (the realizable
/// hypothesis of the true game).
struct PayoffReference {
  const QHypothesis* q = nullptr;
  const TransitionKernel* model = nullptr;
};

struct PayoffSolution {
  double objective = 0.0;
  double value = 0.0;
  double loss = 0.0;
  std::size_t restart = 0;  // index of the winning start
  std::optional<QHypothesis> q;
  std::optional<TransitionKernel> model;
  std::vector<std::vector<double>> theta;
};

/// sup_f V_f(rho) - eta * L(f) over the class, approximated by the configured
/// solver over several deterministic starts. The data fit (bucket means or
/// the empirical model) and `reference` are always among the candidates, so
/// the returned objective is at least theirs. Throws ComputeError on a
/// non-finite objective, naming the restart.
PayoffSolution regularized_payoff(const HypothesisClass& hclass, const PayoffProblem& problem,
                                  const InnerSolveConfig& config, std::uint64_t seed,
                                  const PayoffReference& reference = {});

}  // namespace mamex
