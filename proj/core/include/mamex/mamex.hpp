#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mamex/equilibrium.hpp"
#include "mamex/evaluate.hpp"
#include "mamex/game.hpp"
#include "mamex/optimize.hpp"
#include "mamex/policy.hpp"

namespace mamex {

enum class MamexMode { model_free, model_based };

MamexMode parse_mamex_mode(const std::string& text);
std::string to_string(MamexMode mode);

struct MamexConfig {
  std::size_t K = 64;
  std::optional<double> eta;  // default 4 / sqrt(K)
  EquilibriumKind target = EquilibriumKind::cce;
  MamexMode mode = MamexMode::model_based;
  /// Overrides the tabular class implied by `mode` (linear classes).
  std::optional<HypothesisClass> hypothesis;
  InnerSolveConfig inner;
  std::optional<std::size_t> eq_iters;  // default max(10^4, 100 * joint size)
  std::uint64_t seed = 0;
  double episode_time_budget_s = 0.0;  // 0 disables the budget
  /// Lifts K >= 16 and eta in (0, 1], e.g. for eta = 0 baselines.
  bool ablation = false;
  /// Adds the game's own hypothesis as a restart candidate (tests only).
  bool true_reference = false;
  bool keep_payoffs = false;
  unsigned threads = 0;

  double resolved_eta() const;
  std::size_t resolved_eq_iters(std::size_t joint_size) const;
  HypothesisClass resolved_class() const;
  void validate() const;
};

struct EpisodeRecord {
  std::size_t k = 0;  // 1-based episode index
  std::size_t sampled = 0;  // joint pure index zeta^k
  JointMixedPolicy policy;  // deployed pi^k
  std::vector<double> gaps;  // per-agent exact gap of the target kind
  double aggregate_gap = 0.0;
  double cum_regret = 0.0;
  std::vector<double> train_err;  // per agent, sum_{s<k} ell^s(fhat^k, zeta^k)
  std::vector<double> pred_err;   // per agent, V_{fhat^k}^{zeta^k} - V^{zeta^k}
  double eq_cert_gap = 0.0;       // certifier gap of pi^k on the estimated payoffs
  double ms = 0.0;
  std::vector<std::vector<double>> payoffs;  // per-agent Vbar, when kept

  double train_err_total() const;
  double pred_err_total() const;
};

struct MamexResult {
  std::vector<EpisodeRecord> records;
  JointMixedPolicy output;  // uniform mixture of the deployed policies
  GapReport output_gaps;    // exact gaps of `output`
  EquilibriumKind output_kind = EquilibriumKind::cce;
  double eta = 0.0;
  std::size_t eq_iters = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// Called after every episode (progress reporting, streaming writers).
using EpisodeCallback = std::function<void(const EpisodeRecord&)>;

/// The MAMEX loop. Every episode solves the regularized payoff of every
/// (agent, joint pure policy), runs the equilibrium oracle on those payoffs,
/// samples a joint pure policy, collects one trajectory and records exact
/// gaps of the deployed policy. NE gaps of a correlated output mixture are
/// reported as CCE gaps.
MamexResult run(const MarkovGame& game, const PurePolicySpace& space, const MamexConfig& config,
                const EpisodeCallback& on_episode = {});

/// Log-spaced grid of 61 values over [1e-3, 1e3].
std::vector<double> madc_mu_grid();

struct MadcCurve {
  std::vector<double> mu;
  std::vector<std::vector<double>> d_hat;  // [agent][mu]
  std::vector<double> d_max;               // [agent] max over the grid
  std::vector<double> prediction_error;    // [agent] summed over episodes
  std::vector<double> training_error;      // [agent]
};

/// d(mu) = max(0, pred - train / mu) / (mu + 6H) per agent. The decoupling
/// inequality must hold for every mu, so the estimate is the maximum over
/// the grid.
MadcCurve madc_diagnostic(std::span<const EpisodeRecord> records, std::size_t horizon,
                          std::span<const double> mu_grid);
MadcCurve madc_diagnostic(std::span<const EpisodeRecord> records, const MarkovGame& game);

}  // namespace mamex
