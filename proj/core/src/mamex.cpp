#include "mamex/mamex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mamex/discrepancy.hpp"

namespace mamex {

MamexMode parse_mamex_mode(const std::string& text) {
  if (text == "model_free") return MamexMode::model_free;
  if (text == "model_based") return MamexMode::model_based;
  throw InputError("unknown mode '" + text + "' (expected model_free|model_based)");
}

std::string to_string(MamexMode mode) {
  return mode == MamexMode::model_free ? "model_free" : "model_based";
}

double MamexConfig::resolved_eta() const {
  return eta ? *eta : 4.0 / std::sqrt(static_cast<double>(K));
}

std::size_t MamexConfig::resolved_eq_iters(std::size_t joint_size) const {
  return eq_iters ? *eq_iters : default_eq_iters(joint_size);
}

HypothesisClass MamexConfig::resolved_class() const {
  if (hypothesis) {
    if (hypothesis->model_based() != (mode == MamexMode::model_based)) {
      throw InputError("hypothesis class does not match mode " + to_string(mode));
    }
    return *hypothesis;
  }
  HypothesisClass c;
  c.kind = mode == MamexMode::model_free ? HypothesisKind::tabular_q
                                         : HypothesisKind::tabular_model;
  return c;
}

void MamexConfig::validate() const {
  if (K < 1) throw InputError("mamex.K must be at least 1");
  const double e = resolved_eta();
  if (!std::isfinite(e) || e < 0.0) throw InputError("mamex.eta must be finite and >= 0");
  if (!ablation) {
    if (K < 16) throw InputError("mamex.K must be at least 16 (set ablation to override)");
    if (!(e > 0.0 && e <= 1.0)) {
      throw InputError("mamex.eta must lie in (0, 1] (set ablation to override)");
    }
  }
  if (eq_iters && *eq_iters < 1) throw InputError("eq.iters must be at least 1");
  if (episode_time_budget_s < 0.0) throw InputError("time budget must be nonnegative");
  inner.validate();
  (void)resolved_class();
}

double EpisodeRecord::train_err_total() const {
  double t = 0.0;
  for (double x : train_err) t += x;
  return t;
}

double EpisodeRecord::pred_err_total() const {
  double t = 0.0;
  for (double x : pred_err) t += x;
  return t;
}

MamexResult run(const MarkovGame& game, const PurePolicySpace& space, const MamexConfig& config,
                const EpisodeCallback& on_episode) {
  config.validate();
  space.check_compatible(game);
  using Clock = std::chrono::steady_clock;

  const std::size_t n = game.num_agents();
  const std::size_t J = space.joint_size();
  const std::size_t H = game.horizon();
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_joint_actions();
  const auto hclass = config.resolved_class();
  const bool model_based = hclass.model_based();

  MamexResult result;
  result.eta = config.resolved_eta();
  result.eq_iters = config.resolved_eq_iters(J);
  result.output_kind =
      config.target == EquilibriumKind::ne ? EquilibriumKind::cce : config.target;

  const auto policies = space.materialize_all(game.action_layout());
  const auto truth = true_payoffs(game, space);

  // Realizable hypotheses, built only when requested as restart candidates.
  std::vector<QHypothesis> true_q;
  if (config.true_reference && !model_based) {
    true_q.reserve(n * J);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < J; ++j) true_q.push_back(true_q_hypothesis(game, policies[j], i));
    }
  }

  TransitionLedger ledger(H, S, A);
  std::vector<double> past_occupancy(H * S * A, 0.0);
  std::vector<JointMixedPolicy> deployed;
  std::vector<PayoffSolution> solutions(n * J);
  double cum_regret = 0.0;

  for (std::size_t k = 1; k <= config.K; ++k) {
    const auto start = Clock::now();

    parallel_for(
        n * J,
        [&](std::size_t idx) {
          const std::size_t i = idx / J;
          const std::size_t j = idx % J;
          const PayoffProblem problem{ledger, game.rewards(), game.rho(), game.reward_cap(),
                                      policies[j], i, result.eta};
          PayoffReference ref;
          if (config.true_reference) {
            if (model_based) {
              ref.model = &game.transition();
            } else {
              ref.q = &true_q[idx];
            }
          }
          solutions[idx] = regularized_payoff(hclass, problem, config.inner,
                                              derive_seed(config.seed, k, idx), ref);
        },
        config.threads);

    std::vector<std::vector<double>> vbar(n, std::vector<double>(J));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < J; ++j) vbar[i][j] = solutions[i * J + j].objective;
    }
    const NormalFormGame estimated(space.layout(), vbar);
    const auto eq = solve_equilibrium(estimated, config.target, result.eq_iters,
                                      derive_seed(config.seed, k, 0xe9));
    const std::size_t zeta = sample_pure(eq.policy, derive_seed(config.seed, k, 0x5a));
    const auto trajectory =
        sample_episode(game, policies[zeta], derive_seed(config.seed, k, 0x7e), k);

    EpisodeRecord rec;
    rec.k = k;
    rec.sampled = zeta;
    rec.policy = eq.policy;
    rec.eq_cert_gap = eq.max_gap();
    rec.train_err.resize(n);
    rec.pred_err.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& sol = solutions[i * J + zeta];
      rec.pred_err[i] = sol.value - truth.payoff(i, zeta);
      if (model_based) {
        rec.train_err[i] = true_ell_hellinger(game, *sol.model, past_occupancy);
      } else {
        rec.train_err[i] = true_ell_model_free(game, *sol.q, policies[zeta], i, past_occupancy);
      }
    }
    const auto occ = occupancy(game.transition(), game.rho(), policies[zeta]);
    for (std::size_t x = 0; x < occ.size(); ++x) past_occupancy[x] += occ[x];
    ledger.ingest(trajectory);

    const auto report = equilibrium_gaps(truth, eq.policy, config.target);
    for (std::size_t i = 0; i < n; ++i) rec.gaps.push_back(report.gap(i, config.target));
    rec.aggregate_gap = report.aggregate(config.target);
    cum_regret += rec.aggregate_gap;
    rec.cum_regret = cum_regret;
    if (config.keep_payoffs) rec.payoffs = std::move(vbar);
    rec.ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

    deployed.push_back(eq.policy);
    result.records.push_back(std::move(rec));
    if (on_episode) on_episode(result.records.back());

    if (config.episode_time_budget_s > 0.0 &&
        result.records.back().ms > 1000.0 * config.episode_time_budget_s) {
      result.aborted = true;
      result.abort_reason = "episode " + std::to_string(k) + " exceeded the time budget of " +
                            std::to_string(config.episode_time_budget_s) + " s";
      break;
    }
  }

  result.output = JointMixedPolicy::uniform_mixture(deployed);
  result.output_gaps = equilibrium_gaps(truth, result.output, result.output_kind);
  return result;
}

std::vector<double> madc_mu_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 60; ++k) grid.push_back(std::pow(10.0, -3.0 + 0.1 * k));
  return grid;
}

MadcCurve madc_diagnostic(std::span<const EpisodeRecord> records, std::size_t horizon,
                          std::span<const double> mu_grid) {
  MadcCurve curve;
  curve.mu.assign(mu_grid.begin(), mu_grid.end());
  const std::size_t n = records.empty() ? 0 : records.front().pred_err.size();
  curve.prediction_error.assign(n, 0.0);
  curve.training_error.assign(n, 0.0);
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < n; ++i) {
      curve.prediction_error[i] += rec.pred_err[i];
      curve.training_error[i] += rec.train_err[i];
    }
  }
  const double six_h = 6.0 * static_cast<double>(horizon);
  curve.d_hat.assign(n, std::vector<double>(mu_grid.size(), 0.0));
  curve.d_max.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < mu_grid.size(); ++m) {
      const double mu = mu_grid[m];
      if (!(mu > 0.0)) throw InputError("MADC grid values must be positive");
      const double excess = curve.prediction_error[i] - curve.training_error[i] / mu;
      curve.d_hat[i][m] = std::max(0.0, excess) / (mu + six_h);
      curve.d_max[i] = std::max(curve.d_max[i], curve.d_hat[i][m]);
    }
  }
  return curve;
}

MadcCurve madc_diagnostic(std::span<const EpisodeRecord> records, const MarkovGame& game) {
  const auto grid = madc_mu_grid();
  return madc_diagnostic(records, game.horizon(), grid);
}

}  // namespace mamex
