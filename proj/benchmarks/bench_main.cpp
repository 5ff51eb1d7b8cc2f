#include <benchmark/benchmark.h>

#include <random>

#include "mamex/discrepancy.hpp"
#include "mamex/equilibrium.hpp"
#include "mamex/evaluate.hpp"
#include "mamex/generators.hpp"
#include "mamex/mamex.hpp"
#include "mamex/optimize.hpp"

namespace {

using namespace mamex;

MarkovJointPolicy uniform_policy(const MarkovGame& g) {
  MarkovJointPolicy pi(g.horizon(), g.num_states(), g.num_joint_actions());
  const double p = 1.0 / static_cast<double>(g.num_joint_actions());
  for (std::size_t h = 0; h < g.horizon(); ++h) {
    for (std::size_t s = 0; s < g.num_states(); ++s) {
      for (auto& x : pi.at(h, s)) x = p;
    }
  }
  return pi;
}

TransitionLedger filled_ledger(const MarkovGame& g, const MarkovJointPolicy& pi, std::size_t n) {
  TransitionLedger ledger(g.horizon(), g.num_states(), g.num_joint_actions());
  for (std::size_t e = 0; e < n; ++e) ledger.ingest(sample_episode(g, pi, derive_seed(7, e), e));
  return ledger;
}

PurePolicySpace sampled_space(const MarkovGame& g, std::size_t size) {
  std::vector<std::vector<PurePolicy>> per;
  for (std::size_t i = 0; i < g.num_agents(); ++i) {
    EnumerateOptions o;
    o.subsample = size;
    o.seed = derive_seed(1, i);
    per.push_back(enumerate_deterministic(g, i, o));
  }
  return PurePolicySpace(std::move(per));
}

void BM_EvaluatePure(benchmark::State& state) {
  const auto g = make_random_tabular(state.range(0), 3, {2, 2}, 1.0, 1);
  const auto pi = uniform_policy(g);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_pure(g, pi, 0).value_at_rho);
}
BENCHMARK(BM_EvaluatePure)->Arg(4)->Arg(16)->Arg(64);

void BM_LModelFree(benchmark::State& state) {
  const auto g = make_random_tabular(4, 3, {2, 2}, 1.0, 1);
  const auto pi = uniform_policy(g);
  const auto ledger = filled_ledger(g, pi, state.range(0));
  const auto q = true_q_hypothesis(g, pi, 0);
  for (auto _ : state) benchmark::DoNotOptimize(L_model_free(ledger, q, pi, 0, g.rewards()));
}
BENCHMARK(BM_LModelFree)->Arg(64)->Arg(1024);

void BM_ExactModelFree(benchmark::State& state) {
  const auto g = make_random_tabular(4, 3, {2, 2}, 1.0, 1);
  const auto pi = uniform_policy(g);
  const auto ledger = filled_ledger(g, pi, state.range(0));
  const PayoffProblem p{ledger, g.rewards(), g.rho(), g.reward_cap(), pi, 0, 0.25};
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_tabular_modelfree(p, InnerSolveConfig{}).objective);
  }
}
BENCHMARK(BM_ExactModelFree)->Arg(64)->Arg(1024);

void BM_BlockAscentModelBased(benchmark::State& state) {
  const auto g = make_random_tabular(4, 3, {2, 2}, 1.0, 1);
  const auto pi = uniform_policy(g);
  const auto ledger = filled_ledger(g, pi, state.range(0));
  const PayoffProblem p{ledger, g.rewards(), g.rho(), g.reward_cap(), pi, 0, 0.25};
  const auto mle = ledger.empirical_model();
  for (auto _ : state) {
    benchmark::DoNotOptimize(block_ascent_modelbased(p, InnerSolveConfig{}, mle).objective);
  }
}
BENCHMARK(BM_BlockAscentModelBased)->Arg(64)->Arg(1024);

void BM_SolveCce(benchmark::State& state) {
  const std::size_t m = state.range(0);
  const MixedRadix layout({m, m});
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pay(2, std::vector<double>(layout.size()));
  for (auto& t : pay) {
    for (auto& x : t) x = u(eng);
  }
  const NormalFormGame game(layout, pay);
  for (auto _ : state) benchmark::DoNotOptimize(solve_cce(game, 10000, 1).max_gap());
}
BENCHMARK(BM_SolveCce)->Arg(3)->Arg(8);

void BM_MamexEpisodes(benchmark::State& state) {
  const auto g = make_random_tabular(4, 3, {2, 2}, 1.0, 1);
  const auto space = sampled_space(g, 8);
  MamexConfig c;
  c.K = 16;
  c.seed = 1;
  c.mode = state.range(0) ? MamexMode::model_based : MamexMode::model_free;
  for (auto _ : state) benchmark::DoNotOptimize(run(g, space, c).records.back().cum_regret);
}
BENCHMARK(BM_MamexEpisodes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
