#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "mamex/evaluate.hpp"
#include "mamex/mamex.hpp"

namespace mamex {
namespace {

struct Setup {
  MarkovGame game;
  PurePolicySpace space;
};

Setup small_setup(std::uint64_t seed) {
  auto g = make_random_tabular(2, 2, {2, 2}, 1.0, seed);
  auto space = test::sampled_space(g, 3, seed);
  return {std::move(g), std::move(space)};
}

MamexConfig small_config(MamexMode mode) {
  MamexConfig c;
  c.K = 16;
  c.mode = mode;
  c.seed = 3;
  c.eq_iters = 2000;
  return c;
}

TEST(MamexConfig, ValidationAndDefaults) {
  MamexConfig c;
  c.K = 64;
  EXPECT_DOUBLE_EQ(c.resolved_eta(), 0.5);
  EXPECT_EQ(c.resolved_eq_iters(4), 10000u);
  EXPECT_NO_THROW(c.validate());
  c.K = 8;
  EXPECT_THROW(c.validate(), InputError);
  c.ablation = true;
  EXPECT_NO_THROW(c.validate());
  c.K = 64;
  c.ablation = false;
  c.eta = 0.0;
  EXPECT_THROW(c.validate(), InputError);
  c.eta = 1.5;
  EXPECT_THROW(c.validate(), InputError);
  c.ablation = true;
  c.eta = 0.0;
  EXPECT_NO_THROW(c.validate());
  c.eta = -1.0;
  EXPECT_THROW(c.validate(), InputError);
  EXPECT_THROW(parse_mamex_mode("hybrid"), InputError);
}

TEST(MamexRun, OneStateOneStepRecordsAreConsistent) {
  const auto g = make_random_tabular(1, 1, {2, 2}, 1.0, 4);
  const PurePolicySpace space({enumerate_deterministic(g, 0), enumerate_deterministic(g, 1)});
  for (auto mode : {MamexMode::model_based, MamexMode::model_free}) {
    std::size_t calls = 0;
    const auto res = run(g, space, small_config(mode), [&](const EpisodeRecord&) { ++calls; });
    ASSERT_EQ(res.records.size(), 16u);
    EXPECT_EQ(calls, 16u);
    const auto payoffs = true_payoffs(g, space);
    double prev = 0.0;
    for (std::size_t k = 0; k < 16; ++k) {
      const auto& r = res.records[k];
      EXPECT_EQ(r.k, k + 1);
      EXPECT_GE(r.cum_regret, prev - 1e-15);
      prev = r.cum_regret;
      for (double x : r.gaps) EXPECT_GE(x, -1e-12);
      const auto check = equilibrium_gaps(payoffs, r.policy, EquilibriumKind::cce);
      EXPECT_NEAR(r.aggregate_gap, check.aggregate_cce, 1e-12);
    }
    EXPECT_LE(res.records.back().cum_regret, 16.0 * 2.0 * payoffs.payoff_range());
    EXPECT_FALSE(res.aborted);
  }
}

TEST(MamexRun, OutputIsTheUniformMixtureOfDeployedPolicies) {
  const auto s = small_setup(5);
  const auto res = run(s.game, s.space, small_config(MamexMode::model_based));
  std::vector<JointMixedPolicy> parts;
  for (const auto& r : res.records) parts.push_back(r.policy);
  const auto mix = JointMixedPolicy::uniform_mixture(parts);
  for (std::size_t x = 0; x < mix.layout().size(); ++x) {
    EXPECT_NEAR(res.output.mass(x), mix.mass(x), 1e-12);
  }
  const auto g = equilibrium_gaps(s.game, s.space, res.output);
  EXPECT_NEAR(res.output_gaps.aggregate_cce, g.aggregate_cce, 1e-12);
}

TEST(MamexRun, DeterministicGivenSeed) {
  const auto s = small_setup(6);
  for (auto mode : {MamexMode::model_based, MamexMode::model_free}) {
    const auto a = run(s.game, s.space, small_config(mode));
    const auto b = run(s.game, s.space, small_config(mode));
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      EXPECT_EQ(a.records[k].sampled, b.records[k].sampled);
      EXPECT_EQ(a.records[k].cum_regret, b.records[k].cum_regret);
      EXPECT_EQ(a.records[k].train_err, b.records[k].train_err);
      EXPECT_EQ(a.records[k].pred_err, b.records[k].pred_err);
      EXPECT_EQ(a.records[k].eq_cert_gap, b.records[k].eq_cert_gap);
    }
  }
}

TEST(MamexRun, ThreadCountDoesNotChangeResults) {
  const auto s = small_setup(7);
  auto c1 = small_config(MamexMode::model_based);
  c1.threads = 1;
  auto c4 = c1;
  c4.threads = 4;
  const auto a = run(s.game, s.space, c1);
  const auto b = run(s.game, s.space, c4);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].cum_regret, b.records[k].cum_regret);
  }
}

TEST(MamexRun, CeTargetRecordsCeGaps) {
  const auto s = small_setup(8);
  auto c = small_config(MamexMode::model_based);
  c.target = EquilibriumKind::ce;
  const auto res = run(s.game, s.space, c);
  EXPECT_EQ(res.output_kind, EquilibriumKind::ce);
  const auto payoffs = true_payoffs(s.game, s.space);
  const auto& r = res.records.back();
  EXPECT_NEAR(r.aggregate_gap, equilibrium_gaps(payoffs, r.policy).aggregate_ce, 1e-12);
}

TEST(MamexRun, NeTargetReportsCceGapsOfTheMixture) {
  const auto g = make_random_tabular(1, 1, {2, 2}, 1.0, 9);
  const PurePolicySpace space({enumerate_deterministic(g, 0), enumerate_deterministic(g, 1)});
  auto c = small_config(MamexMode::model_based);
  c.target = EquilibriumKind::ne;
  const auto res = run(g, space, c);
  EXPECT_EQ(res.output_kind, EquilibriumKind::cce);
  for (const auto& r : res.records) EXPECT_TRUE(r.policy.is_product());
}

TEST(Madc, GridIsLogSpaced) {
  const auto mu = madc_mu_grid();
  ASSERT_EQ(mu.size(), 61u);
  EXPECT_NEAR(mu.front(), 1e-3, 1e-15);
  EXPECT_NEAR(mu.back(), 1e3, 1e-9);
  for (std::size_t j = 1; j < mu.size(); ++j) {
    EXPECT_NEAR(std::log10(mu[j]) - std::log10(mu[j - 1]), 0.1, 1e-12);
  }
}

TEST(Madc, ZeroPredictionErrorGivesZero) {
  std::vector<EpisodeRecord> recs(5);
  for (auto& r : recs) {
    r.pred_err = {0.0, 0.0};
    r.train_err = {0.3, 0.1};
  }
  const auto c = madc_diagnostic(recs, 3, madc_mu_grid());
  for (double d : c.d_max) EXPECT_EQ(d, 0.0);
}

TEST(Madc, SingleEpisodeMatchesTheFormula) {
  std::vector<EpisodeRecord> recs(1);
  recs[0].pred_err = {0.4};
  recs[0].train_err = {0.2};
  const std::vector<double> mu{0.1, 1.0, 10.0};
  const auto c = madc_diagnostic(recs, 2, mu);
  double best = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double expect = std::max(0.0, 0.4 - 0.2 / mu[j]) / (mu[j] + 12.0);
    EXPECT_NEAR(c.d_hat[0][j], expect, 1e-15);
    best = std::max(best, expect);
  }
  EXPECT_NEAR(c.d_max[0], best, 1e-15);
  EXPECT_NEAR(c.prediction_error[0], 0.4, 1e-15);
}

TEST(Madc, FromARealRunIsFiniteAndNonnegative) {
  const auto s = small_setup(10);
  const auto res = run(s.game, s.space, small_config(MamexMode::model_based));
  const auto c = madc_diagnostic(res.records, s.game);
  for (double d : c.d_max) {
    EXPECT_TRUE(std::isfinite(d));
    EXPECT_GE(d, 0.0);
  }
}

}  // namespace
}  // namespace mamex
