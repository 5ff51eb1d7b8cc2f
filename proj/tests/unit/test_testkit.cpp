#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "testkit.hpp"

namespace mamex {
namespace {

// Deterministic two-step chain: state 0 -> state 1, rewards 0.2 then 0.5.
MarkovGame chain() {
  TransitionKernel P(2, 2, 1, {0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0});
  RewardTable r(1, 2, 2, 1, {0.2, 0.0, 0.0, 0.5});
  return MarkovGame({1}, 2, P, r, {1.0, 0.0}, 1.0);
}

MarkovJointPolicy trivial(std::size_t H, std::size_t S) {
  MarkovJointPolicy pi(H, S, 1);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t s = 0; s < S; ++s) pi.at(h, s)[0] = 1.0;
  }
  return pi;
}

TEST(Testkit, GridArgminFindsQuadraticMinimum) {
  const double x = testkit::grid_argmin([](double c) { return (c - 0.3217) * (c - 0.3217); },
                                        0.0, 2.0, 1e-2);
  EXPECT_NEAR(x, 0.3217, 1e-9);
  EXPECT_NEAR(testkit::grid_argmin([](double c) { return c; }, 0.5, 1.0, 0.1), 0.5, 1e-12);
}

TEST(Testkit, PathEnumerationOnHandChain) {
  const auto g = chain();
  const auto pi = trivial(2, 2);
  EXPECT_NEAR(testkit::path_enumeration_value(g, pi, 0), 0.7, 1e-15);
  const auto q = testkit::path_enumeration_q(g, pi, 0);
  EXPECT_NEAR(q[0], 0.7, 1e-15);  // h = 0, s = 0
  EXPECT_NEAR(q[3], 0.5, 1e-15);  // h = 1, s = 1
  const auto mc = testkit::mc_value(g, pi, 0, 100, 1);
  EXPECT_NEAR(mc.mean, 0.7, 1e-12);
  EXPECT_NEAR(mc.stderr_, 0.0, 1e-12);
}

TEST(Testkit, LiteralLossOnHandChain) {
  const auto g = chain();
  const auto pi = trivial(2, 2);
  TransitionLedger ledger(2, 2, 1);
  ledger.ingest(sample_episode(g, pi, 1));
  // One tuple per step, so the inner infimum is 0 and each step keeps its
  // squared residual: (0.9 - 0.2 - 0.6)^2 + (0.6 - 0.5)^2.
  const QHypothesis f(2, 2, 1, 1.0, {0.9, 0.1, 0.3, 0.6});
  EXPECT_NEAR(testkit::literal_L_model_free(ledger, g.rewards(), f, pi, 0, 1.0), 0.02, 1e-12);
  EXPECT_NEAR(testkit::literal_L_model_based(ledger, g.transition()), 0.0, 1e-15);
}

TEST(Testkit, SwapDominatesDeviation) {
  const NormalFormGame g(MixedRadix({2, 2}), {{0.9, 0.1, 0.2, 0.6}, {0.3, 0.8, 0.5, 0.4}});
  const auto mixed = JointMixedPolicy::from_mass(g.layout(), {0.1, 0.4, 0.3, 0.2});
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_GE(testkit::brute_force_swap(g, mixed, i),
              testkit::brute_force_deviation(g, mixed, i) - 1e-15);
    EXPECT_GE(testkit::brute_force_deviation(g, mixed, i), 0.0);
  }
  // Agent 0 given row 0 faces (0.2, 0.8) over columns: playing row 1 earns
  // 0.2 * 0.2 + 0.8 * 0.6 = 0.52 against 0.2 * 0.9 + 0.8 * 0.1 = 0.26.
  // Given row 1 it faces (0.6, 0.4): row 0 earns 0.58 against 0.36.
  const double swap = 0.5 * (0.52 - 0.26) + 0.5 * (0.58 - 0.36);
  EXPECT_NEAR(testkit::brute_force_swap(g, mixed, 0), swap, 1e-12);
}

TEST(Testkit, GridSearchWithoutDataReturnsR) {
  const auto g = make_random_tabular(1, 2, {2}, 1.0, 1);
  const TransitionLedger empty(2, 1, 2);
  const auto pi = test::random_joint_policy(g, 1);
  const PayoffProblem p{empty, g.rewards(), g.rho(), g.reward_cap(), pi, 0, 0.5};
  EXPECT_NEAR(testkit::grid_search_modelfree(p, 0.25), 1.0, 1e-12);
}

TEST(Testkit, BruteForcePayoffsShape) {
  const auto g = make_random_tabular(2, 2, {2, 3}, 1.0, 2);
  const auto space = test::sampled_space(g, 3, 4);
  const auto nf = testkit::brute_force_payoffs(g, space);
  EXPECT_EQ(nf.joint_size(), 9u);
  EXPECT_EQ(nf.num_agents(), 2u);
}

TEST(Testkit, ReportComputesErrors) {
  const auto r = testkit::make_report("o", "i", 2.5, 2.0);
  EXPECT_DOUBLE_EQ(r.abs_error, 0.5);
  EXPECT_DOUBLE_EQ(r.rel_error, 0.25);
}

}  // namespace
}  // namespace mamex
