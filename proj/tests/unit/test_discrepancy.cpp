#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mamex/discrepancy.hpp"
#include "mamex/evaluate.hpp"
#include "testkit.hpp"

namespace mamex {
namespace {

TEST(Ledger, CountsMatchRawTuples) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 1);
  const auto pi = test::random_joint_policy(g, 2);
  const auto ledger = test::collect(g, pi, 50, 3);
  EXPECT_EQ(ledger.episodes(), 50u);
  for (std::size_t h = 0; h < 3; ++h) {
    EXPECT_EQ(ledger.transitions(h).size(), 50u);
    double total = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t a = 0; a < 4; ++a) {
        double c = 0.0;
        for (double x : ledger.next_counts(h, s, a)) c += x;
        EXPECT_EQ(c, ledger.visits(h, s, a));
        total += c;
      }
    }
    EXPECT_EQ(total, 50.0);
  }
}

TEST(LModelFree, EmptyLedgerIsZero) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 1);
  const TransitionLedger empty(3, 3, 4);
  const auto pi = test::random_joint_policy(g, 2);
  const QHypothesis f(3, 3, 4, 1.0, test::random_table(36, 1.0, 3));
  EXPECT_EQ(L_model_free(empty, f, pi, 0, g.rewards()), 0.0);
  EXPECT_EQ(testkit::literal_L_model_free(empty, g.rewards(), f, pi, 0, 1.0), 0.0);
}

TEST(LModelFree, ExactFitOfASingleTransitionIsZero) {
  const auto g = make_random_tabular(2, 1, {2, 2}, 1.0, 4);
  const auto pi = test::random_joint_policy(g, 5);
  const auto ledger = test::collect(g, pi, 1, 6);
  const auto& x = ledger.transitions(0)[0];
  QHypothesis f(1, 2, 4, 1.0, 0.3);
  f.set(0, x.state, x.action, g.rewards()(0, 0, x.state, x.action));
  EXPECT_NEAR(L_model_free(ledger, f, pi, 0, g.rewards()), 0.0, 1e-15);
}

TEST(LModelFree, HandComputedOneSampleInstance) {
  // One state, one action, H = 2: f_1 = 0.9, f_2 = 0.2, r_1 = 0.3, r_2 = 0.1,
  // two observations at h = 1. Targets: 0.3 + 0.2 = 0.5 (both), so bucket
  // loss 2 * (0.9 - 0.5)^2 = 0.32; at h = 2 targets 0.1: 2 * (0.2 - 0.1)^2 = 0.02.
  TransitionKernel P(2, 1, 1, {1.0, 1.0});
  RewardTable r(1, 2, 1, 1, {0.3, 0.1});
  const MarkovGame g({1}, 1, P, r, {1.0}, 1.0);
  MarkovJointPolicy pi(2, 1, 1);
  pi.at(0, 0)[0] = pi.at(1, 0)[0] = 1.0;
  TransitionLedger ledger(2, 1, 1);
  ledger.ingest(sample_episode(g, pi, 1));
  ledger.ingest(sample_episode(g, pi, 2));
  const QHypothesis f(2, 1, 1, 1.0, {0.9, 0.2});
  EXPECT_NEAR(L_model_free(ledger, f, pi, 0, r), 0.34, 1e-15);
  EXPECT_NEAR(testkit::literal_L_model_free(ledger, r, f, pi, 0, 1.0), 0.34, 1e-12);
}

TEST(LModelFree, ClosedFormMatchesLiteralOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, seed);
    const auto behave = test::random_joint_policy(g, seed + 1);
    const auto pi = test::random_joint_policy(g, seed + 2);
    const auto ledger = test::collect(g, behave, 7, seed + 3);  // 21 transitions
    const QHypothesis f(3, 3, 4, 1.0, test::random_table(36, 1.0, seed + 4));
    const double closed = L_model_free(ledger, f, pi, seed % 2, g.rewards());
    const double literal =
        testkit::literal_L_model_free(ledger, g.rewards(), f, pi, seed % 2, 1.0);
    EXPECT_NEAR(closed, literal, 1e-9) << "seed " << seed;
    EXPECT_GE(closed, 0.0);
  }
}

TEST(LModelFree, ZeroIffMatchesEveryBucketMean) {
  const auto g = make_random_tabular(3, 2, {2, 2}, 1.0, 9);
  const auto pi = test::random_joint_policy(g, 10);
  const auto ledger = test::collect(g, pi, 30, 11);
  // Backward fit to bucket means makes every bucket exact.
  QHypothesis f(2, 3, 4, 1.0, 0.0);
  for (std::size_t h = 2; h-- > 0;) {
    const auto ybar = bucket_mean_targets(ledger, f, pi, 0, g.rewards());
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t a = 0; a < 4; ++a) f.set(h, s, a, ybar[(h * 3 + s) * 4 + a]);
    }
  }
  EXPECT_NEAR(L_model_free(ledger, f, pi, 0, g.rewards()), 0.0, 1e-24);
}

TEST(LModelBased, UniformModelGivesNLogS) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 1);
  const auto ledger = test::collect(g, test::random_joint_policy(g, 2), 10, 3);
  std::vector<double> probs(3 * 3 * 4 * 3, 1.0 / 3.0);
  EXPECT_NEAR(L_model_based(ledger, TransitionKernel(3, 3, 4, probs)), 30.0 * std::log(3.0),
              1e-12);
}

TEST(LModelBased, EmpiricalModelMinimizesNll) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 4);
  const auto ledger = test::collect(g, test::random_joint_policy(g, 5), 40, 6);
  const auto mle = ledger.empirical_model();
  const double best = L_model_based(ledger, mle);
  EXPECT_NEAR(best, mle_negative_log_likelihood(ledger), 1e-10);
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = mle.data();
    for (std::size_t r = 0; r < mle.num_rows(); ++r) {
      double t = 0.0;
      for (std::size_t s = 0; s < 3; ++s) t += (p[r * 3 + s] = std::max(1e-6, p[r * 3 + s] + u(eng)));
      for (std::size_t s = 0; s < 3; ++s) p[r * 3 + s] /= t;
    }
    EXPECT_GE(L_model_based(ledger, TransitionKernel(3, 3, 4, p)), best - 1e-12);
  }
}

TEST(LModelBased, MatchesLiteralPerTransitionSum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, seed);
    const auto ledger = test::collect(g, test::random_joint_policy(g, seed), 15, seed + 1);
    const auto model = test::random_kernel(3, 3, 4, seed + 2);
    EXPECT_NEAR(L_model_based(ledger, model), testkit::literal_L_model_based(ledger, model),
                1e-9);
    EXPECT_NEAR(L_model_based_excess(ledger, model),
                L_model_based(ledger, model) - mle_negative_log_likelihood(ledger), 1e-9);
  }
}

TEST(Hellinger, BasicIdentities) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_EQ(hellinger_sq(p, p), 0.0);
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
  EXPECT_NEAR(hellinger_sq(a, b), 1.0, 1e-15);
}

TEST(TrueEll, ModelFreeZeroAtTrueQAndConstantResidual) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 13);
  const auto pi = test::random_joint_policy(g, 14);
  const auto q = true_q_hypothesis(g, pi, 0);
  EXPECT_NEAR(true_ell_model_free(g, q, pi, 0, pi), 0.0, 1e-12);
  // f_h = Q_h + c (H - h) leaves residual exactly c at every step.
  const double c = 0.05;
  std::vector<double> shifted = q.data();
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t x = 0; x < 12; ++x) shifted[h * 12 + x] += c * static_cast<double>(3 - h);
  }
  const QHypothesis f(3, 3, 4, 10.0, shifted);
  EXPECT_NEAR(true_ell_model_free(g, f, pi, 0, pi), 3.0 * c * c, 1e-12);
}

TEST(TrueEll, ModelFreeMatchesMonteCarlo) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 15);
  const auto pi = test::random_joint_policy(g, 16);
  const auto executed = test::random_joint_policy(g, 17);
  const QHypothesis f(3, 3, 4, 1.0, test::random_table(36, 1.0, 18));
  // Residual table from the definition, then averaged along sampled paths.
  std::vector<double> resid(36);
  for (std::size_t h = 0; h < 3; ++h) {
    const auto next = h + 1 < 3 ? f.step(h + 1) : std::span<const double>{};
    const auto t = bellman_apply(next, pi, 0, h, g.transition(), g.rewards());
    for (std::size_t x = 0; x < 12; ++x) resid[h * 12 + x] = f.data()[h * 12 + x] - t[x];
  }
  double sum = 0.0, sum_sq = 0.0;
  const std::size_t N = 100000;
  for (std::size_t e = 0; e < N; ++e) {
    const auto tr = sample_episode(g, executed, derive_seed(99, e));
    double v = 0.0;
    for (std::size_t h = 0; h < 3; ++h) {
      const double d = resid[(h * 3 + tr.steps[h].state) * 4 + tr.steps[h].joint_action];
      v += d * d;
    }
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / N;
  const double se = std::sqrt((sum_sq / N - mean * mean) / N);
  EXPECT_NEAR(true_ell_model_free(g, f, pi, 0, executed), mean, 3.0 * se);
}

TEST(TrueEll, HellingerZeroAtTruthAndMatchesDirectSum) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 19);
  const auto executed = test::random_joint_policy(g, 20);
  EXPECT_NEAR(true_ell_hellinger(g, g.transition(), executed), 0.0, 1e-15);
  const auto model = test::random_kernel(3, 3, 4, 21);
  const auto d = occupancy(g.transition(), g.rho(), executed);
  double direct = 0.0;
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t a = 0; a < 4; ++a) {
        double hs = 0.0;
        for (std::size_t t = 0; t < 3; ++t) {
          const double x = std::sqrt(model(h, s, a, t)) - std::sqrt(g.transition()(h, s, a, t));
          hs += 0.5 * x * x;
        }
        direct += d[(h * 3 + s) * 4 + a] * hs;
      }
    }
  }
  EXPECT_NEAR(true_ell_hellinger(g, model, executed), direct, 1e-12);
}

TEST(Concentration, TrueQLossGrowsSublinearly) {
  // With f the true Q, L^k / k falls as data accumulates.
  const auto g = make_random_tabular(4, 3, {2, 2}, 1.0, 23);
  const auto pi = test::random_joint_policy(g, 24);
  const auto behave = test::random_joint_policy(g, 25);
  const auto q = true_q_hypothesis(g, pi, 0);
  const auto ledger = test::collect(g, behave, 512, 26);
  EXPECT_LE(L_model_free(ledger, q, pi, 0, g.rewards()) / 512.0, 0.05);
}

}  // namespace
}  // namespace mamex
