#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mamex/evaluate.hpp"
#include "mamex/hypothesis.hpp"
#include "testkit.hpp"

namespace mamex {
namespace {

TEST(QHypothesis, EntriesAreClipped) {
  const QHypothesis f(1, 1, 3, 1.5, {-0.5, 0.7, 9.0});
  EXPECT_EQ(f(0, 0, 0), 0.0);
  EXPECT_EQ(f(0, 0, 1), 0.7);
  EXPECT_EQ(f(0, 0, 2), 1.5);
  QHypothesis g(1, 1, 1, 1.0);
  g.set(0, 0, 0, 4.0);
  EXPECT_EQ(g(0, 0, 0), 1.0);
}

TEST(ValueUnderHypothesis, ZeroTableGivesZero) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 1);
  const auto pi = test::random_joint_policy(g, 2);
  EXPECT_EQ(value_under_hypothesis(QHypothesis(3, 3, 4, 1.0), pi, g.rho()), 0.0);
}

TEST(ValueUnderHypothesis, TrueQAndTrueModelReproduceTheValue) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, seed);
    const auto pi = test::random_joint_policy(g, seed + 1);
    for (std::size_t i = 0; i < 2; ++i) {
      const double v = testkit::path_enumeration_value(g, pi, i);
      EXPECT_NEAR(value_under_hypothesis(true_q_hypothesis(g, pi, i), pi, g.rho()), v, 1e-12);
      EXPECT_NEAR(value_under_hypothesis(ModelHypothesis(g.transition()), pi, i, g.rewards(),
                                         g.rho(), g.reward_cap()),
                  v, 1e-12);
    }
  }
}

TEST(ValueUnderHypothesis, AlwaysInsideZeroR) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 5);
  const auto pi = test::random_joint_policy(g, 6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = test::random_kernel(3, 3, 4, seed);
    const double v = value_under_hypothesis(ModelHypothesis(model), pi, 0, g.rewards(), g.rho(),
                                            g.reward_cap());
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, g.reward_cap());
    const QHypothesis f(3, 3, 4, g.reward_cap(), test::random_table(36, 3.0, seed));
    const double w = value_under_hypothesis(f, pi, g.rho());
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, g.reward_cap());
  }
}

TEST(TrueQ, MatchesForwardPathDefinition) {
  const auto g = make_random_tabular(3, 3, {2, 2}, 1.0, 12);
  const auto pi = test::random_joint_policy(g, 13);
  const auto f = true_q_hypothesis(g, pi, 1);
  const auto q = testkit::path_enumeration_q(g, pi, 1);
  for (std::size_t x = 0; x < q.size(); ++x) EXPECT_NEAR(f.data()[x], q[x], 1e-12);
}

TEST(ModelHypothesis, LogitsGiveSimplexRows) {
  std::vector<double> logits(2 * 3 * 2 * 3);
  std::mt19937_64 eng(1);
  std::normal_distribution<double> n(0.0, 30.0);
  for (auto& x : logits) x = n(eng);
  const auto m = ModelHypothesis::from_logits(2, 3, 2, logits);
  for (std::size_t r = 0; r < m.kernel().num_rows(); ++r) {
    double t = 0.0;
    for (double p : m.kernel().row(r)) {
      EXPECT_GE(p, 0.0);
      t += p;
    }
    EXPECT_NEAR(t, 1.0, 1e-12);
  }
}

TEST(ModelHypothesis, RejectsInvalidRows) {
  EXPECT_THROW(ModelHypothesis(TransitionKernel(1, 2, 1, {0.6, 0.6, 0.5, 0.5})), InputError);
}

TEST(LinearQ, ValueIsLinearInThetaWithoutClipping) {
  const auto g = make_random_tabular(2, 2, {2, 2}, 1.0, 3);
  const auto pi = test::random_joint_policy(g, 4);
  auto features = std::make_shared<FeatureMap>();
  features->horizon = 2;
  features->states = 2;
  features->actions = 4;
  features->dim = 3;
  // Nonnegative features with norm <= 1 and positive theta keep raw values
  // inside [0, R] so no clipping is active.
  features->phi = test::random_table(2 * 2 * 4 * 3, 0.5, 7);
  features->validate();
  const auto value_at = [&](const std::vector<std::vector<double>>& theta) {
    return value_under_hypothesis(LinearQHypothesis(features, theta, 2.0).to_tabular(), pi,
                                  g.rho());
  };
  std::mt19937_64 eng(9);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> a(2, std::vector<double>(3)), b = a, mid = a;
    const double t = u(eng) * 2.0;
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t j = 0; j < 3; ++j) {
        a[h][j] = u(eng);
        b[h][j] = u(eng);
        mid[h][j] = (1.0 - t) * a[h][j] + t * b[h][j];
      }
    }
    EXPECT_NEAR(value_at(mid), (1.0 - t) * value_at(a) + t * value_at(b), 1e-10);
  }
}

TEST(LinearQ, NormConstraintIsChecked) {
  auto features = std::make_shared<FeatureMap>(one_hot_features(1, 1, 2));
  EXPECT_THROW(LinearQHypothesis(features, {{5.0, 5.0}}, 1.0), InputError);
}

TEST(LinearQ, OneHotFeaturesAreComplete) {
  const auto g = make_random_tabular(2, 2, {2, 2}, 1.0, 3);
  auto features = std::make_shared<const FeatureMap>(one_hot_features(2, 2, 4));
  const std::vector<MarkovJointPolicy> pis{test::random_joint_policy(g, 1),
                                           test::random_joint_policy(g, 2)};
  const LinearQClass cls(features, g, pis);
  EXPECT_TRUE(cls.completeness().complete);
  EXPECT_LT(cls.completeness().max_residual, 1e-8);
}

TEST(LinearQ, RandomLowDimFeaturesAreFlaggedIncomplete) {
  const auto g = make_random_tabular(3, 2, {2, 2}, 1.0, 3);
  auto features = std::make_shared<FeatureMap>();
  features->horizon = 2;
  features->states = 3;
  features->actions = 4;
  features->dim = 2;
  features->phi = test::random_table(2 * 3 * 4 * 2, 0.7, 5);
  const std::vector<MarkovJointPolicy> pis{test::random_joint_policy(g, 1)};
  const auto report = linear_completeness_residual(*features, g, pis);
  EXPECT_FALSE(report.complete);
}

TEST(LinearMixture, ToModelMatchesGenerator) {
  const auto lm = make_linear_mixture(3, 3, 2, {2, 2}, 8);
  LinearMixtureModel m;
  m.states = 3;
  m.actions = 4;
  m.dim = 3;
  m.features = lm.features;
  m.theta = lm.theta;
  const auto k = m.to_model().kernel();
  for (std::size_t x = 0; x < k.data().size(); ++x) {
    EXPECT_NEAR(k.data()[x], lm.game.transition().data()[x], 1e-12);
  }
}

}  // namespace
}  // namespace mamex
