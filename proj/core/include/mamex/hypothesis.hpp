#pragma once

#include <memory>
#include <span>
#include <vector>

#include "mamex/game.hpp"

namespace mamex {

/// Tabular Q hypothesis f_h(s, a) of one agent; entries live in [0, upper].
class QHypothesis {
 public:
  QHypothesis() = default;
  QHypothesis(std::size_t horizon, std::size_t states, std::size_t actions,
              double upper, double fill = 0.0);
  /// Takes ownership of an [h][s][a] table and clips it into [0, upper].
  QHypothesis(std::size_t horizon, std::size_t states, std::size_t actions,
              double upper, std::vector<double> values);

  std::size_t horizon() const { return horizon_; }
  std::size_t num_states() const { return states_; }
  std::size_t num_actions() const { return actions_; }
  double upper() const { return upper_; }

  double operator()(std::size_t h, std::size_t s, std::size_t a) const {
    return values_[(h * states_ + s) * actions_ + a];
  }
  /// Writes are clipped into [0, upper].
  void set(std::size_t h, std::size_t s, std::size_t a, double v);
  std::span<const double> step(std::size_t h) const {
    return {values_.data() + h * states_ * actions_, states_ * actions_};
  }
  const std::vector<double>& data() const { return values_; }

 private:
  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  double upper_ = 1.0;
  std::vector<double> values_;
};

/// Feature table phi_h(s, a) in R^d, indexed [h][s][a][j].
struct FeatureMap {
  std::size_t horizon = 0;
  std::size_t states = 0;
  std::size_t actions = 0;
  std::size_t dim = 0;
  std::vector<double> phi;

  double operator()(std::size_t h, std::size_t s, std::size_t a, std::size_t j) const {
    return phi[((h * states + s) * actions + a) * dim + j];
  }
  std::span<const double> at(std::size_t h, std::size_t s, std::size_t a) const {
    return {phi.data() + ((h * states + s) * actions + a) * dim, dim};
  }
  /// Throws InputError if some ||phi_h(s, a)||_2 exceeds 1.
  void validate() const;
};

/// One-hot features (the tabular class written as a linear class).
FeatureMap one_hot_features(std::size_t horizon, std::size_t states, std::size_t actions);

/// f_h = phi_h^T theta_h with ||theta_h||_2 <= sqrt(d); evaluations clipped
/// into [0, upper].
class LinearQHypothesis {
 public:
  LinearQHypothesis(std::shared_ptr<const FeatureMap> features,
                    std::vector<std::vector<double>> theta, double upper);

  const FeatureMap& features() const { return *features_; }
  const std::vector<std::vector<double>>& theta() const { return theta_; }
  double radius() const;
  double upper() const { return upper_; }
  /// Unclipped phi_h(s, a)^T theta_h.
  double raw(std::size_t h, std::size_t s, std::size_t a) const;
  QHypothesis to_tabular() const;

 private:
  std::shared_ptr<const FeatureMap> features_;
  std::vector<std::vector<double>> theta_;
  double upper_ = 1.0;
};

/// Transition-model hypothesis P_f. Tabular models hold simplex rows;
/// `from_logits` builds them through a row-wise softmax.
class ModelHypothesis {
 public:
  explicit ModelHypothesis(TransitionKernel kernel);
  static ModelHypothesis from_logits(std::size_t horizon, std::size_t states,
                                     std::size_t actions, std::span<const double> logits);

  const TransitionKernel& kernel() const { return kernel_; }

 private:
  TransitionKernel kernel_;
};

/// Linear-mixture model P_h(s'|s,a) = <theta_h, phi(s'|s,a)>.
struct LinearMixtureModel {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::size_t dim = 0;
  std::vector<double> features;            // [s][a][s'][j]
  std::vector<std::vector<double>> theta;  // [h][j]

  /// Materializes the kernel; throws InputError if a row is not a
  /// distribution within 1e-10 or some ||theta_h||_2 > sqrt(d).
  ModelHypothesis to_model() const;
};

/// V_f(rho) for a Q hypothesis: E_{s ~ rho, a ~ pi_1(s)}[f_1(s, a)].
double value_under_hypothesis(const QHypothesis& f, const MarkovJointPolicy& pi,
                              std::span<const double> rho);
/// V_f(rho) for a model hypothesis: DP under P_f with the known rewards,
/// values capped at `reward_cap`.
double value_under_hypothesis(const ModelHypothesis& model, const MarkovJointPolicy& pi,
                              std::size_t agent, const RewardTable& rewards,
                              std::span<const double> rho, double reward_cap);

/// The realizable hypothesis Q^{(i), pi} of the game.
QHypothesis true_q_hypothesis(const MarkovGame& game, const MarkovJointPolicy& pi,
                              std::size_t agent);

struct CompletenessReport {
  double max_residual = 0.0;
  bool complete = true;
};

/// Largest least-squares residual of r_h^{(i)} and of T_h^{pi} applied to
/// each feature direction of step h + 1, projected onto span(phi_h), over
/// every agent and every listed policy.
CompletenessReport linear_completeness_residual(const FeatureMap& features,
                                                const MarkovGame& game,
                                                std::span<const MarkovJointPolicy> policies,
                                                double tol = 1e-8);

/// Linear Q class with the completeness check run at construction; a
/// failing check logs a warning to std::clog (realizability cannot be
/// enforced in general).
class LinearQClass {
 public:
  LinearQClass(std::shared_ptr<const FeatureMap> features, const MarkovGame& game,
               std::span<const MarkovJointPolicy> policies);

  const std::shared_ptr<const FeatureMap>& features() const { return features_; }
  const CompletenessReport& completeness() const { return report_; }

 private:
  std::shared_ptr<const FeatureMap> features_;
  CompletenessReport report_;
};

}  // namespace mamex
