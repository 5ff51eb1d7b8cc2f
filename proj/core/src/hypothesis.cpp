#include "mamex/hypothesis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>

#include "mamex/evaluate.hpp"

namespace mamex {

namespace {

double clip(double v, double upper) { return std::clamp(v, 0.0, upper); }

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

QHypothesis::QHypothesis(std::size_t horizon, std::size_t states, std::size_t actions,
                         double upper, double fill)
    : horizon_(horizon), states_(states), actions_(actions), upper_(upper),
      values_(horizon * states * actions, clip(fill, upper)) {
  if (!(upper > 0.0)) throw InputError("QHypothesis: upper bound must be positive");
}

QHypothesis::QHypothesis(std::size_t horizon, std::size_t states, std::size_t actions,
                         double upper, std::vector<double> values)
    : horizon_(horizon), states_(states), actions_(actions), upper_(upper),
      values_(std::move(values)) {
  if (!(upper > 0.0)) throw InputError("QHypothesis: upper bound must be positive");
  if (values_.size() != horizon * states * actions) {
    throw InputError("QHypothesis: table has " + std::to_string(values_.size()) +
                     " entries, expected " + std::to_string(horizon * states * actions));
  }
  for (double& v : values_) {
    if (!std::isfinite(v)) throw InputError("QHypothesis: non-finite entry");
    v = clip(v, upper_);
  }
}

void QHypothesis::set(std::size_t h, std::size_t s, std::size_t a, double v) {
  values_[(h * states_ + s) * actions_ + a] = clip(v, upper_);
}

void FeatureMap::validate() const {
  if (phi.size() != horizon * states * actions * dim) {
    throw InputError("feature table has the wrong size");
  }
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t s = 0; s < states; ++s) {
      for (std::size_t a = 0; a < actions; ++a) {
        if (norm2(at(h, s, a)) > 1.0 + 1e-12) {
          throw InputError("feature norm exceeds 1 at [h=" + std::to_string(h) +
                           "][s=" + std::to_string(s) + "][a=" + std::to_string(a) + "]");
        }
      }
    }
  }
}

FeatureMap one_hot_features(std::size_t horizon, std::size_t states, std::size_t actions) {
  FeatureMap f{horizon, states, actions, states * actions, {}};
  f.phi.assign(horizon * states * actions * f.dim, 0.0);
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t sa = 0; sa < states * actions; ++sa) {
      f.phi[(h * states * actions + sa) * f.dim + sa] = 1.0;
    }
  }
  return f;
}

LinearQHypothesis::LinearQHypothesis(std::shared_ptr<const FeatureMap> features,
                                     std::vector<std::vector<double>> theta, double upper)
    : features_(std::move(features)), theta_(std::move(theta)), upper_(upper) {
  if (!features_) throw InputError("LinearQHypothesis: missing feature map");
  if (theta_.size() != features_->horizon) {
    throw InputError("LinearQHypothesis: need one parameter vector per step");
  }
  const double bound = std::sqrt(static_cast<double>(features_->dim)) + 1e-12;
  for (std::size_t h = 0; h < theta_.size(); ++h) {
    if (theta_[h].size() != features_->dim) {
      throw InputError("LinearQHypothesis: parameter dimension mismatch at h=" +
                       std::to_string(h));
    }
    if (norm2(theta_[h]) > bound) {
      throw InputError("LinearQHypothesis: ||theta_h|| exceeds sqrt(d) at h=" +
                       std::to_string(h));
    }
  }
}

double LinearQHypothesis::radius() const {
  return std::sqrt(static_cast<double>(features_->dim));
}

double LinearQHypothesis::raw(std::size_t h, std::size_t s, std::size_t a) const {
  const auto phi = features_->at(h, s, a);
  double v = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) v += phi[j] * theta_[h][j];
  return v;
}

QHypothesis LinearQHypothesis::to_tabular() const {
  const auto& F = *features_;
  std::vector<double> values(F.horizon * F.states * F.actions);
  for (std::size_t h = 0; h < F.horizon; ++h) {
    for (std::size_t s = 0; s < F.states; ++s) {
      for (std::size_t a = 0; a < F.actions; ++a) {
        values[(h * F.states + s) * F.actions + a] = raw(h, s, a);
      }
    }
  }
  return QHypothesis(F.horizon, F.states, F.actions, upper_, std::move(values));
}

ModelHypothesis::ModelHypothesis(TransitionKernel kernel) : kernel_(std::move(kernel)) {
  kernel_.validate(1e-10);
}

ModelHypothesis ModelHypothesis::from_logits(std::size_t horizon, std::size_t states,
                                             std::size_t actions,
                                             std::span<const double> logits) {
  if (logits.size() != horizon * states * actions * states) {
    throw InputError("model logits have the wrong size");
  }
  TransitionKernel k(horizon, states, actions);
  for (std::size_t r = 0; r < k.num_rows(); ++r) {
    const auto z = logits.subspan(r * states, states);
    const double m = *std::max_element(z.begin(), z.end());
    if (!std::isfinite(m)) throw InputError("model logits contain a non-finite entry");
    auto row = k.row(r);
    double total = 0.0;
    for (std::size_t sn = 0; sn < states; ++sn) {
      row[sn] = std::exp(z[sn] - m);
      total += row[sn];
    }
    for (double& p : row) p /= total;
  }
  return ModelHypothesis(std::move(k));
}

ModelHypothesis LinearMixtureModel::to_model() const {
  const std::size_t H = theta.size();
  if (features.size() != states * actions * states * dim) {
    throw InputError("linear-mixture feature table has the wrong size");
  }
  const double bound = std::sqrt(static_cast<double>(dim)) + 1e-12;
  TransitionKernel k(H, states, actions);
  for (std::size_t h = 0; h < H; ++h) {
    if (theta[h].size() != dim) throw InputError("linear-mixture parameter size mismatch");
    if (norm2(theta[h]) > bound) {
      throw InputError("linear-mixture ||theta_h|| exceeds sqrt(d) at h=" + std::to_string(h));
    }
    for (std::size_t s = 0; s < states; ++s) {
      for (std::size_t a = 0; a < actions; ++a) {
        auto row = k.row(h, s, a);
        for (std::size_t sn = 0; sn < states; ++sn) {
          const double* phi = features.data() + ((s * actions + a) * states + sn) * dim;
          double p = 0.0;
          for (std::size_t j = 0; j < dim; ++j) p += phi[j] * theta[h][j];
          // Rounding below zero is tolerated and clamped; real negatives are
          // left for the kernel check to reject.
          row[sn] = p < 0.0 && p >= -1e-10 ? 0.0 : p;
        }
      }
    }
  }
  return ModelHypothesis(std::move(k));
}

double value_under_hypothesis(const QHypothesis& f, const MarkovJointPolicy& pi,
                              std::span<const double> rho) {
  if (f.horizon() == 0) return 0.0;
  double v = 0.0;
  for (std::size_t s = 0; s < f.num_states(); ++s) {
    if (rho[s] == 0.0) continue;
    const auto dist = pi.at(0, s);
    double vs = 0.0;
    for (std::size_t a = 0; a < f.num_actions(); ++a) vs += dist[a] * f(0, s, a);
    v += rho[s] * vs;
  }
  return clip(v, f.upper());
}

double value_under_hypothesis(const ModelHypothesis& model, const MarkovJointPolicy& pi,
                              std::size_t agent, const RewardTable& rewards,
                              std::span<const double> rho, double reward_cap) {
  return evaluate_pure(model.kernel(), rewards, rho, pi, agent, reward_cap).value_at_rho;
}

QHypothesis true_q_hypothesis(const MarkovGame& game, const MarkovJointPolicy& pi,
                              std::size_t agent) {
  auto t = evaluate_pure(game, pi, agent);
  return QHypothesis(game.horizon(), game.num_states(), game.num_joint_actions(),
                     game.reward_cap(), std::move(t.Q));
}

CompletenessReport linear_completeness_residual(const FeatureMap& features,
                                                const MarkovGame& game,
                                                std::span<const MarkovJointPolicy> policies,
                                                double tol) {
  const std::size_t H = game.horizon();
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_joint_actions();
  const std::size_t d = features.dim;
  if (features.horizon != H || features.states != S || features.actions != A) {
    throw InputError("feature map shape does not match the game");
  }
  CompletenessReport report;
  const auto& P = game.transition();
  for (std::size_t h = 0; h < H; ++h) {
    Eigen::MatrixXd Phi(S * A, d);
    for (std::size_t sa = 0; sa < S * A; ++sa) {
      for (std::size_t j = 0; j < d; ++j) Phi(sa, j) = features.phi[(h * S * A + sa) * d + j];
    }
    const auto qr = Phi.colPivHouseholderQr();
    auto residual = [&](const Eigen::VectorXd& y) {
      const Eigen::VectorXd fit = Phi * qr.solve(y);
      return (y - fit).cwiseAbs().maxCoeff();
    };
    for (std::size_t i = 0; i < game.num_agents(); ++i) {
      const auto r = game.rewards().step(i, h);
      report.max_residual = std::max(
          report.max_residual, residual(Eigen::Map<const Eigen::VectorXd>(r.data(), S * A)));
    }
    if (h + 1 == H) continue;
    for (const auto& pi : policies) {
      for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> v_next(S, 0.0);
        for (std::size_t sn = 0; sn < S; ++sn) {
          const auto dist = pi.at(h + 1, sn);
          for (std::size_t a = 0; a < A; ++a) {
            v_next[sn] += dist[a] * features.phi[((h + 1) * S * A + sn * A + a) * d + j];
          }
        }
        Eigen::VectorXd y(S * A);
        for (std::size_t s = 0; s < S; ++s) {
          for (std::size_t a = 0; a < A; ++a) {
            const auto row = P.row(h, s, a);
            double acc = 0.0;
            for (std::size_t sn = 0; sn < S; ++sn) acc += row[sn] * v_next[sn];
            y(s * A + a) = acc;
          }
        }
        report.max_residual = std::max(report.max_residual, residual(y));
      }
    }
  }
  report.complete = report.max_residual <= tol;
  return report;
}

LinearQClass::LinearQClass(std::shared_ptr<const FeatureMap> features, const MarkovGame& game,
                           std::span<const MarkovJointPolicy> policies)
    : features_(std::move(features)) {
  if (!features_) throw InputError("LinearQClass: missing feature map");
  features_->validate();
  report_ = linear_completeness_residual(*features_, game, policies);
  if (!report_.complete) {
    std::clog << "warning: linear Q class is not Bellman complete on this game (residual "
              << report_.max_residual << ")\n";
  }
}

}  // namespace mamex
