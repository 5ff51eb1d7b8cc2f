#include "mamex/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mamex {
namespace {

using Rng = std::mt19937_64;

void fill_dirichlet_one(Rng& rng, std::span<double> out) {
  double total = 0.0;
  for (double& x : out) {
    x = -std::log1p(-uniform01(rng));
    total += x;
  }
  for (double& x : out) x /= total;
}

// Rows within 1e-6 of the simplex are projected onto it; anything else is
// rejected so the caller can retry.
bool normalize_or_reject(std::span<double> row) {
  double sum = 0.0;
  double lowest = 0.0;
  for (double x : row) {
    sum += x;
    lowest = std::min(lowest, x);
  }
  if (lowest < -1e-6 || std::abs(sum - 1.0) > 1e-6) return false;
  if (lowest < 0.0 || sum != 1.0) {
    sum = 0.0;
    for (double& x : row) {
      x = std::max(x, 0.0);
      sum += x;
    }
    if (sum <= 0.0) return false;
    for (double& x : row) x /= sum;
  }
  return true;
}

// Max-over-actions return bound used to rescale generated rewards.
double worst_case(const TransitionKernel& P, const RewardTable& r, std::size_t agent,
                  std::span<const double> rho) {
  const std::size_t H = P.horizon();
  const std::size_t S = P.num_states();
  const std::size_t A = P.num_joint_actions();
  std::vector<double> next(S, 0.0), cur(S, 0.0);
  for (std::size_t h = H; h-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double best = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        double tail = 0.0;
        const auto row = P.row(h, s, a);
        for (std::size_t sn = 0; sn < S; ++sn) {
          if (row[sn] > 0.0) tail = std::max(tail, next[sn]);
        }
        best = std::max(best, r(agent, h, s, a) + tail);
      }
      cur[s] = best;
    }
    std::swap(cur, next);
  }
  double worst = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (rho[s] > 0.0) worst = std::max(worst, next[s]);
  }
  return worst;
}

std::vector<double> uniform_rho(std::size_t states) {
  return std::vector<double>(states, 1.0 / static_cast<double>(states));
}

void check_sizes(std::size_t states, std::size_t horizon,
                 const std::vector<std::size_t>& actions) {
  if (states == 0 || horizon == 0 || actions.empty()) {
    throw InputError("generator sizes must be at least 1");
  }
  for (std::size_t a : actions) {
    if (a == 0) throw InputError("every agent needs at least one action");
  }
}

}  // namespace

MarkovGame make_random_tabular(std::size_t states, std::size_t horizon,
                               const std::vector<std::size_t>& actions,
                               double reward_scale, std::uint64_t seed,
                               std::size_t joint_action_cap) {
  check_sizes(states, horizon, actions);
  if (!(reward_scale > 0.0 && reward_scale <= 1.0)) {
    throw InputError("reward_scale must lie in (0, 1]");
  }
  const MixedRadix layout(actions, joint_action_cap);
  const std::size_t A = layout.size();
  const std::size_t n = actions.size();
  Rng rng(derive_seed(seed, 0x7ab));

  TransitionKernel P(horizon, states, A);
  for (std::size_t r = 0; r < P.num_rows(); ++r) {
    auto row = P.row(r);
    do {
      fill_dirichlet_one(rng, row);
    } while (!normalize_or_reject(row));
  }
  RewardTable rewards(n, horizon, states, A);
  for (double& x : rewards.data()) x = reward_scale * uniform01(rng);

  auto rho = uniform_rho(states);
  for (std::size_t i = 0; i < n; ++i) {
    const double worst = worst_case(P, rewards, i, rho);
    if (worst > 1.0) {
      for (std::size_t h = 0; h < horizon; ++h) {
        for (std::size_t s = 0; s < states; ++s) {
          for (std::size_t a = 0; a < A; ++a) rewards.at(i, h, s, a) /= worst;
        }
      }
    }
  }
  return MarkovGame(actions, states, std::move(P), std::move(rewards),
                    std::move(rho), 1.0, std::nullopt, joint_action_cap);
}

double LinearMixtureGame::reconstruct(std::size_t h, std::size_t s, std::size_t a,
                                      std::size_t next) const {
  double p = 0.0;
  for (std::size_t j = 0; j < dim; ++j) p += theta[h][j] * feature(s, a, next, j);
  return p;
}

LinearMixtureGame linear_mixture_from(std::size_t dim, std::size_t states,
                                      const std::vector<std::size_t>& actions,
                                      std::vector<double> features,
                                      std::vector<std::vector<double>> theta,
                                      RewardTable rewards, std::vector<double> rho,
                                      double reward_cap) {
  const MixedRadix layout(actions);
  const std::size_t A = layout.size();
  const std::size_t H = theta.size();
  if (dim == 0) throw InputError("linear mixture dimension must be at least 1");
  if (features.size() != states * A * states * dim) {
    throw InputError("linear mixture feature table has the wrong size");
  }
  TransitionKernel P(H, states, A);
  for (std::size_t h = 0; h < H; ++h) {
    if (theta[h].size() != dim) throw InputError("theta_h has the wrong dimension");
    for (std::size_t s = 0; s < states; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        auto row = P.row(h, s, a);
        for (std::size_t sn = 0; sn < states; ++sn) {
          double p = 0.0;
          for (std::size_t j = 0; j < dim; ++j) {
            p += theta[h][j] * features[((s * A + a) * states + sn) * dim + j];
          }
          row[sn] = p;
        }
      }
    }
  }
  MarkovGame game(actions, states, std::move(P), std::move(rewards), std::move(rho),
                  reward_cap);
  return LinearMixtureGame{std::move(game), dim, std::move(theta), std::move(features)};
}

LinearMixtureGame make_linear_mixture(std::size_t dim, std::size_t states,
                                      std::size_t horizon,
                                      const std::vector<std::size_t>& actions,
                                      std::uint64_t seed, std::size_t retry_budget) {
  check_sizes(states, horizon, actions);
  if (dim == 0) throw InputError("linear mixture dimension must be at least 1");
  const MixedRadix layout(actions);
  const std::size_t A = layout.size();
  Rng rng(derive_seed(seed, 0x11a));

  // Basis kernels: phi_j(.|s,a) is a distribution for every j.
  std::vector<double> features(states * A * states * dim);
  std::vector<double> buf(states);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t j = 0; j < dim; ++j) {
        fill_dirichlet_one(rng, buf);
        for (std::size_t sn = 0; sn < states; ++sn) {
          features[((s * A + a) * states + sn) * dim + j] = buf[sn];
        }
      }
    }
  }

  const double radius = std::sqrt(static_cast<double>(dim));
  std::vector<std::vector<double>> theta(horizon, std::vector<double>(dim));
  for (std::size_t h = 0; h < horizon; ++h) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < retry_budget && !accepted; ++attempt) {
      auto& th = theta[h];
      fill_dirichlet_one(rng, th);
      // Zero-sum perturbation keeps sum(theta) = 1 but may leave the simplex.
      double mean = 0.0;
      std::vector<double> noise(dim);
      for (double& z : noise) {
        z = (uniform01(rng) - 0.5) * 0.6 / static_cast<double>(dim);
        mean += z;
      }
      mean /= static_cast<double>(dim);
      double norm2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        th[j] += noise[j] - mean;
        norm2 += th[j] * th[j];
      }
      if (std::sqrt(norm2) > radius) continue;
      accepted = true;
      for (std::size_t s = 0; s < states && accepted; ++s) {
        for (std::size_t a = 0; a < A && accepted; ++a) {
          double sum = 0.0;
          for (std::size_t sn = 0; sn < states; ++sn) {
            double p = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
              p += th[j] * features[((s * A + a) * states + sn) * dim + j];
            }
            if (p < 0.0) accepted = false;
            sum += p;
          }
          if (std::abs(sum - 1.0) > 1e-12) accepted = false;
        }
      }
    }
    if (!accepted) {
      throw ComputeError("make_linear_mixture: no valid theta for step " +
                         std::to_string(h) + " within " +
                         std::to_string(retry_budget) + " attempts");
    }
  }

  const std::size_t n = actions.size();
  RewardTable rewards(n, horizon, states, A);
  for (double& x : rewards.data()) x = uniform01(rng) / static_cast<double>(horizon);
  return linear_mixture_from(dim, states, actions, std::move(features),
                             std::move(theta), std::move(rewards),
                             uniform_rho(states), 1.0);
}

double ZeroSumLinearGame::reconstruct_reward(std::size_t h, std::size_t s,
                                             std::size_t a) const {
  double r = 0.0;
  for (std::size_t j = 0; j < dim; ++j) r += feature(s, a, j) * theta[h][j];
  return r;
}

double ZeroSumLinearGame::reconstruct_transition(std::size_t h, std::size_t s,
                                                 std::size_t a,
                                                 std::size_t next) const {
  const std::size_t S = game.num_states();
  double p = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    p += feature(s, a, j) * mu[(h * S + next) * dim + j];
  }
  return p;
}

ZeroSumLinearGame make_zero_sum_linear(std::size_t dim, std::size_t states,
                                       std::size_t horizon, std::size_t actions_a,
                                       std::size_t actions_b, std::uint64_t seed,
                                       std::size_t retry_budget) {
  const std::vector<std::size_t> actions{actions_a, actions_b};
  check_sizes(states, horizon, actions);
  if (dim == 0) throw InputError("feature dimension must be at least 1");
  const std::size_t A = actions_a * actions_b;
  const double step_total = 1.0 / static_cast<double>(horizon);
  Rng rng(derive_seed(seed, 0x25e));

  for (std::size_t attempt = 0; attempt < retry_budget; ++attempt) {
    std::vector<double> features(states * A * dim);
    for (std::size_t sa = 0; sa < states * A; ++sa) {
      fill_dirichlet_one(rng, std::span<double>(features.data() + sa * dim, dim));
    }
    std::vector<std::vector<double>> theta(horizon, std::vector<double>(dim));
    for (auto& th : theta) {
      for (double& x : th) x = step_total * uniform01(rng);
    }
    std::vector<double> mu(horizon * states * dim);
    std::vector<double> buf(states);
    for (std::size_t h = 0; h < horizon; ++h) {
      for (std::size_t j = 0; j < dim; ++j) {
        fill_dirichlet_one(rng, buf);
        for (std::size_t sn = 0; sn < states; ++sn) {
          mu[(h * states + sn) * dim + j] = buf[sn];
        }
      }
    }

    TransitionKernel P(horizon, states, A);
    RewardTable rewards(2, horizon, states, A);
    bool valid = true;
    for (std::size_t h = 0; h < horizon && valid; ++h) {
      for (std::size_t s = 0; s < states && valid; ++s) {
        for (std::size_t a = 0; a < A && valid; ++a) {
          double r = 0.0;
          for (std::size_t j = 0; j < dim; ++j) {
            r += features[(s * A + a) * dim + j] * theta[h][j];
          }
          rewards.at(0, h, s, a) = r;
          rewards.at(1, h, s, a) = step_total - r;
          auto row = P.row(h, s, a);
          for (std::size_t sn = 0; sn < states; ++sn) {
            double p = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
              p += features[(s * A + a) * dim + j] * mu[(h * states + sn) * dim + j];
            }
            row[sn] = p;
          }
          double sum = 0.0;
          for (double p : row) {
            if (p < 0.0) valid = false;
            sum += p;
          }
          if (std::abs(sum - 1.0) > 1e-12) valid = false;
        }
      }
    }
    if (!valid) continue;
    MarkovGame game(actions, states, std::move(P), std::move(rewards),
                    uniform_rho(states), 1.0, step_total);
    return ZeroSumLinearGame{std::move(game), dim, std::move(features),
                             std::move(theta), std::move(mu), step_total};
  }
  throw ComputeError("make_zero_sum_linear: no valid parameterization within " +
                     std::to_string(retry_budget) + " attempts");
}

LockGame make_lock_game(std::size_t horizon, const std::vector<std::size_t>& actions,
                        std::uint64_t seed, double bonus) {
  check_sizes(2, horizon, actions);
  if (!(bonus >= 0.0 && bonus < 1.0)) throw InputError("bonus must lie in [0, 1)");
  const MixedRadix layout(actions);
  const std::size_t A = layout.size();
  const std::size_t n = actions.size();
  Rng rng(derive_seed(seed, 0x10c));
  std::vector<std::size_t> key(horizon);
  for (auto& k : key) k = uniform_index(rng, A);

  TransitionKernel P(horizon, 2, A);
  RewardTable rewards(n, horizon, 2, A);
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t a = 0; a < A; ++a) {
      P.row(h, 0, a)[a == key[h] ? 0 : 1] = 1.0;
      P.row(h, 1, a)[1] = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double lure = layout.digit(a, i) == 0 ? bonus : 0.0;
        rewards.at(i, h, 0, a) = lure;
        rewards.at(i, h, 1, a) = lure;
        if (h + 1 == horizon && a == key[h]) {
          rewards.at(i, h, 0, a) = std::min(1.0, lure + 1.0 - bonus);
        }
      }
    }
  }
  std::vector<double> rho{1.0, 0.0};
  double cap = 1.0;
  for (std::size_t i = 0; i < n; ++i) cap = std::max(cap, worst_case(P, rewards, i, rho));
  if (cap > static_cast<double>(horizon)) {
    throw InputError("lock game bonus too large for the horizon");
  }
  MarkovGame game(actions, 2, std::move(P), std::move(rewards), std::move(rho), cap);
  return LockGame{std::move(game), std::move(key)};
}

MarkovGame make_matrix_game(const std::vector<std::size_t>& actions,
                            const std::vector<std::vector<double>>& payoffs) {
  const MixedRadix layout(actions);
  const std::size_t A = layout.size();
  if (payoffs.size() != actions.size()) {
    throw InputError("need one payoff tensor per agent");
  }
  TransitionKernel P(1, 1, A);
  RewardTable rewards(actions.size(), 1, 1, A);
  for (std::size_t a = 0; a < A; ++a) P.row(0, 0, a)[0] = 1.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (payoffs[i].size() != A) throw InputError("payoff tensor has the wrong size");
    for (std::size_t a = 0; a < A; ++a) rewards.at(i, 0, 0, a) = payoffs[i][a];
  }
  return MarkovGame(actions, 1, std::move(P), std::move(rewards), {1.0}, 1.0);
}

}  // namespace mamex
