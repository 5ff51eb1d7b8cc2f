#include "mamex/equilibrium.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

#include "mamex/evaluate.hpp"

namespace mamex {

double EquilibriumSolution::max_gap() const {
  double g = 0.0;
  for (double x : gaps) g = std::max(g, x);
  return g;
}

std::vector<double> certify(const NormalFormGame& game, const JointMixedPolicy& candidate,
                            EquilibriumKind kind) {
  const auto report = equilibrium_gaps(game, candidate, kind);
  std::vector<double> gaps;
  for (std::size_t i = 0; i < game.num_agents(); ++i) gaps.push_back(report.gap(i, kind));
  return gaps;
}

namespace {

void require_iters(std::size_t iters) {
  if (iters < 1) throw InputError("equilibrium solver needs at least one iteration");
}

// u_i(k) = E_{others ~ product of x_{-i}}[U_i(k, others)] for every agent.
void expected_payoffs(const NormalFormGame& game,
                      const std::vector<std::vector<double>>& x,
                      std::vector<std::vector<double>>& out) {
  const auto& layout = game.layout();
  const std::size_t n = game.num_agents();
  for (std::size_t i = 0; i < n; ++i) std::fill(out[i].begin(), out[i].end(), 0.0);
  std::vector<std::size_t> digits(n, 0);
  for (std::size_t j = 0; j < layout.size(); ++j) {
    // Digits advance like an odometer, last agent fastest.
    double prod_all = 1.0;
    bool zero = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = x[i][digits[i]];
      if (p == 0.0) zero = true;
      prod_all *= p;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double w;
      if (!zero) {
        w = prod_all / x[i][digits[i]];
      } else {
        w = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != i) w *= x[k][digits[k]];
        }
      }
      if (w != 0.0) out[i][digits[i]] += w * game.payoff(i, j);
    }
    for (std::size_t k = n; k-- > 0;) {
      if (++digits[k] < layout.size_of(k)) break;
      digits[k] = 0;
    }
  }
}

void accumulate_product(const MixedRadix& layout, const std::vector<std::vector<double>>& x,
                        double weight, std::vector<double>& mass) {
  const std::size_t n = layout.num_components();
  std::vector<std::size_t> digits(n, 0);
  for (std::size_t j = 0; j < layout.size(); ++j) {
    double p = weight;
    for (std::size_t i = 0; i < n && p != 0.0; ++i) p *= x[i][digits[i]];
    mass[j] += p;
    for (std::size_t k = n; k-- > 0;) {
      if (++digits[k] < layout.size_of(k)) break;
      digits[k] = 0;
    }
  }
}

void softmax_into(const std::vector<double>& scores, double rate, std::vector<double>& x) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    x[k] = std::exp(rate * (scores[k] - mx));
    total += x[k];
  }
  for (double& v : x) v /= total;
}

JointMixedPolicy normalized(const MixedRadix& layout, std::vector<double> mass) {
  double total = 0.0;
  for (double m : mass) total += m;
  for (double& m : mass) m /= total;
  return JointMixedPolicy::from_mass(layout, std::move(mass));
}

struct HedgeRun {
  std::vector<std::vector<double>> average;  // per-agent averaged strategies
  std::vector<double> joint;                 // averaged joint play (unnormalized)
};

HedgeRun run_hedge(const NormalFormGame& game, std::size_t iters, bool track_joint,
                   HedgeOutput output, std::uint64_t seed) {
  const std::size_t n = game.num_agents();
  const auto& layout = game.layout();
  std::vector<double> rate(n);
  std::vector<std::vector<double>> scores(n), x(n), u(n);
  HedgeRun run;
  run.average.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = game.num_strategies(i);
    rate[i] = std::sqrt(8.0 * std::log(static_cast<double>(m)) / static_cast<double>(iters)) /
              game.payoff_range(i);
    scores[i].assign(m, 0.0);
    x[i].assign(m, 1.0 / static_cast<double>(m));
    u[i].assign(m, 0.0);
    run.average[i].assign(m, 0.0);
  }
  if (track_joint) run.joint.assign(layout.size(), 0.0);
  std::mt19937_64 rng(derive_seed(seed, 0x4ed9e));
  std::vector<std::size_t> digits(n);
  for (std::size_t t = 0; t < iters; ++t) {
    for (std::size_t i = 0; i < n; ++i) softmax_into(scores[i], rate[i], x[i]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < x[i].size(); ++k) run.average[i][k] += x[i][k];
    }
    if (track_joint) {
      if (output == HedgeOutput::expected) {
        accumulate_product(layout, x, 1.0, run.joint);
      } else {
        for (std::size_t i = 0; i < n; ++i) digits[i] = sample_categorical(rng, std::span<const double>(x[i]));
        run.joint[layout.encode(digits)] += 1.0;
      }
    }
    expected_payoffs(game, x, u);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < u[i].size(); ++k) scores[i][k] += u[i][k];
    }
  }
  for (auto& a : run.average) {
    for (double& v : a) v /= static_cast<double>(iters);
  }
  return run;
}

// Stationary distribution of the row-stochastic matrix q (m x m, row-major),
// by power iteration on the lazy chain, warm-started from `x`.
void stationary(const std::vector<double>& q, std::size_t m, std::vector<double>& x) {
  std::vector<double> next(m);
  for (int it = 0; it < 10000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      if (x[k] == 0.0) continue;
      for (std::size_t l = 0; l < m; ++l) next[l] += x[k] * q[k * m + l];
    }
    double diff = 0.0;
    double total = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
      next[l] = 0.5 * (next[l] + x[l]);
      total += next[l];
    }
    for (std::size_t l = 0; l < m; ++l) {
      next[l] /= total;
      diff += std::abs(next[l] - x[l]);
    }
    x.swap(next);
    if (diff < 1e-14) break;
  }
}

}  // namespace

EquilibriumSolution solve_cce(const NormalFormGame& game, std::size_t iters,
                              std::uint64_t seed, HedgeOutput output) {
  require_iters(iters);
  auto run = run_hedge(game, iters, true, output, seed);
  EquilibriumSolution sol{normalized(game.layout(), std::move(run.joint)),
                          EquilibriumKind::cce,
                          output == HedgeOutput::expected ? "hedge" : "hedge_sampled",
                          iters,
                          {}};
  sol.gaps = certify(game, sol.policy, EquilibriumKind::cce);
  return sol;
}

EquilibriumSolution solve_ce(const NormalFormGame& game, std::size_t iters, std::uint64_t seed) {
  (void)seed;  // the dynamics are deterministic with expected payoffs
  require_iters(iters);
  const std::size_t n = game.num_agents();
  const auto& layout = game.layout();
  // regret[i][k * m + l]: cumulative regret of learner k (own strategy k)
  // for having played its own distribution instead of l.
  std::vector<std::vector<double>> regret(n), q(n), x(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = game.num_strategies(i);
    regret[i].assign(m * m, 0.0);
    q[i].assign(m * m, 1.0 / static_cast<double>(m));
    x[i].assign(m, 1.0 / static_cast<double>(m));
    u[i].assign(m, 0.0);
  }
  std::vector<double> joint(layout.size(), 0.0);
  for (std::size_t t = 0; t < iters; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t m = x[i].size();
      for (std::size_t k = 0; k < m; ++k) {
        double total = 0.0;
        for (std::size_t l = 0; l < m; ++l) total += regret[i][k * m + l];
        for (std::size_t l = 0; l < m; ++l) {
          q[i][k * m + l] =
              total > 0.0 ? regret[i][k * m + l] / total : 1.0 / static_cast<double>(m);
        }
      }
      stationary(q[i], m, x[i]);
    }
    accumulate_product(layout, x, 1.0, joint);
    expected_payoffs(game, x, u);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t m = x[i].size();
      for (std::size_t k = 0; k < m; ++k) {
        double played = 0.0;
        for (std::size_t l = 0; l < m; ++l) played += q[i][k * m + l] * u[i][l];
        for (std::size_t l = 0; l < m; ++l) {
          double& r = regret[i][k * m + l];
          r = std::max(0.0, r + x[i][k] * (u[i][l] - played));
        }
      }
    }
  }
  EquilibriumSolution sol{normalized(layout, std::move(joint)), EquilibriumKind::ce,
                          "internal_regret_matching", iters, {}};
  sol.gaps = certify(game, sol.policy, EquilibriumKind::ce);
  return sol;
}

NeMode parse_ne_mode(const std::string& text) {
  if (text == "zero_sum_selfplay") return NeMode::zero_sum_selfplay;
  if (text == "bimatrix_support_enum") return NeMode::bimatrix_support_enum;
  throw InputError("unknown NE mode '" + text +
                   "' (expected zero_sum_selfplay|bimatrix_support_enum)");
}

std::string to_string(NeMode mode) {
  return mode == NeMode::zero_sum_selfplay ? "zero_sum_selfplay" : "bimatrix_support_enum";
}

NeMode default_ne_mode(const NormalFormGame& game) {
  if (game.num_agents() == 2) {
    if (game.is_zero_sum()) return NeMode::zero_sum_selfplay;
    if (game.num_strategies(0) <= kSupportEnumMaxStrategies &&
        game.num_strategies(1) <= kSupportEnumMaxStrategies) {
      return NeMode::bimatrix_support_enum;
    }
  }
  throw ComputeError("NE mode unsupported; use CCE");
}

namespace {

// Next k-subset of {0..m-1} in lexicographic order; false after the last.
bool next_subset(std::vector<std::size_t>& idx, std::size_t m) {
  const std::size_t k = idx.size();
  for (std::size_t p = k; p-- > 0;) {
    if (idx[p] < m - k + p) {
      ++idx[p];
      for (std::size_t q = p + 1; q < k; ++q) idx[q] = idx[q - 1] + 1;
      return true;
    }
  }
  return false;
}

// Mixed strategy of the "column" player over `cols` making the row player
// (payoff matrix M, rows x cols) indifferent on `rows`. Empty if singular or
// not a distribution.
std::vector<double> indifference(const Eigen::MatrixXd& M, const std::vector<std::size_t>& rows,
                                 const std::vector<std::size_t>& cols) {
  const std::size_t k = rows.size();
  Eigen::MatrixXd sys(k + 1, k + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k + 1));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) sys(r, c) = M(rows[r], cols[c]);
    sys(r, k) = -1.0;
  }
  for (std::size_t c = 0; c < k; ++c) sys(k, c) = 1.0;
  sys(k, k) = 0.0;
  rhs(k) = 1.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (lu.rank() < static_cast<Eigen::Index>(k + 1)) return {};
  const Eigen::VectorXd sol = lu.solve(rhs);
  std::vector<double> y(M.cols(), 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (!(sol(c) >= -1e-12)) return {};
    y[cols[c]] = std::max(0.0, sol(c));
  }
  return y;
}

bool is_best_response(const Eigen::MatrixXd& M, const std::vector<double>& y,
                      const std::vector<std::size_t>& support) {
  const Eigen::VectorXd v = M * Eigen::Map<const Eigen::VectorXd>(y.data(), M.cols());
  double on = -std::numeric_limits<double>::infinity();
  for (std::size_t r : support) on = std::max(on, v(r));
  for (Eigen::Index r = 0; r < v.size(); ++r) {
    if (v(r) > on + 1e-10) return false;
  }
  return true;
}

EquilibriumSolution support_enumeration(const NormalFormGame& game) {
  const std::size_t m1 = game.num_strategies(0);
  const std::size_t m2 = game.num_strategies(1);
  Eigen::MatrixXd A(m1, m2), B(m1, m2);
  for (std::size_t r = 0; r < m1; ++r) {
    for (std::size_t c = 0; c < m2; ++c) {
      A(r, c) = game.payoff(0, r * m2 + c);
      B(r, c) = game.payoff(1, r * m2 + c);
    }
  }
  const Eigen::MatrixXd Bt = B.transpose();
  std::size_t tried = 0;
  std::size_t singular = 0;
  for (std::size_t k = 1; k <= std::min(m1, m2); ++k) {
    std::vector<std::size_t> I(k);
    for (std::size_t p = 0; p < k; ++p) I[p] = p;
    do {
      std::vector<std::size_t> J(k);
      for (std::size_t p = 0; p < k; ++p) J[p] = p;
      do {
        ++tried;
        const auto y = indifference(A, I, J);
        const auto x = y.empty() ? std::vector<double>{} : indifference(Bt, J, I);
        if (y.empty() || x.empty()) {
          ++singular;
          continue;
        }
        if (!is_best_response(A, y, I) || !is_best_response(Bt, x, J)) continue;
        EquilibriumSolution sol{JointMixedPolicy::product(game.layout(), {x, y}),
                                EquilibriumKind::ne, "bimatrix_support_enum", tried, {}};
        sol.gaps = certify(game, sol.policy, EquilibriumKind::ne);
        return sol;
      } while (next_subset(J, m2));
    } while (next_subset(I, m1));
  }
  throw ComputeError("support enumeration found no equilibrium among equal-size supports (" +
                     std::to_string(singular) + " of " + std::to_string(tried) +
                     " support pairs were singular or infeasible; the game is degenerate)");
}

}  // namespace

EquilibriumSolution solve_ne(const NormalFormGame& game, NeMode mode, std::uint64_t seed,
                             std::size_t iters) {
  if (game.num_agents() != 2) throw ComputeError("NE mode unsupported; use CCE");
  if (mode == NeMode::bimatrix_support_enum) {
    if (game.num_strategies(0) > kSupportEnumMaxStrategies ||
        game.num_strategies(1) > kSupportEnumMaxStrategies) {
      throw ComputeError("NE mode unsupported; use CCE");
    }
    return support_enumeration(game);
  }
  if (!game.is_zero_sum()) {
    throw ComputeError("zero-sum self-play needs a zero-sum game; NE mode unsupported; use CCE");
  }
  require_iters(iters);
  auto run = run_hedge(game, iters, false, HedgeOutput::expected, seed);
  EquilibriumSolution sol{JointMixedPolicy::product(game.layout(), std::move(run.average)),
                          EquilibriumKind::ne, "zero_sum_selfplay", iters, {}};
  sol.gaps = certify(game, sol.policy, EquilibriumKind::ne);
  return sol;
}

std::size_t default_eq_iters(std::size_t joint_size) {
  return std::max<std::size_t>(10000, 100 * joint_size);
}

EquilibriumSolution solve_equilibrium(const NormalFormGame& game, EquilibriumKind kind,
                                      std::size_t iters, std::uint64_t seed) {
  switch (kind) {
    case EquilibriumKind::ne: return solve_ne(game, default_ne_mode(game), seed, iters);
    case EquilibriumKind::ce: return solve_ce(game, iters, seed);
    case EquilibriumKind::cce: break;
  }
  return solve_cce(game, iters, seed);
}

}  // namespace mamex
