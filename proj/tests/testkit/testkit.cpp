#include "testkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mamex::testkit {

OracleReport make_report(std::string oracle, std::string instance, double value,
                         double oracle_value) {
  OracleReport r;
  r.oracle = std::move(oracle);
  r.instance = std::move(instance);
  r.value = value;
  r.oracle_value = oracle_value;
  r.abs_error = std::abs(value - oracle_value);
  r.rel_error = r.abs_error / std::max(1.0, std::abs(oracle_value));
  return r;
}

double grid_argmin(const std::function<double(double)>& fn, double lo, double hi, double step) {
  const auto cells = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g <= cells; ++g) {
    const double c = std::min(hi, lo + static_cast<double>(g) * step);
    const double v = fn(c);
    if (v < best_val) {
      best_val = v;
      best = g;
    }
  }
  double a = std::max(lo, lo + (static_cast<double>(best) - 1.0) * step);
  double b = std::min(hi, lo + (static_cast<double>(best) + 1.0) * step);
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (fn(m1) <= fn(m2)) {
      b = m2;
    } else {
      a = m1;
    }
  }
  return 0.5 * (a + b);
}

namespace {

// <f_{h+1}(s', .), pi_{h+1}(. | s')>, zero past the horizon.
double next_value(const QHypothesis& f, const MarkovJointPolicy& pi, std::size_t h,
                  std::size_t next) {
  if (h + 1 >= f.horizon()) return 0.0;
  double v = 0.0;
  for (std::size_t a = 0; a < f.num_actions(); ++a) v += pi.at(h + 1, next)[a] * f(h + 1, next, a);
  return v;
}

}  // namespace

double literal_L_model_free(const TransitionLedger& ledger, const RewardTable& rewards,
                            const QHypothesis& f, const MarkovJointPolicy& pi,
                            std::size_t agent, double reward_cap, double grid_step) {
  const std::size_t S = ledger.num_states();
  const std::size_t A = ledger.num_joint_actions();
  double total = 0.0;
  for (std::size_t h = 0; h < ledger.horizon(); ++h) {
    const auto& xs = ledger.transitions(h);
    // sum_j l_h(xi_j, f, f)^2
    double own = 0.0;
    for (const auto& x : xs) {
      const double l = f(h, x.state, x.action) - rewards(agent, h, x.state, x.action) -
                       next_value(f, pi, h, x.next);
      own += l * l;
    }
    // inf over the table f'_h: the sum separates over its entries.
    double best = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        std::vector<double> targets;
        for (const auto& x : xs) {
          if (x.state == s && x.action == a) {
            targets.push_back(rewards(agent, h, s, a) + next_value(f, pi, h, x.next));
          }
        }
        if (targets.empty()) continue;
        const auto sq = [&](double c) {
          double t = 0.0;
          for (double y : targets) t += (c - y) * (c - y);
          return t;
        };
        best += sq(grid_argmin(sq, 0.0, 2.0 * reward_cap, grid_step));
      }
    }
    total += own - best;
  }
  return total;
}

double literal_L_model_based(const TransitionLedger& ledger, const TransitionKernel& model) {
  double total = 0.0;
  for (std::size_t h = 0; h < ledger.horizon(); ++h) {
    for (const auto& x : ledger.transitions(h)) {
      total += -std::log(std::max(model(h, x.state, x.action, x.next), 1e-12));
    }
  }
  return total;
}

namespace {

// Expected return from (h, s) onward, summing over every branch.
double paths_from_state(const MarkovGame& game, const MarkovJointPolicy& pi, std::size_t agent,
                        std::size_t h, std::size_t s);

double paths_from_action(const MarkovGame& game, const MarkovJointPolicy& pi, std::size_t agent,
                         std::size_t h, std::size_t s, std::size_t a) {
  double v = game.rewards()(agent, h, s, a);
  if (h + 1 == game.horizon()) return v;
  for (std::size_t next = 0; next < game.num_states(); ++next) {
    const double p = game.transition()(h, s, a, next);
    if (p > 0.0) v += p * paths_from_state(game, pi, agent, h + 1, next);
  }
  return v;
}

double paths_from_state(const MarkovGame& game, const MarkovJointPolicy& pi, std::size_t agent,
                        std::size_t h, std::size_t s) {
  double v = 0.0;
  for (std::size_t a = 0; a < game.num_joint_actions(); ++a) {
    const double p = pi.at(h, s)[a];
    if (p > 0.0) v += p * paths_from_action(game, pi, agent, h, s, a);
  }
  return v;
}

}  // namespace

double path_enumeration_value(const MarkovGame& game, const MarkovJointPolicy& pi,
                              std::size_t agent) {
  double v = 0.0;
  for (std::size_t s = 0; s < game.num_states(); ++s) {
    if (game.rho()[s] > 0.0) v += game.rho()[s] * paths_from_state(game, pi, agent, 0, s);
  }
  return v;
}

std::vector<double> path_enumeration_q(const MarkovGame& game, const MarkovJointPolicy& pi,
                                       std::size_t agent) {
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_joint_actions();
  std::vector<double> q(game.horizon() * S * A);
  for (std::size_t h = 0; h < game.horizon(); ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        q[(h * S + s) * A + a] = paths_from_action(game, pi, agent, h, s, a);
      }
    }
  }
  return q;
}

MeanEstimate mc_value(const MarkovGame& game, const MarkovJointPolicy& pi, std::size_t agent,
                      std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("mc_value needs at least one episode");
  std::mt19937_64 eng(seed);
  const auto draw = [&](std::span<const double> w) {
    std::discrete_distribution<std::size_t> d(w.begin(), w.end());
    return d(eng);
  };
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::size_t s = draw(game.rho());
    double ret = 0.0;
    for (std::size_t h = 0; h < game.horizon(); ++h) {
      const std::size_t a = draw(pi.at(h, s));
      ret += game.rewards()(agent, h, s, a);
      s = draw(game.transition().row(h, s, a));
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double n = static_cast<double>(episodes);
  MeanEstimate est;
  est.mean = sum / n;
  if (episodes > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.stderr_ = std::sqrt(var / n);
  }
  return est;
}

namespace {

// E[U_i(phi(u_i), u_{-i})] under `mixed`, looping over every joint index.
double swapped_payoff(const NormalFormGame& game, const JointMixedPolicy& mixed,
                      std::size_t agent, const std::vector<std::size_t>& phi) {
  const auto& layout = game.layout();
  double v = 0.0;
  for (std::size_t u = 0; u < layout.size(); ++u) {
    const double m = mixed.mass(u);
    if (m == 0.0) continue;
    auto digits = layout.decode(u);
    digits[agent] = phi[digits[agent]];
    v += m * game.payoff(agent, layout.encode(digits));
  }
  return v;
}

}  // namespace

double brute_force_swap(const NormalFormGame& game, const JointMixedPolicy& mixed,
                        std::size_t agent) {
  const std::size_t m = game.num_strategies(agent);
  if (m > 4) throw std::invalid_argument("brute_force_swap is capped at four strategies");
  std::vector<std::size_t> identity(m);
  for (std::size_t u = 0; u < m; ++u) identity[u] = u;
  const double base = swapped_payoff(game, mixed, agent, identity);
  std::size_t maps = 1;
  for (std::size_t u = 0; u < m; ++u) maps *= m;
  double best = 0.0;
  std::vector<std::size_t> phi(m);
  for (std::size_t code = 0; code < maps; ++code) {
    std::size_t c = code;
    for (std::size_t u = 0; u < m; ++u) {
      phi[u] = c % m;
      c /= m;
    }
    best = std::max(best, swapped_payoff(game, mixed, agent, phi) - base);
  }
  return best;
}

double brute_force_deviation(const NormalFormGame& game, const JointMixedPolicy& mixed,
                             std::size_t agent) {
  const std::size_t m = game.num_strategies(agent);
  std::vector<std::size_t> phi(m);
  for (std::size_t u = 0; u < m; ++u) phi[u] = u;
  const double base = swapped_payoff(game, mixed, agent, phi);
  double best = 0.0;
  for (std::size_t v = 0; v < m; ++v) {
    std::fill(phi.begin(), phi.end(), v);
    best = std::max(best, swapped_payoff(game, mixed, agent, phi) - base);
  }
  return best;
}

NormalFormGame brute_force_payoffs(const MarkovGame& game, const PurePolicySpace& space) {
  const std::size_t n = game.num_agents();
  const std::size_t H = game.horizon();
  const std::size_t S = game.num_states();
  const auto& actions = game.action_layout();
  std::vector<std::vector<double>> payoffs(n, std::vector<double>(space.joint_size()));
  for (std::size_t u = 0; u < space.joint_size(); ++u) {
    const auto members = space.layout().decode(u);
    MarkovJointPolicy pi(H, S, actions.size());
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < actions.size(); ++a) {
          const auto own = actions.decode(a);
          double p = 1.0;
          for (std::size_t i = 0; i < n; ++i) p *= space.policy(i, members[i]).prob(h, s, own[i]);
          pi.at(h, s)[a] = p;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) payoffs[i][u] = path_enumeration_value(game, pi, i);
  }
  return NormalFormGame(space.layout(), std::move(payoffs));
}

namespace {

std::vector<double> targets_of(const PayoffProblem& p, const QHypothesis& f, std::size_t h,
                               std::size_t s, std::size_t a) {
  std::vector<double> ys;
  for (const auto& x : p.ledger.transitions(h)) {
    if (x.state == s && x.action == a) {
      ys.push_back(p.rewards(p.agent, h, s, a) + next_value(f, p.pi, h, x.next));
    }
  }
  return ys;
}

double grid_objective_q(const PayoffProblem& p, const QHypothesis& f) {
  const std::size_t S = f.num_states();
  const std::size_t A = f.num_actions();
  double value = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) value += p.rho[s] * p.pi.at(0, s)[a] * f(0, s, a);
  }
  double loss = 0.0;
  for (std::size_t h = 0; h < f.horizon(); ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        const auto ys = targets_of(p, f, h, s, a);
        if (ys.empty()) continue;
        double mean = 0.0;
        for (double y : ys) mean += y;
        mean /= static_cast<double>(ys.size());
        // sum (f - y)^2 - min_c sum (c - y)^2, the minimum sitting at the mean.
        for (double y : ys) loss += (f(h, s, a) - y) * (f(h, s, a) - y) - (mean - y) * (mean - y);
      }
    }
  }
  return value - p.eta * loss;
}

}  // namespace

double grid_search_modelfree(const PayoffProblem& problem, double step) {
  const std::size_t H = problem.ledger.horizon();
  const std::size_t S = problem.ledger.num_states();
  const std::size_t A = problem.ledger.num_joint_actions();
  const std::size_t entries = H * S * A;
  if (entries > 5) throw std::invalid_argument("grid_search_modelfree is capped at five entries");
  const double R = problem.reward_cap;
  const auto levels = static_cast<std::size_t>(std::floor(R / step + 1e-9)) + 1;
  std::size_t total = 1;
  for (std::size_t e = 0; e < entries; ++e) total *= levels;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> table(entries);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t e = 0; e < entries; ++e) {
      table[e] = std::min(R, static_cast<double>(c % levels) * step);
      c /= levels;
    }
    const QHypothesis f(H, S, A, R, table);
    best = std::max(best, grid_objective_q(problem, f));
  }
  return best;
}

namespace {

double capped_value(const PayoffProblem& p, const TransitionKernel& P) {
  const std::size_t H = P.horizon();
  const std::size_t S = P.num_states();
  const std::size_t A = P.num_joint_actions();
  std::vector<double> v(S, 0.0);
  for (std::size_t h = H; h-- > 0;) {
    std::vector<double> next(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      double vs = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        double q = p.rewards(p.agent, h, s, a);
        for (std::size_t t = 0; t < S; ++t) q += P(h, s, a, t) * v[t];
        vs += p.pi.at(h, s)[a] * q;
      }
      next[s] = std::min(vs, p.reward_cap);
    }
    v = std::move(next);
  }
  double out = 0.0;
  for (std::size_t s = 0; s < S; ++s) out += p.rho[s] * v[s];
  return out;
}

}  // namespace

double grid_search_modelbased(const PayoffProblem& problem, double step) {
  const auto& ledger = problem.ledger;
  const std::size_t H = ledger.horizon();
  const std::size_t S = ledger.num_states();
  const std::size_t A = ledger.num_joint_actions();
  if (S != 2) throw std::invalid_argument("grid_search_modelbased needs two states");
  const std::size_t searched = (H - 1) * S * A;
  if (searched > 3) throw std::invalid_argument("grid_search_modelbased is capped at three rows");

  // Empirical model written out from the raw tuples.
  std::vector<double> mle(H * S * A * S, 0.0);
  std::vector<double> n(H * S * A, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    for (const auto& x : ledger.transitions(h)) {
      mle[((h * S + x.state) * A + x.action) * S + x.next] += 1.0;
      n[(h * S + x.state) * A + x.action] += 1.0;
    }
  }
  for (std::size_t r = 0; r < H * S * A; ++r) {
    for (std::size_t t = 0; t < S; ++t) {
      mle[r * S + t] = n[r] > 0.0 ? mle[r * S + t] / n[r] : 1.0 / static_cast<double>(S);
    }
  }
  const double nll_mle = literal_L_model_based(ledger, TransitionKernel(H, S, A, mle));

  const auto levels = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9)) + 1;
  std::size_t total = 1;
  for (std::size_t r = 0; r < searched; ++r) total *= levels;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> probs = mle;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t r = 0; r < searched; ++r) {
      const double p0 = std::min(1.0, static_cast<double>(c % levels) * step);
      c /= levels;
      probs[r * S] = p0;
      probs[r * S + 1] = 1.0 - p0;
    }
    const TransitionKernel P(H, S, A, probs);
    const double obj =
        capped_value(problem, P) - problem.eta * (literal_L_model_based(ledger, P) - nll_mle);
    best = std::max(best, obj);
  }
  return best;
}

}  // namespace mamex::testkit
