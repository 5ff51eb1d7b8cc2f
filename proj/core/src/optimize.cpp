#include "mamex/optimize.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mamex {

InnerMethod parse_inner_method(const std::string& text) {
  if (text == "exact_tabular") return InnerMethod::exact_tabular;
  if (text == "gradient_ascent") return InnerMethod::gradient_ascent;
  if (text == "mirror_ascent") return InnerMethod::mirror_ascent;
  throw InputError("unknown inner solver method '" + text +
                   "' (expected exact_tabular|gradient_ascent|mirror_ascent)");
}

std::string to_string(InnerMethod method) {
  switch (method) {
    case InnerMethod::exact_tabular: return "exact_tabular";
    case InnerMethod::gradient_ascent: return "gradient_ascent";
    case InnerMethod::mirror_ascent: return "mirror_ascent";
  }
  return "?";
}

void InnerSolveConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw InputError("inner_solver.step must be positive");
  if (iters < 1) throw InputError("inner_solver.iters must be at least 1");
  if (restarts < 1) throw InputError("inner_solver.restarts must be at least 1");
  if (sweeps < 1) throw InputError("inner_solver.sweeps must be at least 1");
  if (!(tol >= 0.0)) throw InputError("inner_solver.tol must be nonnegative");
}

namespace {

void check_problem(const PayoffProblem& p) {
  if (!(p.eta >= 0.0) || !std::isfinite(p.eta)) throw InputError("eta must be finite and >= 0");
  const auto& L = p.ledger;
  if (p.pi.horizon() != L.horizon() || p.pi.num_states() != L.num_states() ||
      p.pi.num_joint_actions() != L.num_joint_actions()) {
    throw InputError("policy shape does not match the ledger");
  }
  if (p.rho.size() != L.num_states()) throw InputError("rho size does not match the ledger");
}

void check_finite(double v, const char* solver, std::size_t restart, std::size_t iteration) {
  if (!std::isfinite(v)) {
    throw ComputeError(std::string(solver) + " diverged: non-finite objective at restart " +
                       std::to_string(restart) + ", iteration " + std::to_string(iteration));
  }
}

// ---- model-free quadratic structure ----------------------------------------
//
// Entries e = (h, s, a) flattened as in QHypothesis. For a visited bucket b at
// step h the mean target is ybar_b = r_b + sum_e alpha_{b,e} f_e over entries
// e of step h + 1, with alpha_{b,e} = c_b(s') / n_b * pi_{h+1}(a'|s').
// The objective is J(f) = sum_e beta_e f_e - eta sum_b n_b (f_b - ybar_b)^2.
struct QuadraticModel {
  std::size_t H = 0, S = 0, A = 0;
  double upper = 1.0;
  double eta = 0.0;
  std::vector<double> beta;
  std::vector<double> n;
  std::vector<double> reward;
  std::vector<std::size_t> fwd_begin;  // per bucket b: entries e it reads
  std::vector<std::size_t> fwd_e;
  std::vector<double> fwd_alpha;
  std::vector<std::size_t> back_begin;  // per entry e: buckets b reading it
  std::vector<std::size_t> back_b;
  std::vector<double> back_alpha;

  std::size_t size() const { return H * S * A; }
};

QuadraticModel build_quadratic(const PayoffProblem& p) {
  QuadraticModel m;
  const auto& L = p.ledger;
  m.H = L.horizon();
  m.S = L.num_states();
  m.A = L.num_joint_actions();
  m.upper = p.reward_cap;
  m.eta = p.eta;
  const std::size_t E = m.size();
  const std::size_t SA = m.S * m.A;
  m.beta.assign(E, 0.0);
  for (std::size_t s = 0; s < m.S; ++s) {
    const auto dist = p.pi.at(0, s);
    for (std::size_t a = 0; a < m.A; ++a) m.beta[s * m.A + a] = p.rho[s] * dist[a];
  }
  m.n = L.visit_table();
  m.reward.resize(E);
  for (std::size_t h = 0; h < m.H; ++h) {
    const auto r = p.rewards.step(p.agent, h);
    std::copy(r.begin(), r.end(), m.reward.begin() + h * SA);
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> back(E);
  m.fwd_begin.assign(E + 1, 0);
  for (std::size_t b = 0; b < E; ++b) {
    m.fwd_begin[b] = m.fwd_e.size();
    const std::size_t h = b / SA;
    if (m.n[b] == 0.0 || h + 1 == m.H) continue;
    const std::size_t s = (b % SA) / m.A;
    const std::size_t a = b % m.A;
    const auto c = L.next_counts(h, s, a);
    for (std::size_t sn = 0; sn < m.S; ++sn) {
      if (c[sn] == 0.0) continue;
      const auto dist = p.pi.at(h + 1, sn);
      for (std::size_t an = 0; an < m.A; ++an) {
        if (dist[an] == 0.0) continue;
        const double alpha = c[sn] / m.n[b] * dist[an];
        const std::size_t e = (h + 1) * SA + sn * m.A + an;
        m.fwd_e.push_back(e);
        m.fwd_alpha.push_back(alpha);
        back[e].emplace_back(b, alpha);
      }
    }
  }
  m.fwd_begin[E] = m.fwd_e.size();
  m.back_begin.assign(E + 1, 0);
  for (std::size_t e = 0; e < E; ++e) {
    m.back_begin[e] = m.back_b.size();
    for (const auto& [b, alpha] : back[e]) {
      m.back_b.push_back(b);
      m.back_alpha.push_back(alpha);
    }
  }
  m.back_begin[E] = m.back_b.size();
  return m;
}

// f_b - ybar_b on visited buckets, 0 elsewhere.
std::vector<double> residuals(const QuadraticModel& m, std::span<const double> f) {
  std::vector<double> res(m.size(), 0.0);
  for (std::size_t b = 0; b < m.size(); ++b) {
    if (m.n[b] == 0.0) continue;
    double y = m.reward[b];
    for (std::size_t k = m.fwd_begin[b]; k < m.fwd_begin[b + 1]; ++k) {
      y += m.fwd_alpha[k] * f[m.fwd_e[k]];
    }
    res[b] = f[b] - y;
  }
  return res;
}

struct QuadraticParts {
  double value = 0.0;
  double loss = 0.0;
};

QuadraticParts evaluate_quadratic(const QuadraticModel& m, std::span<const double> f) {
  QuadraticParts out;
  const std::size_t SA = m.S * m.A;
  double v = 0.0;
  for (std::size_t e = 0; e < SA; ++e) v += m.beta[e] * f[e];
  out.value = std::clamp(v, 0.0, m.upper);
  const auto res = residuals(m, f);
  for (std::size_t b = 0; b < m.size(); ++b) out.loss += m.n[b] * res[b] * res[b];
  return out;
}

double quadratic_objective(const QuadraticModel& m, std::span<const double> f) {
  const auto parts = evaluate_quadratic(m, f);
  return parts.value - m.eta * parts.loss;
}

std::vector<double> quadratic_gradient(const QuadraticModel& m, std::span<const double> f) {
  const auto res = residuals(m, f);
  std::vector<double> g(m.size());
  for (std::size_t e = 0; e < m.size(); ++e) {
    double acc = -m.n[e] * res[e];
    for (std::size_t k = m.back_begin[e]; k < m.back_begin[e + 1]; ++k) {
      const std::size_t b = m.back_b[k];
      acc += m.n[b] * m.back_alpha[k] * res[b];
    }
    g[e] = m.beta[e] + 2.0 * m.eta * acc;
  }
  return g;
}

// Largest eigenvalue of D^T N D, where (D u)_b = u_b - sum_e alpha_{b,e} u_e.
double curvature_bound(const QuadraticModel& m) {
  const std::size_t E = m.size();
  std::vector<double> v(E, 1.0);
  std::vector<double> Dv(E), w(E);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (double& x : v) x /= norm;
    for (std::size_t b = 0; b < E; ++b) {
      if (m.n[b] == 0.0) {
        Dv[b] = 0.0;
        continue;
      }
      double y = 0.0;
      for (std::size_t k = m.fwd_begin[b]; k < m.fwd_begin[b + 1]; ++k) {
        y += m.fwd_alpha[k] * v[m.fwd_e[k]];
      }
      Dv[b] = m.n[b] * (v[b] - y);
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t b = 0; b < E; ++b) {
      if (Dv[b] == 0.0) continue;
      w[b] += Dv[b];
      for (std::size_t k = m.fwd_begin[b]; k < m.fwd_begin[b + 1]; ++k) {
        w[m.fwd_e[k]] -= m.fwd_alpha[k] * Dv[b];
      }
    }
    double next = 0.0;
    for (std::size_t e = 0; e < E; ++e) next += v[e] * w[e];
    v.swap(w);
    if (std::abs(next - lambda) <= 1e-9 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Power iteration approaches from below; pad so the step stays safe.
  return 1.05 * lambda;
}

ModelFreeSolution make_modelfree_solution(const QuadraticModel& m, std::vector<double> f) {
  ModelFreeSolution sol;
  const auto parts = evaluate_quadratic(m, f);
  sol.value = parts.value;
  sol.loss = parts.loss;
  sol.objective = parts.value - m.eta * parts.loss;
  sol.f = QHypothesis(m.H, m.S, m.A, m.upper, std::move(f));
  return sol;
}

std::vector<double> fit_table(const QuadraticModel& m) {
  const std::size_t SA = m.S * m.A;
  std::vector<double> f(m.size(), m.upper);
  for (std::size_t h = m.H; h-- > 0;) {
    for (std::size_t b = h * SA; b < (h + 1) * SA; ++b) {
      if (m.n[b] == 0.0) continue;
      double y = m.reward[b];
      for (std::size_t k = m.fwd_begin[b]; k < m.fwd_begin[b + 1]; ++k) {
        y += m.fwd_alpha[k] * f[m.fwd_e[k]];
      }
      f[b] = std::clamp(y, 0.0, m.upper);
    }
  }
  return f;
}

}  // namespace

double modelfree_objective(const PayoffProblem& problem, const QHypothesis& f) {
  check_problem(problem);
  const auto m = build_quadratic(problem);
  if (f.data().size() != m.size()) throw InputError("hypothesis shape does not match the ledger");
  return quadratic_objective(m, f.data());
}

QHypothesis bucket_mean_fit(const PayoffProblem& problem) {
  check_problem(problem);
  const auto m = build_quadratic(problem);
  return QHypothesis(m.H, m.S, m.A, m.upper, fit_table(m));
}

ModelFreeSolution exact_tabular_modelfree(const PayoffProblem& problem,
                                          const InnerSolveConfig& config) {
  check_problem(problem);
  config.validate();
  const auto m = build_quadratic(problem);
  const std::size_t E = m.size();
  if (m.eta == 0.0) return make_modelfree_solution(m, std::vector<double>(E, m.upper));

  auto f = fit_table(m);
  auto res = residuals(m, f);
  for (std::size_t sweep = 0; sweep < config.sweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t e = E; e-- > 0;) {
      const double old = f[e];
      double num = m.beta[e];
      double den = 0.0;
      if (m.n[e] > 0.0) {
        num += 2.0 * m.eta * m.n[e] * (old - res[e]);
        den += 2.0 * m.eta * m.n[e];
      }
      for (std::size_t k = m.back_begin[e]; k < m.back_begin[e + 1]; ++k) {
        const std::size_t b = m.back_b[k];
        const double alpha = m.back_alpha[k];
        const double d = res[b] + alpha * old;
        num += 2.0 * m.eta * m.n[b] * alpha * d;
        den += 2.0 * m.eta * m.n[b] * alpha * alpha;
      }
      const double x = den > 0.0 ? std::clamp(num / den, 0.0, m.upper) : m.upper;
      const double delta = x - old;
      if (delta == 0.0) continue;
      f[e] = x;
      if (m.n[e] > 0.0) res[e] += delta;
      for (std::size_t k = m.back_begin[e]; k < m.back_begin[e + 1]; ++k) {
        res[m.back_b[k]] -= m.back_alpha[k] * delta;
      }
      moved = std::max(moved, std::abs(delta));
    }
    if (moved <= config.tol) break;
  }
  return make_modelfree_solution(m, std::move(f));
}

ModelFreeSolution gradient_modelfree(const PayoffProblem& problem,
                                     const InnerSolveConfig& config,
                                     std::optional<QHypothesis> start) {
  check_problem(problem);
  config.validate();
  const auto m = build_quadratic(problem);
  const std::size_t E = m.size();
  if (m.eta == 0.0) return make_modelfree_solution(m, std::vector<double>(E, m.upper));
  std::vector<double> x = start ? start->data() : fit_table(m);
  if (x.size() != E) throw InputError("start hypothesis shape does not match the ledger");
  const double curvature = 2.0 * m.eta * curvature_bound(m);
  // Without curvature the objective is linear: one long step reaches the box corner.
  const double step = curvature > 0.0 ? 1.0 / curvature : 2.0 * m.upper;
  std::vector<double> y = x;
  std::vector<double> best = x;
  double best_obj = quadratic_objective(m, x);
  double t = 1.0;
  for (std::size_t it = 0; it < config.iters; ++it) {
    const auto g = quadratic_gradient(m, y);
    std::vector<double> next(E);
    for (std::size_t e = 0; e < E; ++e) {
      next[e] = std::clamp(y[e] + step * g[e], 0.0, m.upper);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t e = 0; e < E; ++e) {
      y[e] = next[e] + (t - 1.0) / t_next * (next[e] - x[e]);
    }
    t = t_next;
    x.swap(next);
    const double obj = quadratic_objective(m, x);
    check_finite(obj, "gradient ascent", 0, it);
    if (obj > best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return make_modelfree_solution(m, std::move(best));
}

// ---- linear Q ----------------------------------------------------------------

namespace {

std::vector<double> linear_raw(const FeatureMap& F, const std::vector<std::vector<double>>& theta) {
  std::vector<double> raw(F.horizon * F.states * F.actions);
  for (std::size_t e = 0; e < raw.size(); ++e) {
    const std::size_t h = e / (F.states * F.actions);
    const double* phi = F.phi.data() + e * F.dim;
    double v = 0.0;
    for (std::size_t j = 0; j < F.dim; ++j) v += phi[j] * theta[h][j];
    raw[e] = v;
  }
  return raw;
}

void project_ball(std::vector<double>& theta, double radius) {
  double norm = 0.0;
  for (double v : theta) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > radius) {
    for (double& v : theta) v *= radius / norm;
  }
}

}  // namespace

LinearQSolution linear_q_ascent(const PayoffProblem& problem,
                                std::shared_ptr<const FeatureMap> features,
                                const InnerSolveConfig& config, const QHypothesis* reference) {
  check_problem(problem);
  config.validate();
  if (!features) throw InputError("linear Q class needs a feature map");
  const auto& F = *features;
  const auto m = build_quadratic(problem);
  if (F.horizon != m.H || F.states != m.S || F.actions != m.A) {
    throw InputError("feature map shape does not match the ledger");
  }
  const std::size_t SA = m.S * m.A;
  const double radius = std::sqrt(static_cast<double>(F.dim));
  using Theta = std::vector<std::vector<double>>;

  auto clipped = [&](const Theta& th) {
    auto raw = linear_raw(F, th);
    for (double& v : raw) v = std::clamp(v, 0.0, m.upper);
    return raw;
  };
  auto objective = [&](const Theta& th) { return quadratic_objective(m, clipped(th)); };
  auto least_squares = [&](std::span<const double> target) {
    Theta th(m.H, std::vector<double>(F.dim, 0.0));
    for (std::size_t h = 0; h < m.H; ++h) {
      Eigen::MatrixXd Phi(SA, F.dim);
      Eigen::VectorXd y(SA);
      for (std::size_t sa = 0; sa < SA; ++sa) {
        for (std::size_t j = 0; j < F.dim; ++j) Phi(sa, j) = F.phi[(h * SA + sa) * F.dim + j];
        y(sa) = target[h * SA + sa];
      }
      const Eigen::VectorXd sol = Phi.colPivHouseholderQr().solve(y);
      for (std::size_t j = 0; j < F.dim; ++j) th[h][j] = sol(j);
      project_ball(th[h], radius);
    }
    return th;
  };

  std::vector<Theta> starts;
  starts.emplace_back(m.H, std::vector<double>(F.dim, 0.0));
  starts.push_back(least_squares(fit_table(m)));
  if (reference) starts.push_back(least_squares(reference->data()));

  LinearQSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < starts.size(); ++r) {
    Theta th = starts[r];
    double obj = objective(th);
    check_finite(obj, "linear Q ascent", r, 0);
    double step = config.step;
    for (std::size_t it = 0; it < config.iters; ++it) {
      const auto raw = linear_raw(F, th);
      std::vector<double> f(raw.size());
      for (std::size_t e = 0; e < raw.size(); ++e) f[e] = std::clamp(raw[e], 0.0, m.upper);
      const auto g = quadratic_gradient(m, f);
      Theta grad(m.H, std::vector<double>(F.dim, 0.0));
      for (std::size_t e = 0; e < raw.size(); ++e) {
        const bool inside = raw[e] > 0.0 && raw[e] < m.upper;
        const bool enters = (raw[e] <= 0.0 && g[e] > 0.0) || (raw[e] >= m.upper && g[e] < 0.0);
        if (!inside && !enters) continue;
        const std::size_t h = e / SA;
        for (std::size_t j = 0; j < F.dim; ++j) grad[h][j] += g[e] * F.phi[e * F.dim + j];
      }
      bool improved = false;
      for (int tries = 0; tries < 40 && !improved; ++tries) {
        Theta cand = th;
        for (std::size_t h = 0; h < m.H; ++h) {
          for (std::size_t j = 0; j < F.dim; ++j) cand[h][j] += step * grad[h][j];
          project_ball(cand[h], radius);
        }
        const double cand_obj = objective(cand);
        check_finite(cand_obj, "linear Q ascent", r, it);
        if (cand_obj > obj) {
          th = std::move(cand);
          obj = cand_obj;
          step *= 1.5;
          improved = true;
        } else {
          step *= 0.5;
        }
      }
      if (!improved) break;
    }
    if (obj > best.objective) {
      const auto f = clipped(th);
      const auto parts = evaluate_quadratic(m, f);
      best.objective = obj;
      best.value = parts.value;
      best.loss = parts.loss;
      best.theta = th;
      best.f = QHypothesis(m.H, m.S, m.A, m.upper, f);
    }
  }
  return best;
}

// ---- model-based ---------------------------------------------------------------

namespace {

struct ModelContext {
  std::size_t H = 0, S = 0, A = 0;
  double upper = 1.0;
  double eta = 0.0;
  double mle_nll = 0.0;
  const PayoffProblem* problem = nullptr;
};

ModelContext make_context(const PayoffProblem& p) {
  ModelContext c;
  c.H = p.ledger.horizon();
  c.S = p.ledger.num_states();
  c.A = p.ledger.num_joint_actions();
  c.upper = p.reward_cap;
  c.eta = p.eta;
  c.mle_nll = mle_negative_log_likelihood(p.ledger);
  c.problem = &p;
  return c;
}

// Capped values V_h(s), h = 0..H, for rows of `P`.
std::vector<double> capped_values(const ModelContext& c, const TransitionKernel& P) {
  const auto& p = *c.problem;
  std::vector<double> V((c.H + 1) * c.S, 0.0);
  for (std::size_t h = c.H; h-- > 0;) {
    for (std::size_t s = 0; s < c.S; ++s) {
      V[h * c.S + s] = std::min(c.upper, [&] {
        const auto dist = p.pi.at(h, s);
        double v = 0.0;
        for (std::size_t a = 0; a < c.A; ++a) {
          if (dist[a] == 0.0) continue;
          const auto row = P.row(h, s, a);
          double q = p.rewards(p.agent, h, s, a);
          for (std::size_t sn = 0; sn < c.S; ++sn) q += row[sn] * V[(h + 1) * c.S + sn];
          v += dist[a] * q;
        }
        return v;
      }());
    }
  }
  return V;
}

double model_value(const ModelContext& c, const TransitionKernel& P) {
  const auto V = capped_values(c, P);
  double v = 0.0;
  for (std::size_t s = 0; s < c.S; ++s) v += c.problem->rho[s] * V[s];
  return v;
}

double model_loss(const ModelContext& c, const TransitionKernel& P) {
  return std::max(0.0, L_model_based(c.problem->ledger, P) - c.mle_nll);
}

double model_objective(const ModelContext& c, const TransitionKernel& P) {
  const double loss = c.eta == 0.0 ? 0.0 : model_loss(c, P);
  return model_value(c, P) - c.eta * loss;
}

ModelBasedSolution make_model_solution(const ModelContext& c, TransitionKernel P) {
  ModelBasedSolution sol;
  sol.value = model_value(c, P);
  sol.loss = model_loss(c, P);
  sol.objective = sol.value - c.eta * sol.loss;
  sol.model = std::move(P);
  return sol;
}

// d_h(s, a) of pi under P, [h][s][a].
std::vector<double> model_occupancy(const ModelContext& c, const TransitionKernel& P) {
  const auto& p = *c.problem;
  std::vector<double> occ(c.H * c.S * c.A, 0.0);
  std::vector<double> d(p.rho.begin(), p.rho.end());
  std::vector<double> d_next(c.S);
  for (std::size_t h = 0; h < c.H; ++h) {
    std::fill(d_next.begin(), d_next.end(), 0.0);
    for (std::size_t s = 0; s < c.S; ++s) {
      if (d[s] == 0.0) continue;
      const auto dist = p.pi.at(h, s);
      for (std::size_t a = 0; a < c.A; ++a) {
        const double w = d[s] * dist[a];
        if (w == 0.0) continue;
        occ[(h * c.S + s) * c.A + a] = w;
        const auto row = P.row(h, s, a);
        for (std::size_t sn = 0; sn < c.S; ++sn) d_next[sn] += w * row[sn];
      }
    }
    std::swap(d, d_next);
  }
  return occ;
}

// argmax_p w <p, v> + eta sum c log p over the simplex, written into `p`.
void solve_row(std::span<double> p, std::span<const double> counts, double n, double w,
               std::span<const double> v, double eta) {
  const std::size_t S = p.size();
  const bool linear = n == 0.0 || eta == 0.0;
  if (linear || w == 0.0) {
    std::fill(p.begin(), p.end(), 0.0);
    if (w == 0.0 && n > 0.0) {
      for (std::size_t k = 0; k < S; ++k) p[k] = counts[k] / n;
    } else {
      p[argmax_lowest(v)] = 1.0;
    }
    return;
  }
  double seen_max = -std::numeric_limits<double>::infinity();
  double unseen_max = -std::numeric_limits<double>::infinity();
  std::size_t unseen_arg = S;
  double c_at_seen_max = 0.0;
  for (std::size_t k = 0; k < S; ++k) {
    const double wv = w * v[k];
    if (counts[k] > 0.0) {
      if (wv > seen_max || (wv == seen_max && counts[k] > c_at_seen_max)) {
        seen_max = wv;
        c_at_seen_max = counts[k];
      }
    } else if (wv > unseen_max) {
      unseen_max = wv;
      unseen_arg = k;
    }
  }
  auto g = [&](double lambda) {
    double total = 0.0;
    for (std::size_t k = 0; k < S; ++k) {
      if (counts[k] > 0.0) total += eta * counts[k] / (lambda - w * v[k]);
    }
    return total;
  };
  double lambda;
  double leftover = 0.0;
  if (unseen_arg < S && unseen_max > seen_max && g(unseen_max) <= 1.0) {
    lambda = unseen_max;
    leftover = 1.0 - g(lambda);
  } else {
    // g is convex and decreasing on (seen_max, inf); Newton from a point with
    // g >= 1 increases monotonically to the root.
    lambda = seen_max + eta * c_at_seen_max;
    for (int it = 0; it < 200; ++it) {
      double gv = 0.0;
      double dg = 0.0;
      for (std::size_t k = 0; k < S; ++k) {
        if (counts[k] == 0.0) continue;
        const double gap = lambda - w * v[k];
        gv += eta * counts[k] / gap;
        dg -= eta * counts[k] / (gap * gap);
      }
      const double stepv = (gv - 1.0) / dg;
      const double next = lambda - stepv;
      if (!(next > lambda) || next - lambda <= 1e-16 * std::max(1.0, std::abs(lambda))) {
        lambda = std::max(lambda, next);
        break;
      }
      lambda = next;
    }
  }
  double total = leftover;
  for (std::size_t k = 0; k < S; ++k) {
    p[k] = counts[k] > 0.0 ? eta * counts[k] / (lambda - w * v[k]) : 0.0;
    total += p[k];
  }
  if (leftover > 0.0) p[unseen_arg] = leftover;
  for (double& x : p) x /= total;
}

}  // namespace

double modelbased_objective(const PayoffProblem& problem, const TransitionKernel& model) {
  check_problem(problem);
  const auto c = make_context(problem);
  return model_objective(c, model);
}

ModelBasedSolution block_ascent_modelbased(const PayoffProblem& problem,
                                           const InnerSolveConfig& config,
                                           const TransitionKernel& start) {
  check_problem(problem);
  config.validate();
  const auto c = make_context(problem);
  const auto& ledger = problem.ledger;
  TransitionKernel P = start;
  double J = model_objective(c, P);
  check_finite(J, "block ascent", 0, 0);
  const std::size_t row_len = c.S * c.A * c.S;
  std::vector<double> saved(row_len);
  for (std::size_t sweep = 0; sweep < config.sweeps; ++sweep) {
    const double J_start = J;
    const auto occ = model_occupancy(c, P);
    std::vector<double> V = capped_values(c, P);
    for (std::size_t h = c.H; h-- > 0;) {
      const std::span<const double> v_next(V.data() + (h + 1) * c.S, c.S);
      double* layer = P.row(h, 0, 0).data();
      std::copy(layer, layer + row_len, saved.begin());
      for (std::size_t s = 0; s < c.S; ++s) {
        for (std::size_t a = 0; a < c.A; ++a) {
          solve_row(P.row(h, s, a), ledger.next_counts(h, s, a), ledger.visits(h, s, a),
                    occ[(h * c.S + s) * c.A + a], v_next, c.eta);
        }
      }
      const double J_new = model_objective(c, P);
      check_finite(J_new, "block ascent", 0, sweep);
      if (J_new < J) {
        std::copy(saved.begin(), saved.end(), layer);
      } else {
        J = J_new;
      }
      V = capped_values(c, P);
    }
    if (J - J_start <= config.tol * (1.0 + std::abs(J))) break;
  }
  return make_model_solution(c, std::move(P));
}

ModelBasedSolution mirror_ascent_modelbased(const PayoffProblem& problem,
                                            const InnerSolveConfig& config,
                                            const TransitionKernel& start) {
  check_problem(problem);
  config.validate();
  const auto c = make_context(problem);
  const auto& ledger = problem.ledger;
  std::vector<double> z(start.data().size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = std::log(std::max(start.data()[k], kProbabilityFloor));
  }
  TransitionKernel P = start;
  TransitionKernel best = start;
  double best_obj = model_objective(c, P);
  check_finite(best_obj, "mirror ascent", 0, 0);
  for (std::size_t it = 0; it < config.iters; ++it) {
    const auto occ = model_occupancy(c, P);
    const auto V = capped_values(c, P);
    for (std::size_t h = 0; h < c.H; ++h) {
      const double* v = V.data() + (h + 1) * c.S;
      for (std::size_t s = 0; s < c.S; ++s) {
        for (std::size_t a = 0; a < c.A; ++a) {
          const std::size_t r = (h * c.S + s) * c.A + a;
          const double w = occ[r];
          const double n = ledger.visits(h, s, a);
          if (w == 0.0 && n == 0.0) continue;
          const auto p = P.row(r);
          const auto cnt = ledger.next_counts(h, s, a);
          double pv = 0.0;
          for (std::size_t sn = 0; sn < c.S; ++sn) pv += p[sn] * v[sn];
          const double step = config.step / (1.0 + c.eta * n);
          for (std::size_t sn = 0; sn < c.S; ++sn) {
            const double grad = w * p[sn] * (v[sn] - pv) + c.eta * (cnt[sn] - n * p[sn]);
            z[r * c.S + sn] += step * grad;
          }
        }
      }
    }
    for (std::size_t r = 0; r < P.num_rows(); ++r) {
      auto row = P.row(r);
      const double* zr = z.data() + r * c.S;
      const double mx = *std::max_element(zr, zr + c.S);
      double total = 0.0;
      for (std::size_t sn = 0; sn < c.S; ++sn) {
        row[sn] = std::exp(zr[sn] - mx);
        total += row[sn];
      }
      for (double& x : row) x /= total;
    }
    const double obj = model_objective(c, P);
    check_finite(obj, "mirror ascent", 0, it + 1);
    if (obj > best_obj) {
      best_obj = obj;
      best = P;
    }
  }
  return make_model_solution(c, std::move(best));
}

LinearMixtureSolution linear_mixture_ascent(const PayoffProblem& problem,
                                            const LinearMixtureModel& base,
                                            const InnerSolveConfig& config) {
  check_problem(problem);
  config.validate();
  const auto c = make_context(problem);
  const std::size_t d = base.dim;
  if (base.states != c.S || base.actions != c.A || base.theta.size() != c.H) {
    throw InputError("linear-mixture base does not match the ledger");
  }
  const double radius = std::sqrt(static_cast<double>(d)) + 1e-12;
  const std::size_t SA = c.S * c.A;
  auto phi = [&](std::size_t s, std::size_t a, std::size_t sn) {
    return base.features.data() + ((s * c.A + a) * c.S + sn) * d;
  };
  auto kernel_of = [&](const std::vector<std::vector<double>>& th,
                       TransitionKernel& out) -> bool {
    for (std::size_t h = 0; h < c.H; ++h) {
      double norm = 0.0;
      for (double x : th[h]) norm += x * x;
      if (std::sqrt(norm) > radius) return false;
      for (std::size_t s = 0; s < c.S; ++s) {
        for (std::size_t a = 0; a < c.A; ++a) {
          auto row = out.row(h, s, a);
          for (std::size_t sn = 0; sn < c.S; ++sn) {
            const double* f = phi(s, a, sn);
            double p = 0.0;
            for (std::size_t j = 0; j < d; ++j) p += f[j] * th[h][j];
            if (p < -1e-12) return false;
            row[sn] = std::max(p, 0.0);
          }
        }
      }
    }
    return true;
  };
  // Directions that keep every row sum fixed: the null space of U, where
  // U_{(s,a), j} = sum_{s'} phi_j(s'|s,a).
  Eigen::MatrixXd U(SA, d);
  for (std::size_t s = 0; s < c.S; ++s) {
    for (std::size_t a = 0; a < c.A; ++a) {
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t sn = 0; sn < c.S; ++sn) acc += phi(s, a, sn)[j];
        U(s * c.A + a, j) = acc;
      }
    }
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(U);
  const Eigen::MatrixXd U_pinv = cod.pseudoInverse();

  auto theta = base.theta;
  TransitionKernel P(c.H, c.S, c.A);
  if (!kernel_of(theta, P)) throw InputError("linear-mixture starting point is infeasible");
  double obj = model_objective(c, P);
  check_finite(obj, "linear mixture ascent", 0, 0);
  double step = config.step;
  TransitionKernel cand_P(c.H, c.S, c.A);
  for (std::size_t it = 0; it < config.iters; ++it) {
    const auto occ = model_occupancy(c, P);
    const auto V = capped_values(c, P);
    std::vector<std::vector<double>> grad(c.H, std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < c.H; ++h) {
      for (std::size_t s = 0; s < c.S; ++s) {
        for (std::size_t a = 0; a < c.A; ++a) {
          const double w = occ[(h * c.S + s) * c.A + a];
          const auto p = P.row(h, s, a);
          const auto cnt = problem.ledger.next_counts(h, s, a);
          for (std::size_t sn = 0; sn < c.S; ++sn) {
            double gp = w * V[(h + 1) * c.S + sn];
            if (cnt[sn] > 0.0) gp += c.eta * cnt[sn] / std::max(p[sn], kProbabilityFloor);
            if (gp == 0.0) continue;
            const double* f = phi(s, a, sn);
            for (std::size_t j = 0; j < d; ++j) grad[h][j] += gp * f[j];
          }
        }
      }
      Eigen::Map<Eigen::VectorXd> g(grad[h].data(), static_cast<Eigen::Index>(d));
      const Eigen::VectorXd tangent = g - U_pinv * (U * g);
      g = tangent;
    }
    bool improved = false;
    for (int tries = 0; tries < 40 && !improved; ++tries) {
      auto cand = theta;
      for (std::size_t h = 0; h < c.H; ++h) {
        for (std::size_t j = 0; j < d; ++j) cand[h][j] += step * grad[h][j];
      }
      if (kernel_of(cand, cand_P)) {
        const double cand_obj = model_objective(c, cand_P);
        check_finite(cand_obj, "linear mixture ascent", 0, it);
        if (cand_obj > obj) {
          theta = std::move(cand);
          std::swap(P, cand_P);
          obj = cand_obj;
          step *= 1.5;
          improved = true;
          continue;
        }
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  LinearMixtureSolution sol;
  sol.value = model_value(c, P);
  sol.loss = model_loss(c, P);
  sol.objective = sol.value - c.eta * sol.loss;
  sol.theta = std::move(theta);
  return sol;
}

// ---- dispatch ------------------------------------------------------------------

namespace {

TransitionKernel random_kernel(const TransitionLedger& ledger, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TransitionKernel k(ledger.horizon(), ledger.num_states(), ledger.num_joint_actions());
  for (std::size_t r = 0; r < k.num_rows(); ++r) {
    auto row = k.row(r);
    double total = 0.0;
    for (double& x : row) {
      x = -std::log(1.0 - uniform01(rng));
      total += x;
    }
    for (double& x : row) x /= total;
  }
  return k;
}

std::vector<double> random_table(std::size_t size, double upper, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> f(size);
  for (double& x : f) x = upper * uniform01(rng);
  return f;
}

}  // namespace

PayoffSolution regularized_payoff(const HypothesisClass& hclass, const PayoffProblem& problem,
                                  const InnerSolveConfig& config, std::uint64_t seed,
                                  const PayoffReference& reference) {
  check_problem(problem);
  config.validate();
  PayoffSolution out;
  out.objective = -std::numeric_limits<double>::infinity();
  auto consider_q = [&](ModelFreeSolution&& s, std::size_t restart) {
    check_finite(s.objective, "regularized payoff", restart, 0);
    if (s.objective > out.objective) {
      out.objective = s.objective;
      out.value = s.value;
      out.loss = s.loss;
      out.restart = restart;
      out.q = std::move(s.f);
    }
  };
  auto consider_model = [&](ModelBasedSolution&& s, std::size_t restart) {
    check_finite(s.objective, "regularized payoff", restart, 0);
    if (s.objective > out.objective) {
      out.objective = s.objective;
      out.value = s.value;
      out.loss = s.loss;
      out.restart = restart;
      out.model = std::move(s.model);
    }
  };

  switch (hclass.kind) {
    case HypothesisKind::tabular_q: {
      const auto m = build_quadratic(problem);
      auto evaluate_table = [&](const QHypothesis& f) {
        return make_modelfree_solution(m, f.data());
      };
      if (config.method == InnerMethod::exact_tabular) {
        consider_q(exact_tabular_modelfree(problem, config), 0);
      } else if (config.method == InnerMethod::gradient_ascent) {
        consider_q(gradient_modelfree(problem, config), 0);
        for (std::size_t r = 1; r < config.restarts; ++r) {
          QHypothesis start(m.H, m.S, m.A, m.upper,
                            random_table(m.size(), m.upper, derive_seed(seed, r)));
          consider_q(gradient_modelfree(problem, config, std::move(start)), r);
        }
      } else {
        throw InputError("tabular Q class supports exact_tabular or gradient_ascent");
      }
      consider_q(make_modelfree_solution(m, fit_table(m)), config.restarts);
      if (reference.q) consider_q(evaluate_table(*reference.q), config.restarts + 1);
      break;
    }
    case HypothesisKind::linear_q: {
      auto s = linear_q_ascent(problem, hclass.q_features, config, reference.q);
      check_finite(s.objective, "regularized payoff", 0, 0);
      out.objective = s.objective;
      out.value = s.value;
      out.loss = s.loss;
      out.theta = std::move(s.theta);
      out.q = std::move(s.f);
      break;
    }
    case HypothesisKind::tabular_model: {
      auto solve = [&](const TransitionKernel& start) {
        if (config.method == InnerMethod::exact_tabular) {
          return block_ascent_modelbased(problem, config, start);
        }
        if (config.method == InnerMethod::mirror_ascent) {
          return mirror_ascent_modelbased(problem, config, start);
        }
        throw InputError("tabular model class supports exact_tabular or mirror_ascent");
      };
      const auto mle = problem.ledger.empirical_model();
      const auto c = make_context(problem);
      consider_model(make_model_solution(c, mle), config.restarts);
      consider_model(solve(mle), 0);
      for (std::size_t r = 1; r < config.restarts; ++r) {
        consider_model(solve(random_kernel(problem.ledger, derive_seed(seed, r))), r);
      }
      if (reference.model) {
        consider_model(make_model_solution(c, *reference.model), config.restarts + 1);
        consider_model(solve(*reference.model), config.restarts + 2);
      }
      break;
    }
    case HypothesisKind::linear_mixture: {
      if (!hclass.mixture) throw InputError("linear-mixture class needs a base model");
      auto s = linear_mixture_ascent(problem, *hclass.mixture, config);
      check_finite(s.objective, "regularized payoff", 0, 0);
      LinearMixtureModel fitted = *hclass.mixture;
      fitted.theta = s.theta;
      out.objective = s.objective;
      out.value = s.value;
      out.loss = s.loss;
      out.theta = std::move(s.theta);
      out.model = fitted.to_model().kernel();
      break;
    }
  }
  return out;
}

}  // namespace mamex
