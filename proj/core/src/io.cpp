#include "mamex/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mamex/generators.hpp"

namespace mamex {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw InputError(where + ": " + what);
}

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where, std::string("missing key '") + key + "'");
  return j.at(key);
}

std::size_t get_count(const Json& j, const char* key, const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    bad(where, std::string("'") + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double get_number(const Json& v, const std::string& where) {
  if (!v.is_number()) bad(where, "expected a number");
  return v.get<double>();
}

std::vector<std::size_t> get_counts(const Json& v, const std::string& where) {
  if (!v.is_array()) bad(where, "expected an array of counts");
  std::vector<std::size_t> out;
  for (const auto& x : v) {
    if (!x.is_number_integer() || x.get<long long>() < 1) bad(where, "counts must be positive integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

// Flattens a nested numeric array, checking its shape against `dims`.
void flatten(const Json& v, std::span<const std::size_t> dims, std::vector<double>& out,
             const std::string& where) {
  if (dims.empty()) {
    out.push_back(get_number(v, where));
    return;
  }
  if (!v.is_array() || v.size() != dims[0]) {
    bad(where, "expected an array of length " + std::to_string(dims[0]));
  }
  for (std::size_t k = 0; k < dims[0]; ++k) {
    flatten(v[k], dims.subspan(1), out, where + "[" + std::to_string(k) + "]");
  }
}

Json nest(std::span<const double> flat, std::span<const std::size_t> dims) {
  if (dims.size() == 1) return Json(std::vector<double>(flat.begin(), flat.end()));
  Json arr = Json::array();
  const std::size_t stride = flat.size() / dims[0];
  for (std::size_t k = 0; k < dims[0]; ++k) {
    arr.push_back(nest(flat.subspan(k * stride, stride), dims.subspan(1)));
  }
  return arr;
}

std::uint64_t get_seed(const Json& j, const std::string& where, std::uint64_t fallback = 0) {
  if (!j.contains("seed")) return fallback;
  const auto& v = j.at("seed");
  if (!v.is_number_integer()) bad(where, "'seed' must be an integer");
  return v.get<std::uint64_t>();
}

}  // namespace

Json game_to_json(const MarkovGame& game) {
  const std::size_t n = game.num_agents();
  const std::size_t H = game.horizon();
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_joint_actions();
  Json j;
  j["n_agents"] = n;
  j["horizon"] = H;
  j["states"] = S;
  j["actions"] = game.action_layout().sizes();
  const std::vector<std::size_t> pdims{H, S, A, S};
  j["transition"] = nest(game.transition().data(), pdims);
  const std::vector<std::size_t> rdims{n, H, S, A};
  j["rewards"] = nest(game.rewards().data(), rdims);
  j["rho"] = std::vector<double>(game.rho().begin(), game.rho().end());
  j["reward_cap"] = game.reward_cap();
  if (game.zero_sum_total()) j["zero_sum_total"] = *game.zero_sum_total();
  return j;
}

static MarkovGame game_from_json_impl(const Json& j) {
  const std::string where = "game";
  const std::size_t n = get_count(j, "n_agents", where);
  const std::size_t H = get_count(j, "horizon", where);
  const std::size_t S = get_count(j, "states", where);
  const auto actions = get_counts(require(j, "actions", where), where + ".actions");
  if (actions.size() != n) bad(where, "'actions' must list one count per agent");
  const MixedRadix layout(actions, kDefaultJointCap);
  const std::size_t A = layout.size();
  std::vector<double> probs;
  probs.reserve(H * S * A * S);
  const std::vector<std::size_t> pdims{H, S, A, S};
  flatten(require(j, "transition", where), pdims, probs, "transition");
  std::vector<double> rewards;
  const std::vector<std::size_t> rdims{n, H, S, A};
  flatten(require(j, "rewards", where), rdims, rewards, "rewards");
  std::vector<double> rho;
  const std::vector<std::size_t> sdims{S};
  flatten(require(j, "rho", where), sdims, rho, "rho");
  const double cap = get_number(require(j, "reward_cap", where), "reward_cap");
  std::optional<double> zs;
  if (j.contains("zero_sum_total")) zs = get_number(j.at("zero_sum_total"), "zero_sum_total");
  return MarkovGame(actions, S, TransitionKernel(H, S, A, std::move(probs)),
                    RewardTable(n, H, S, A, std::move(rewards)), std::move(rho), cap, zs);
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError("cannot parse JSON in '" + path.string() + "': " + e.what());
  }
}

MarkovGame load_game_file(const fs::path& path) {
  const auto j = read_json_file(path);
  try {
    return game_from_json(j);
  } catch (const InputError& e) {
    throw InputError("invalid game file '" + path.string() + "': " + e.what());
  }
}

// ---- policy spaces -------------------------------------------------------------

namespace {

// Sampled subsets draw from derive_seed(seed, agent) so agents with equal
// action counts still get independent subsets.
std::vector<PurePolicy> agent_policies(const Json& spec, const MarkovGame& game,
                                       std::size_t agent, std::size_t cap) {
  const std::string where = "policy_space[" + std::to_string(agent) + "]";
  const auto& kind_v = require(spec, "kind", where);
  if (!kind_v.is_string()) bad(where, "'kind' must be a string");
  const auto kind = kind_v.get<std::string>();
  if (kind == "deterministic_enum") {
    EnumerateOptions o;
    o.cap = cap;
    return enumerate_deterministic(game, agent, o);
  }
  if (kind == "deterministic_sample") {
    EnumerateOptions o;
    o.cap = cap;
    o.subsample = get_count(spec, "size", where);
    o.seed = derive_seed(get_seed(spec, where), agent);
    return enumerate_deterministic(game, agent, o);
  }
  if (kind == "log_linear") {
    const auto& psi = require(spec, "psi", where);
    if (!psi.is_array() || psi.size() != game.num_states() || psi.empty() || !psi[0].is_array() ||
        psi[0].empty() || !psi[0][0].is_array()) {
      bad(where, "'psi' must be an [s][a][j] array");
    }
    LogLinearFeatures f;
    f.states = game.num_states();
    f.actions = game.action_layout().size_of(agent);
    f.dim = psi[0][0].size();
    const std::vector<std::size_t> dims{f.states, f.actions, f.dim};
    flatten(psi, dims, f.psi, where + ".psi");
    const double eps = get_number(require(spec, "eps", where), where + ".eps");
    return log_linear_cover(f, game.horizon(), eps, cap);
  }
  bad(where, "unknown kind '" + kind + "' (expected deterministic_enum|deterministic_sample|log_linear)");
}

}  // namespace

static PurePolicySpace policy_space_from_json_impl(const Json& spec, const MarkovGame& game) {
  std::size_t cap = kDefaultJointCap;
  std::vector<std::vector<PurePolicy>> per_agent;
  if (spec.is_array()) {
    if (spec.size() != game.num_agents()) bad("policy_space", "need one entry per agent");
    for (std::size_t i = 0; i < spec.size(); ++i) {
      per_agent.push_back(agent_policies(spec[i], game, i, cap));
    }
  } else {
    if (spec.is_object() && spec.contains("cap")) cap = get_count(spec, "cap", "policy_space");
    for (std::size_t i = 0; i < game.num_agents(); ++i) {
      per_agent.push_back(agent_policies(spec, game, i, cap));
    }
  }
  PurePolicySpace space(std::move(per_agent), cap);
  space.check_compatible(game);
  return space;
}

Json mixed_policy_to_json(const PurePolicySpace& space, const JointMixedPolicy& mixed) {
  Json j;
  j["layout"] = space.layout().sizes();
  j["mass"] = std::vector<double>(mixed.mass().begin(), mixed.mass().end());
  j["is_product"] = mixed.is_product();
  Json agents = Json::array();
  for (std::size_t i = 0; i < space.num_agents(); ++i) {
    Json list = Json::array();
    for (const auto& p : space.policies(i)) {
      Json pj;
      pj["horizon"] = p.horizon();
      pj["states"] = p.num_states();
      pj["actions"] = p.num_actions();
      pj["kind"] = p.is_deterministic() ? "deterministic" : "parametric";
      const std::vector<std::size_t> dims{p.horizon(), p.num_states(), p.num_actions()};
      pj["probs"] = nest(p.probs(), dims);
      if (!p.parameters().empty()) pj["parameters"] = p.parameters();
      list.push_back(std::move(pj));
    }
    agents.push_back(std::move(list));
  }
  j["policies"] = std::move(agents);
  return j;
}

static SavedPolicy mixed_policy_from_json_impl(const Json& j) {
  const std::string where = "policy file";
  const auto& agents = require(j, "policies", where);
  if (!agents.is_array() || agents.empty()) bad(where, "'policies' must be a nonempty array");
  std::vector<std::vector<PurePolicy>> per_agent;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    std::vector<PurePolicy> list;
    for (const auto& pj : agents[i]) {
      const std::size_t H = get_count(pj, "horizon", where);
      const std::size_t S = get_count(pj, "states", where);
      const std::size_t A = get_count(pj, "actions", where);
      std::vector<double> probs;
      const std::vector<std::size_t> dims{H, S, A};
      flatten(require(pj, "probs", where), dims, probs, where + ".probs");
      std::vector<double> params;
      if (pj.contains("parameters")) params = pj.at("parameters").get<std::vector<double>>();
      const bool det = pj.value("kind", std::string("deterministic")) == "deterministic";
      if (det) {
        std::vector<std::size_t> acts(H * S);
        for (std::size_t hs = 0; hs < H * S; ++hs) {
          const std::span<const double> row(probs.data() + hs * A, A);
          acts[hs] = argmax_lowest(row);
          if (row[acts[hs]] != 1.0) bad(where, "deterministic policy with a non-point-mass row");
        }
        list.push_back(PurePolicy::deterministic(H, S, A, acts));
      } else {
        list.push_back(PurePolicy::stochastic(H, S, A, std::move(probs), std::move(params)));
      }
    }
    per_agent.push_back(std::move(list));
  }
  PurePolicySpace space(std::move(per_agent));
  std::vector<double> mass;
  const std::vector<std::size_t> dims{space.joint_size()};
  flatten(require(j, "mass", where), dims, mass, where + ".mass");
  auto mixed = JointMixedPolicy::from_mass(space.layout(), std::move(mass));
  return SavedPolicy{std::move(space), std::move(mixed)};
}

// ---- normal-form games ---------------------------------------------------------

static NormalFormFile normal_form_from_json_impl(const Json& j) {
  const std::string where = "normal-form game";
  const auto& payoffs = require(j, "payoffs", where);
  if (!payoffs.is_array() || payoffs.empty()) bad(where, "'payoffs' must be a nonempty array");
  const std::size_t n = payoffs.size();
  std::vector<std::size_t> dims;
  const Json* cur = &payoffs[0];
  for (std::size_t d = 0; d < n; ++d) {
    if (!cur->is_array() || cur->empty()) bad(where, "each payoff tensor must have one axis per agent");
    dims.push_back(cur->size());
    cur = &(*cur)[0];
  }
  std::vector<std::vector<double>> tensors(n);
  for (std::size_t i = 0; i < n; ++i) {
    flatten(payoffs[i], dims, tensors[i], "payoffs[" + std::to_string(i) + "]");
  }
  NormalFormFile out{NormalFormGame(MixedRadix(dims, kDefaultJointCap), std::move(tensors)),
                     EquilibriumKind::cce};
  if (j.contains("kind")) out.kind = parse_equilibrium_kind(j.at("kind").get<std::string>());
  return out;
}

// ---- experiments ------------------------------------------------------------------

namespace {

struct BuiltGame {
  std::shared_ptr<const MarkovGame> game;
  std::shared_ptr<const LinearMixtureModel> mixture;
};

BuiltGame build_game(const Json& spec, const fs::path& base_dir) {
  if (spec.is_string()) {
    fs::path p = spec.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) throw InputError("game file not found: '" + p.string() + "'");
    return {std::make_shared<const MarkovGame>(load_game_file(p)), nullptr};
  }
  const std::string where = "game";
  const auto& gen_v = require(spec, "generator", where);
  if (!gen_v.is_string()) bad(where, "'generator' must be a string");
  const auto gen = gen_v.get<std::string>();
  const std::uint64_t seed = get_seed(spec, where);
  if (gen == "random_tabular") {
    const double scale = spec.contains("reward_scale")
                             ? get_number(spec.at("reward_scale"), "game.reward_scale")
                             : 1.0;
    return {std::make_shared<const MarkovGame>(make_random_tabular(
                get_count(spec, "states", where), get_count(spec, "horizon", where),
                get_counts(require(spec, "actions", where), "game.actions"), scale, seed)),
            nullptr};
  }
  if (gen == "lock") {
    const double bonus =
        spec.contains("bonus") ? get_number(spec.at("bonus"), "game.bonus") : 0.05;
    auto lock = make_lock_game(get_count(spec, "horizon", where),
                               get_counts(require(spec, "actions", where), "game.actions"),
                               seed, bonus);
    return {std::make_shared<const MarkovGame>(std::move(lock.game)), nullptr};
  }
  if (gen == "linear_mixture") {
    auto lm = make_linear_mixture(get_count(spec, "dim", where), get_count(spec, "states", where),
                                  get_count(spec, "horizon", where),
                                  get_counts(require(spec, "actions", where), "game.actions"),
                                  seed);
    auto model = std::make_shared<LinearMixtureModel>();
    model->states = lm.game.num_states();
    model->actions = lm.game.num_joint_actions();
    model->dim = lm.dim;
    model->features = lm.features;
    // Uniform weights are feasible because every basis kernel is a distribution.
    model->theta.assign(lm.game.horizon(),
                        std::vector<double>(lm.dim, 1.0 / static_cast<double>(lm.dim)));
    return {std::make_shared<const MarkovGame>(std::move(lm.game)), std::move(model)};
  }
  if (gen == "zero_sum_linear") {
    const auto actions = get_counts(require(spec, "actions", where), "game.actions");
    if (actions.size() != 2) bad(where, "zero_sum_linear needs two action counts");
    auto zs = make_zero_sum_linear(get_count(spec, "dim", where), get_count(spec, "states", where),
                                   get_count(spec, "horizon", where), actions[0], actions[1],
                                   seed);
    return {std::make_shared<const MarkovGame>(std::move(zs.game)), nullptr};
  }
  if (gen == "matrix") {
    const auto actions = get_counts(require(spec, "actions", where), "game.actions");
    const auto& pay = require(spec, "payoffs", where);
    std::vector<std::vector<double>> payoffs;
    for (const auto& p : pay) payoffs.push_back(p.get<std::vector<double>>());
    return {std::make_shared<const MarkovGame>(make_matrix_game(actions, payoffs)), nullptr};
  }
  bad(where, "unknown generator '" + gen +
                 "' (expected random_tabular|lock|linear_mixture|zero_sum_linear|matrix)");
}

}  // namespace

static Experiment experiment_from_json_impl(const Json& j, const fs::path& base_dir,
                                           std::optional<std::uint64_t> seed_override) {
  if (!j.is_object()) throw InputError("experiment config must be a JSON object");
  Json echo = j;
  const auto built = build_game(require(j, "game", "config"), base_dir);
  const Json space_spec = j.value("policy_space", Json{{"kind", "deterministic_enum"}});
  auto space =
      std::make_shared<const PurePolicySpace>(policy_space_from_json_impl(space_spec, *built.game));

  MamexConfig cfg;
  const Json m = j.value("mamex", Json::object());
  const std::string mw = "mamex";
  if (m.contains("K")) cfg.K = get_count(m, "K", mw);
  if (m.contains("eta") && !m.at("eta").is_null()) cfg.eta = get_number(m.at("eta"), "mamex.eta");
  if (m.contains("target")) cfg.target = parse_equilibrium_kind(m.at("target").get<std::string>());
  if (m.contains("mode")) cfg.mode = parse_mamex_mode(m.at("mode").get<std::string>());
  cfg.seed = get_seed(m, mw);
  if (seed_override) {
    cfg.seed = *seed_override;
    echo["mamex"]["seed"] = *seed_override;
  }
  cfg.ablation = m.value("ablation", false);
  if (m.contains("time_budget_s")) {
    cfg.episode_time_budget_s = get_number(m.at("time_budget_s"), "mamex.time_budget_s");
  }
  if (m.contains("threads")) cfg.threads = static_cast<unsigned>(get_count(m, "threads", mw));
  const std::string hyp = m.value("hypothesis", std::string("tabular"));
  if (hyp == "linear_mixture") {
    if (!built.mixture) bad(mw, "hypothesis 'linear_mixture' needs the linear_mixture generator");
    HypothesisClass hc;
    hc.kind = HypothesisKind::linear_mixture;
    hc.mixture = built.mixture;
    cfg.hypothesis = hc;
  } else if (hyp != "tabular") {
    bad(mw, "unknown hypothesis '" + hyp + "' (expected tabular|linear_mixture)");
  }

  const Json in = j.value("inner_solver", Json::object());
  const std::string iw = "inner_solver";
  if (in.contains("method")) cfg.inner.method = parse_inner_method(in.at("method").get<std::string>());
  if (in.contains("step")) cfg.inner.step = get_number(in.at("step"), "inner_solver.step");
  if (in.contains("iters")) cfg.inner.iters = get_count(in, "iters", iw);
  if (in.contains("restarts")) cfg.inner.restarts = get_count(in, "restarts", iw);
  if (in.contains("sweeps")) cfg.inner.sweeps = get_count(in, "sweeps", iw);
  if (in.contains("tol")) cfg.inner.tol = get_number(in.at("tol"), "inner_solver.tol");

  const Json eq = j.value("eq", Json::object());
  if (eq.contains("iters") && !eq.at("iters").is_null()) cfg.eq_iters = get_count(eq, "iters", "eq");
  cfg.validate();

  echo["resolved"] = {{"eta", cfg.resolved_eta()},
                      {"eq_iters", cfg.resolved_eq_iters(space->joint_size())},
                      {"joint_size", space->joint_size()},
                      {"inner_method", to_string(cfg.inner.method)}};
  return Experiment{built.game, std::move(space), cfg, std::move(echo)};
}

Experiment load_experiment(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  if (!fs::exists(path)) throw InputError("config file not found: '" + path.string() + "'");
  const auto j = read_json_file(path);
  return experiment_from_json(j, path.parent_path(), seed_override);
}

// ---- files --------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ComputeError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ComputeError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw ComputeError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::string format_double(double x) {
  if (x == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// ---- exception boundary ---------------------------------------------------------
//
// JSON type errors (a string where a number belongs, ...) are input errors.

namespace {

template <class F>
auto as_input_error(const char* what, F&& body) {
  try {
    return body();
  } catch (const Json::exception& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

MarkovGame game_from_json(const Json& j) {
  return as_input_error("game", [&] { return game_from_json_impl(j); });
}

PurePolicySpace policy_space_from_json(const Json& spec, const MarkovGame& game) {
  return as_input_error("policy_space", [&] { return policy_space_from_json_impl(spec, game); });
}

SavedPolicy mixed_policy_from_json(const Json& j) {
  return as_input_error("policy file", [&] { return mixed_policy_from_json_impl(j); });
}

NormalFormFile normal_form_from_json(const Json& j) {
  return as_input_error("normal-form game", [&] { return normal_form_from_json_impl(j); });
}

Experiment experiment_from_json(const Json& j, const fs::path& base_dir,
                                std::optional<std::uint64_t> seed_override) {
  return as_input_error("config",
                        [&] { return experiment_from_json_impl(j, base_dir, seed_override); });
}

}  // namespace mamex
