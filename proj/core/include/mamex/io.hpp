#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mamex/game.hpp"
#include "mamex/hypothesis.hpp"
#include "mamex/mamex.hpp"
#include "mamex/normal_form.hpp"
#include "mamex/policy.hpp"

namespace mamex {

using Json = nlohmann::json;

// ---- games -------------------------------------------------------------------
//
// Game file keys: n_agents, horizon, states, actions (per-agent counts),
// transition [h][s][joint_a][s'], rewards [i][h][s][joint_a], rho,
// reward_cap, and optionally zero_sum_total.

Json game_to_json(const MarkovGame& game);
MarkovGame game_from_json(const Json& j);
/// Throws InputError naming the path when it cannot be read or parsed.
Json read_json_file(const std::filesystem::path& path);
MarkovGame load_game_file(const std::filesystem::path& path);

// ---- policy spaces -------------------------------------------------------------
//
// Spec: {"kind": "deterministic_enum"}, {"kind": "deterministic_sample",
// "size": N, "seed": s}, {"kind": "log_linear", "psi": [s][a][j], "eps": e},
// or a list with one such object per agent. An optional "cap" bounds the
// joint size.

PurePolicySpace policy_space_from_json(const Json& spec, const MarkovGame& game);

/// Saved mixed policy: the policy space as explicit per-(h, s) action
/// distributions plus the joint mass.
Json mixed_policy_to_json(const PurePolicySpace& space, const JointMixedPolicy& mixed);

struct SavedPolicy {
  PurePolicySpace space;
  JointMixedPolicy mixed;
};
SavedPolicy mixed_policy_from_json(const Json& j);

// ---- normal-form games -----------------------------------------------------------
//
// {"payoffs": [tensor per agent], "kind": "ne|cce|ce"}; each tensor is an
// n-dimensional nested array indexed by the agents' strategies in order.

struct NormalFormFile {
  NormalFormGame game;
  EquilibriumKind kind = EquilibriumKind::cce;
};
NormalFormFile normal_form_from_json(const Json& j);

// ---- experiments ------------------------------------------------------------------

struct Experiment {
  std::shared_ptr<const MarkovGame> game;
  std::shared_ptr<const PurePolicySpace> space;
  MamexConfig config;
  Json echo;  // the resolved configuration
};

/// Keys: game (path relative to `base_dir`, or a generator object),
/// policy_space, mamex {K, eta, target, mode, seed, ablation,
/// time_budget_s, hypothesis}, inner_solver {method, step, iters, restarts,
/// sweeps, tol}, eq {iters}.
Experiment experiment_from_json(const Json& j, const std::filesystem::path& base_dir,
                                std::optional<std::uint64_t> seed_override = std::nullopt);
Experiment load_experiment(const std::filesystem::path& path,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

// ---- files --------------------------------------------------------------------------

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

}  // namespace mamex
