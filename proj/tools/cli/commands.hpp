#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mamex/io.hpp"
#include "mamex/mamex.hpp"

namespace mamex::cli {

namespace fs = std::filesystem;

// ---- run ---------------------------------------------------------------------

/// record.csv text. Columns: k, target, gap_agent_0..gap_agent_{n-1},
/// aggregate_gap, cum_regret, train_err, pred_err, eq_cert_gap, ms.
std::string record_csv(const MamexResult& result, EquilibriumKind target, std::size_t agents);

struct BundleSummary {
  fs::path dir;
  std::string status;  // complete | aborted
  std::size_t episodes = 0;
  double final_cum_regret = 0.0;
  double output_gap = 0.0;
  std::string abort_reason;
};

/// Runs one experiment and writes record.csv, policy_out.json and
/// config_echo.json, then manifest.json last. A bundle without a manifest
/// (or with status "aborted") is not complete.
BundleSummary run_experiment(const Experiment& experiment, const fs::path& out_dir);

BundleSummary cmd_run(const fs::path& config, const fs::path& out_dir,
                      std::optional<std::uint64_t> seed_override);

// ---- sweep -------------------------------------------------------------------

enum class SweepAxis { K, eta, seed, target };
SweepAxis parse_sweep_axis(const std::string& text);
std::string to_string(SweepAxis axis);

struct SweepSpec {
  fs::path base_config;
  SweepAxis axis = SweepAxis::K;
  std::vector<std::string> values;
  fs::path out_dir;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed_override;

  void validate() const;
};

/// Copy of `config` with the axis key set to `value`.
Json apply_sweep_value(const Json& config, SweepAxis axis, const std::string& value);

/// One bundle per value under out_dir/<axis>_<value>, plus summary.csv with
/// columns run_id, axis, value, status, episodes, final_cum_regret,
/// output_gap. Runs are independent and execute on up to `jobs` threads.
std::vector<BundleSummary> cmd_sweep(const SweepSpec& spec);

// ---- eqsolve / eval ------------------------------------------------------------

struct EqSolveOptions {
  fs::path game;
  std::optional<EquilibriumKind> kind;  // overrides the file's kind
  std::optional<std::size_t> iters;
  std::uint64_t seed = 0;
  std::optional<NeMode> ne_mode;
};

/// Solves and certifies a normal-form game. The JSON result holds kind,
/// method, iterations, layout, mass, marginals, per-agent gaps and max_gap.
Json cmd_eqsolve(const EqSolveOptions& options);

/// Per-agent CSV rows agent, cce_gap, ce_gap, value for a saved mixed policy.
std::string cmd_eval(const MarkovGame& game, const SavedPolicy& policy);

/// Loads a game from a game file or from an experiment config.
MarkovGame load_game_or_experiment(const fs::path& path);

// ---- report --------------------------------------------------------------------

struct CurvePoint {
  double k = 0.0;
  double cum_regret = 0.0;
};

/// Least-squares slope of log(cum_regret) on log(k) over points with
/// positive values. NaN with fewer than two usable points.
double loglog_slope(const std::vector<CurvePoint>& curve);

struct ReportSummary {
  std::vector<std::string> run_ids;
  std::vector<double> run_slopes;
  std::vector<std::string> run_groups;
  std::vector<std::string> groups;
  std::vector<double> group_slopes;
};

/// Reads bundles and writes curves.csv (run_id, k, cum_regret, avg_regret),
/// slopes.csv (run_id, group, slope, points), group_slopes.csv (group, runs,
/// slope, points) and final_slopes.csv (family, k_values, runs, slope).
/// Runs form a group when their config echoes agree after dropping the
/// seed; groups form a family when they also agree after dropping K.
ReportSummary cmd_report(const std::vector<fs::path>& bundles, const fs::path& out_dir);

/// Maps exceptions to exit codes (InputError 2, anything else 1) and prints
/// "error: <message>" to `err`.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace mamex::cli
