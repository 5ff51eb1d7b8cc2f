#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace mamex;
using namespace mamex::cli;

void emit(const std::string& text, const std::optional<std::string>& out) {
  if (out) {
    write_file_atomic(*out, text);
  } else {
    std::cout << text;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mamex: equilibrium learning in episodic Markov games"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed_override;

  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write a results bundle");
  run_cmd->add_option("--config", config, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", out, "Bundle directory")->required();
  run_cmd->add_option("--seed-override", seed_override, "Replace mamex.seed");

  std::string axis;
  std::vector<std::string> values;
  unsigned jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one bundle per value of an axis");
  sweep_cmd->add_option("--config", config, "Base experiment config (JSON)")->required();
  sweep_cmd->add_option("--out", out, "Output directory")->required();
  sweep_cmd->add_option("--axis", axis, "K | eta | seed | target")->required();
  sweep_cmd->add_option("--values", values, "Axis values")->required()->delimiter(',');
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs")->default_val(1);
  sweep_cmd->add_option("--seed-override", seed_override, "Replace mamex.seed in every run");

  std::string game_path, kind_text, ne_mode_text;
  std::optional<std::string> out_file;
  std::optional<std::size_t> iters;
  std::uint64_t eq_seed = 0;
  auto* eq_cmd = app.add_subcommand("eqsolve", "Solve and certify a normal-form game");
  eq_cmd->add_option("--game", game_path, "Normal-form game (JSON)")->required();
  eq_cmd->add_option("--kind", kind_text, "ne | cce | ce (overrides the file)");
  eq_cmd->add_option("--iters", iters, "Learning rounds");
  eq_cmd->add_option("--seed", eq_seed, "Seed");
  eq_cmd->add_option("--ne-mode", ne_mode_text, "zero_sum_selfplay | bimatrix_support_enum");
  eq_cmd->add_option("--out", out_file, "Write the result here instead of stdout");

  std::string policy_path;
  auto* eval_cmd = app.add_subcommand("eval", "Exact gaps of a saved mixed policy");
  eval_cmd->add_option("--game", game_path, "Game file or experiment config")->required();
  eval_cmd->add_option("--policy", policy_path, "Saved policy (policy_out.json)")->required();
  eval_cmd->add_option("--out", out_file, "Write the CSV here instead of stdout");

  std::vector<std::string> bundles;
  auto* report_cmd = app.add_subcommand("report", "Aggregate bundles into plot-ready CSV");
  report_cmd->add_option("bundles", bundles, "Bundle directories")->required();
  report_cmd->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run_cmd) {
      const auto s = cmd_run(config, out, seed_override);
      std::cout << s.status << ' ' << s.dir.string() << " episodes=" << s.episodes
                << " cum_regret=" << format_double(s.final_cum_regret)
                << " output_gap=" << format_double(s.output_gap) << '\n';
      if (s.status != "complete") {
        std::cerr << "error: " << s.abort_reason << '\n';
        return 1;
      }
    } else if (*sweep_cmd) {
      SweepSpec spec;
      spec.base_config = config;
      spec.axis = parse_sweep_axis(axis);
      spec.values = values;
      spec.out_dir = out;
      spec.jobs = jobs;
      spec.seed_override = seed_override;
      const auto results = cmd_sweep(spec);
      int code = 0;
      for (const auto& r : results) {
        std::cout << r.status << ' ' << r.dir.string() << '\n';
        if (r.status != "complete") {
          std::cerr << "error: " << r.dir.string() << ": " << r.abort_reason << '\n';
          code = 1;
        }
      }
      return code;
    } else if (*eq_cmd) {
      EqSolveOptions o;
      o.game = game_path;
      if (!kind_text.empty()) o.kind = parse_equilibrium_kind(kind_text);
      if (!ne_mode_text.empty()) o.ne_mode = parse_ne_mode(ne_mode_text);
      o.iters = iters;
      o.seed = eq_seed;
      emit(cmd_eqsolve(o).dump(2) + "\n", out_file);
    } else if (*eval_cmd) {
      const auto game = load_game_or_experiment(game_path);
      const auto policy = mixed_policy_from_json(read_json_file(policy_path));
      emit(cmd_eval(game, policy), out_file);
    } else if (*report_cmd) {
      std::vector<fs::path> dirs(bundles.begin(), bundles.end());
      const auto summary = cmd_report(dirs, out);
      for (std::size_t r = 0; r < summary.run_ids.size(); ++r) {
        std::cout << summary.run_ids[r] << ' ' << summary.run_groups[r]
                  << " slope=" << format_double(summary.run_slopes[r]) << '\n';
      }
    }
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
  return 0;
}
