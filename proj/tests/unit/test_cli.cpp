#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"

namespace mamex {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mamex_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Drops the trailing ms cell of every line.
std::string without_ms(const std::string& csv) {
  std::string out;
  for (const auto& l : lines_of(csv)) out += l.substr(0, l.rfind(',')) + "\n";
  return out;
}

fs::path small_config(const fs::path& dir) {
  const auto path = dir / "config.json";
  std::ofstream(path) << R"({
    "game": {"generator": "random_tabular", "states": 2, "horizon": 2, "actions": [2, 2], "seed": 3},
    "policy_space": {"kind": "deterministic_sample", "size": 3, "seed": 1},
    "mamex": {"K": 16, "target": "cce", "mode": "model_based", "seed": 1},
    "eq": {"iters": 2000}
  })";
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MAMEX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliRun, BundleHasOneRowPerEpisodeAndIsReproducible) {
  const auto dir = scratch("run");
  const auto cfg = small_config(dir);
  const auto a = cli::cmd_run(cfg, dir / "a", std::nullopt);
  const auto b = cli::cmd_run(cfg, dir / "b", std::nullopt);
  EXPECT_EQ(a.status, "complete");
  EXPECT_EQ(a.episodes, 16u);
  const auto rec = slurp(dir / "a" / "record.csv");
  const auto rows = lines_of(rec);
  ASSERT_EQ(rows.size(), 17u);
  EXPECT_EQ(rows[0],
            "k,target,gap_agent_0,gap_agent_1,aggregate_gap,cum_regret,train_err,pred_err,"
            "eq_cert_gap,ms");
  EXPECT_EQ(without_ms(rec), without_ms(slurp(dir / "b" / "record.csv")));
  EXPECT_EQ(slurp(dir / "a" / "policy_out.json"), slurp(dir / "b" / "policy_out.json"));
  for (const char* f : {"manifest.json", "config_echo.json"}) EXPECT_TRUE(fs::exists(dir / "a" / f));
  const auto manifest = Json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["status"], "complete");
  EXPECT_EQ(manifest["episodes"], 16);
}

TEST(CliRun, BinaryExitCodes) {
  const auto dir = scratch("exit");
  EXPECT_EQ(run_cli("run --config " + (dir / "nope.json").string() + " --out " +
                    (dir / "o").string()),
            2);
  std::ofstream(dir / "badgame.json")
      << R"({"game": "no_such_game.json", "policy_space": {"kind": "deterministic_enum"},
             "mamex": {"K": 16}})";
  EXPECT_EQ(run_cli("run --config " + (dir / "badgame.json").string() + " --out " +
                    (dir / "o").string()),
            2);
  EXPECT_EQ(run_cli("run --config " + small_config(dir).string()), 2);  // --out missing
  EXPECT_EQ(run_cli("run --config " + small_config(dir).string() + " --out " +
                    (dir / "ok").string()),
            0);
}

TEST(CliSweep, WritesOneBundlePerValueAndSummary) {
  const auto dir = scratch("sweep");
  cli::SweepSpec spec;
  spec.base_config = small_config(dir);
  spec.axis = cli::SweepAxis::seed;
  spec.values = {"1", "2"};
  spec.out_dir = dir / "out";
  spec.jobs = 2;
  const auto res = cli::cmd_sweep(spec);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "out" / "seed_1" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "seed_2" / "manifest.json"));
  const auto rows = lines_of(slurp(dir / "out" / "summary.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "run_id,axis,value,status,episodes,final_cum_regret,output_gap");
  spec.values = {"1", "1"};
  EXPECT_THROW(spec.validate(), InputError);
  spec.values = {"3"};
  spec.seed_override = 4;
  EXPECT_THROW(spec.validate(), InputError);
}

TEST(CliSweep, AxisValuesRewriteTheConfig) {
  const Json base = Json::parse(R"({"mamex": {"K": 16}})");
  EXPECT_EQ(cli::apply_sweep_value(base, cli::SweepAxis::K, "64")["mamex"]["K"], 64);
  EXPECT_EQ(cli::apply_sweep_value(base, cli::SweepAxis::target, "ce")["mamex"]["target"], "ce");
  EXPECT_THROW(cli::apply_sweep_value(base, cli::SweepAxis::K, "many"), InputError);
  EXPECT_THROW(cli::parse_sweep_axis("gamma"), InputError);
}

// A synthetic bundle whose cumulative regret follows c * k^p.
void fake_bundle(const fs::path& dir, double c, double p, std::size_t K, std::uint64_t seed) {
  fs::create_directories(dir);
  std::ofstream rec(dir / "record.csv");
  rec << "k,cum_regret\n";
  for (std::size_t k = 1; k <= K; ++k) rec << k << "," << c * std::pow(double(k), p) << "\n";
  Json echo = {{"mamex", {{"K", K}, {"seed", seed}}}, {"resolved", {{"eta", 0.5}}}};
  std::ofstream(dir / "config_echo.json") << echo.dump();
}

TEST(CliReport, SlopesAndAverageRegret) {
  const auto dir = scratch("report");
  fake_bundle(dir / "r1", 1.0, 0.5, 256, 1);
  fake_bundle(dir / "r2", 2.0, 0.7, 256, 2);
  const auto summary = cli::cmd_report({dir / "r1", dir / "r2"}, dir / "out");
  ASSERT_EQ(summary.run_slopes.size(), 2u);
  EXPECT_NEAR(summary.run_slopes[0], 0.5, 0.01);
  EXPECT_NEAR(summary.run_slopes[1], 0.7, 0.01);
  ASSERT_EQ(summary.group_slopes.size(), 1u);  // differ only in seed
  EXPECT_GE(summary.group_slopes[0], 0.5 - 1e-9);
  EXPECT_LE(summary.group_slopes[0], 0.7 + 1e-9);

  const auto rows = lines_of(slurp(dir / "out" / "curves.csv"));
  EXPECT_EQ(rows[0], "run_id,k,cum_regret,avg_regret");
  ASSERT_EQ(rows.size(), 1u + 2u * 256u);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::istringstream in(rows[r]);
    std::string id, k, cum, avg;
    std::getline(in, id, ',');
    std::getline(in, k, ',');
    std::getline(in, cum, ',');
    std::getline(in, avg, ',');
    EXPECT_NEAR(std::stod(avg), std::stod(cum) / std::stod(k), 1e-12);
  }
  for (const char* f : {"slopes.csv", "group_slopes.csv", "final_slopes.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f));
  }
}

TEST(CliReport, FamilySlopeAcrossK) {
  const auto dir = scratch("family");
  std::vector<fs::path> bundles;
  for (std::size_t K : {64, 256, 1024}) {
    bundles.push_back(dir / ("K" + std::to_string(K)));
    fake_bundle(bundles.back(), 1.0, 0.5, K, 1);
  }
  cli::cmd_report(bundles, dir / "out");
  const auto rows = lines_of(slurp(dir / "out" / "final_slopes.csv"));
  ASSERT_EQ(rows.size(), 2u);
  const double slope = std::stod(rows[1].substr(rows[1].rfind(',') + 1));
  EXPECT_NEAR(slope, 0.5, 1e-9);
}

TEST(CliReport, LoglogSlopeEdgeCases) {
  EXPECT_TRUE(std::isnan(cli::loglog_slope({{1.0, 1.0}})));
  EXPECT_TRUE(std::isnan(cli::loglog_slope({{1.0, 0.0}, {2.0, 0.0}})));
  EXPECT_NEAR(cli::loglog_slope({{1.0, 3.0}, {4.0, 6.0}}), 0.5, 1e-12);
  EXPECT_THROW(cli::cmd_report({}, "/tmp/x"), InputError);
}

TEST(CliEqsolve, MatchingPenniesFromConfigDir) {
  cli::EqSolveOptions o;
  o.game = fs::path(MAMEX_CONFIG_DIR) / "matching_pennies.json";
  const auto j = cli::cmd_eqsolve(o);
  EXPECT_EQ(j["kind"], "ne");
  EXPECT_LE(j["max_gap"].get<double>(), 1e-8);
}

}  // namespace
}  // namespace mamex
