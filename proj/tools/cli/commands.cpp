#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "mamex/generators.hpp"

namespace mamex::cli {

namespace {

std::string fmt(double x) { return format_double(x); }

std::string fmt_ms(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", ms);
  return buf;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw InputError(where + ": '" + text + "' is not a number");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& where) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw InputError(where + ": '" + text + "' is not a nonnegative integer");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

Json gaps_json(const GapReport& report, EquilibriumKind kind) {
  Json gaps = Json::array();
  for (std::size_t i = 0; i < report.agents.size(); ++i) gaps.push_back(report.gap(i, kind));
  return gaps;
}

}  // namespace

// ---- run ---------------------------------------------------------------------

std::string record_csv(const MamexResult& result, EquilibriumKind target, std::size_t agents) {
  std::ostringstream out;
  out << "k,target";
  for (std::size_t i = 0; i < agents; ++i) out << ",gap_agent_" << i;
  out << ",aggregate_gap,cum_regret,train_err,pred_err,eq_cert_gap,ms\n";
  const std::string kind = to_string(target);
  for (const auto& rec : result.records) {
    out << rec.k << ',' << kind;
    for (double g : rec.gaps) out << ',' << fmt(g);
    out << ',' << fmt(rec.aggregate_gap) << ',' << fmt(rec.cum_regret) << ','
        << fmt(rec.train_err_total()) << ',' << fmt(rec.pred_err_total()) << ','
        << fmt(rec.eq_cert_gap) << ',' << fmt_ms(rec.ms) << '\n';
  }
  return out.str();
}

BundleSummary run_experiment(const Experiment& experiment, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  // A stale manifest would make a half-written rerun look complete.
  fs::remove(out_dir / "manifest.json");

  const auto& cfg = experiment.config;
  const auto result = run(*experiment.game, *experiment.space, cfg);
  const std::size_t n = experiment.game->num_agents();

  write_file_atomic(out_dir / "record.csv", record_csv(result, cfg.target, n));

  Json policy = mixed_policy_to_json(*experiment.space, result.output);
  policy["kind"] = to_string(result.output_kind);
  policy["gaps"] = gaps_json(result.output_gaps, result.output_kind);
  policy["aggregate_gap"] = result.output_gaps.aggregate(result.output_kind);
  write_file_atomic(out_dir / "policy_out.json", policy.dump(2) + "\n");
  write_file_atomic(out_dir / "config_echo.json", experiment.echo.dump(2) + "\n");

  BundleSummary summary;
  summary.dir = out_dir;
  summary.status = result.aborted ? "aborted" : "complete";
  summary.episodes = result.records.size();
  summary.final_cum_regret = result.records.empty() ? 0.0 : result.records.back().cum_regret;
  summary.output_gap = result.output_gaps.aggregate(result.output_kind);
  summary.abort_reason = result.abort_reason;

  const auto madc = madc_diagnostic(result.records, *experiment.game);
  Json manifest;
  manifest["status"] = summary.status;
  manifest["episodes"] = summary.episodes;
  manifest["K"] = cfg.K;
  manifest["target"] = to_string(cfg.target);
  manifest["output_kind"] = to_string(result.output_kind);
  manifest["eta"] = result.eta;
  manifest["eq_iters"] = result.eq_iters;
  manifest["final_cum_regret"] = summary.final_cum_regret;
  manifest["output_gap"] = summary.output_gap;
  manifest["madc_d_hat"] = madc.d_max;
  manifest["files"] = {"record.csv", "policy_out.json", "config_echo.json"};
  if (result.aborted) manifest["abort_reason"] = result.abort_reason;
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

BundleSummary cmd_run(const fs::path& config, const fs::path& out_dir,
                      std::optional<std::uint64_t> seed_override) {
  const auto experiment = load_experiment(config, seed_override);
  return run_experiment(experiment, out_dir);
}

// ---- sweep -------------------------------------------------------------------

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "K") return SweepAxis::K;
  if (text == "eta") return SweepAxis::eta;
  if (text == "seed") return SweepAxis::seed;
  if (text == "target") return SweepAxis::target;
  throw InputError("unknown sweep axis '" + text + "' (expected K|eta|seed|target)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::K: return "K";
    case SweepAxis::eta: return "eta";
    case SweepAxis::seed: return "seed";
    case SweepAxis::target: return "target";
  }
  return "?";
}

void SweepSpec::validate() const {
  if (values.empty()) throw InputError("sweep needs at least one value");
  if (jobs < 1) throw InputError("--jobs must be at least 1");
  if (axis == SweepAxis::seed && seed_override) {
    throw InputError("--seed-override conflicts with a seed sweep");
  }
  for (std::size_t a = 0; a < values.size(); ++a) {
    for (std::size_t b = a + 1; b < values.size(); ++b) {
      if (values[a] == values[b]) throw InputError("duplicate sweep value '" + values[a] + "'");
    }
  }
}

Json apply_sweep_value(const Json& config, SweepAxis axis, const std::string& value) {
  Json j = config;
  if (!j.is_object()) throw InputError("experiment config must be a JSON object");
  if (!j.contains("mamex")) j["mamex"] = Json::object();
  auto& m = j["mamex"];
  switch (axis) {
    case SweepAxis::K: m["K"] = parse_unsigned(value, "K"); break;
    case SweepAxis::eta: m["eta"] = parse_double(value, "eta"); break;
    case SweepAxis::seed: m["seed"] = parse_unsigned(value, "seed"); break;
    case SweepAxis::target:
      m["target"] = to_string(parse_equilibrium_kind(value));
      break;
  }
  return j;
}

std::vector<BundleSummary> cmd_sweep(const SweepSpec& spec) {
  spec.validate();
  if (!fs::exists(spec.base_config)) {
    throw InputError("config file not found: '" + spec.base_config.string() + "'");
  }
  const Json base = read_json_file(spec.base_config);
  const auto base_dir = spec.base_config.parent_path();

  // Every run is parsed up front so bad input fails before any work starts.
  std::vector<Experiment> experiments;
  std::vector<std::string> run_ids;
  for (const auto& v : spec.values) {
    experiments.push_back(experiment_from_json(apply_sweep_value(base, spec.axis, v), base_dir,
                                               spec.seed_override));
    if (spec.jobs > 1) experiments.back().config.threads = 1;
    run_ids.push_back(to_string(spec.axis) + "_" + v);
  }

  std::vector<BundleSummary> results(experiments.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t r = next++; r < experiments.size(); r = next++) {
      try {
        results[r] = run_experiment(experiments[r], spec.out_dir / run_ids[r]);
      } catch (const std::exception& e) {
        results[r].dir = spec.out_dir / run_ids[r];
        results[r].status = "failed";
        results[r].abort_reason = e.what();
      }
    }
  };
  const unsigned jobs = std::min<unsigned>(spec.jobs, static_cast<unsigned>(experiments.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream out;
  out << "run_id,axis,value,status,episodes,final_cum_regret,output_gap\n";
  for (std::size_t r = 0; r < results.size(); ++r) {
    out << run_ids[r] << ',' << to_string(spec.axis) << ',' << spec.values[r] << ','
        << results[r].status << ',' << results[r].episodes << ','
        << fmt(results[r].final_cum_regret) << ',' << fmt(results[r].output_gap) << '\n';
  }
  write_file_atomic(spec.out_dir / "summary.csv", out.str());
  return results;
}

// ---- eqsolve / eval ------------------------------------------------------------

Json cmd_eqsolve(const EqSolveOptions& options) {
  auto file = normal_form_from_json(read_json_file(options.game));
  const EquilibriumKind kind = options.kind.value_or(file.kind);
  const auto& game = file.game;
  const std::size_t iters = options.iters.value_or(default_eq_iters(game.joint_size()));
  if (iters < 1) throw InputError("--iters must be at least 1");

  EquilibriumSolution sol;
  if (kind == EquilibriumKind::ne) {
    const NeMode mode = options.ne_mode ? *options.ne_mode : default_ne_mode(game);
    sol = solve_ne(game, mode, options.seed, iters);
  } else {
    sol = solve_equilibrium(game, kind, iters, options.seed);
  }
  const auto gaps = certify(game, sol.policy, kind);

  Json j;
  j["kind"] = to_string(kind);
  j["method"] = sol.method;
  j["iterations"] = sol.iterations;
  j["layout"] = game.layout().sizes();
  j["mass"] = std::vector<double>(sol.policy.mass().begin(), sol.policy.mass().end());
  Json marginals = Json::array();
  for (std::size_t i = 0; i < game.num_agents(); ++i) marginals.push_back(sol.policy.marginal(i));
  j["marginals"] = std::move(marginals);
  j["gaps"] = gaps;
  j["max_gap"] = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());
  return j;
}

std::string cmd_eval(const MarkovGame& game, const SavedPolicy& policy) {
  policy.space.check_compatible(game);
  if (!(policy.mixed.layout() == policy.space.layout())) {
    throw InputError("policy mass does not match the policy space layout");
  }
  const auto report = equilibrium_gaps(game, policy.space, policy.mixed, EquilibriumKind::cce);
  std::ostringstream out;
  out << "agent,cce_gap,ce_gap,value\n";
  for (std::size_t i = 0; i < report.agents.size(); ++i) {
    const auto& a = report.agents[i];
    out << i << ',' << fmt(a.cce_gap) << ',' << fmt(a.ce_gap) << ',' << fmt(a.value) << '\n';
  }
  return out.str();
}

MarkovGame load_game_or_experiment(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("file not found: '" + path.string() + "'");
  const Json j = read_json_file(path);
  if (j.is_object() && j.contains("game")) {
    return *experiment_from_json(j, path.parent_path()).game;
  }
  return load_game_file(path);
}

// ---- report --------------------------------------------------------------------

double loglog_slope(const std::vector<CurvePoint>& curve) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (const auto& p : curve) {
    if (!(p.k > 0.0 && p.cum_regret > 0.0)) continue;
    const double x = std::log(p.k);
    const double y = std::log(p.cum_regret);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  const double denom = static_cast<double>(m) * sxx - sx * sx;
  if (m < 2 || !(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return (static_cast<double>(m) * sxy - sx * sy) / denom;
}

namespace {

struct LoadedRun {
  std::string id;
  std::vector<CurvePoint> curve;
  std::string group_key;
  std::string family_key;
};

std::vector<CurvePoint> read_record_curve(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open '" + file.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty record file '" + file.string() + "'");
  const auto header = split(line, ',');
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw InputError("'" + file.string() + "' has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ck = col("k");
  const std::size_t cr = col("cum_regret");
  std::vector<CurvePoint> curve;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw InputError("'" + file.string() + "' row " + std::to_string(row) +
                       " has the wrong number of cells");
    }
    curve.push_back({parse_double(cells[ck], "k"), parse_double(cells[cr], "cum_regret")});
  }
  return curve;
}

void erase_path(Json& j, const char* section, const char* key) {
  if (j.contains(section) && j[section].is_object()) j[section].erase(key);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

std::string fmt_slope(double s) { return std::isnan(s) ? "nan" : fmt(s); }

}  // namespace

ReportSummary cmd_report(const std::vector<fs::path>& bundles, const fs::path& out_dir) {
  if (bundles.empty()) throw InputError("report needs at least one bundle directory");
  std::vector<LoadedRun> runs;
  std::map<std::string, std::size_t> id_uses;
  for (const auto& dir : bundles) {
    if (!fs::is_directory(dir)) throw InputError("bundle not found: '" + dir.string() + "'");
    LoadedRun run;
    run.id = dir.filename().empty() ? dir.parent_path().filename().string()
                                    : dir.filename().string();
    if (id_uses[run.id]++ > 0) run.id = dir.string();
    run.curve = read_record_curve(dir / "record.csv");
    Json echo = read_json_file(dir / "config_echo.json");
    echo.erase("resolved");
    erase_path(echo, "mamex", "seed");
    run.group_key = echo.dump();
    erase_path(echo, "mamex", "K");
    run.family_key = echo.dump();
    runs.push_back(std::move(run));
  }

  ReportSummary summary;
  std::map<std::string, std::size_t> group_index, family_index;
  std::vector<std::vector<std::size_t>> group_members;
  std::vector<std::vector<std::size_t>> family_members;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto [g, g_new] = group_index.emplace(runs[r].group_key, group_members.size());
    if (g_new) {
      summary.groups.push_back("g" + std::to_string(g->second));
      group_members.emplace_back();
    }
    group_members[g->second].push_back(r);
    const auto [f, f_new] = family_index.emplace(runs[r].family_key, family_members.size());
    if (f_new) family_members.emplace_back();
    family_members[f->second].push_back(r);
    summary.run_ids.push_back(runs[r].id);
    summary.run_groups.push_back(summary.groups[g->second]);
    summary.run_slopes.push_back(loglog_slope(runs[r].curve));
  }

  std::ostringstream curves;
  curves << "run_id,k,cum_regret,avg_regret\n";
  for (const auto& run : runs) {
    for (const auto& p : run.curve) {
      curves << run.id << ',' << fmt(p.k) << ',' << fmt(p.cum_regret) << ','
             << fmt(p.cum_regret / p.k) << '\n';
    }
  }

  std::ostringstream slopes;
  slopes << "run_id,group,slope,points\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    slopes << runs[r].id << ',' << summary.run_groups[r] << ',' << fmt_slope(summary.run_slopes[r])
           << ',' << runs[r].curve.size() << '\n';
  }

  // Group slope: regression on the mean log curve over the k values every
  // member reports with positive regret. It is the mean of the members'
  // slopes restricted to those points.
  std::ostringstream group_slopes;
  group_slopes << "group,runs,slope,points\n";
  for (std::size_t g = 0; g < group_members.size(); ++g) {
    std::map<double, std::pair<double, std::size_t>> acc;  // k -> (sum log, count)
    for (std::size_t r : group_members[g]) {
      for (const auto& p : runs[r].curve) {
        if (p.cum_regret > 0.0 && p.k > 0.0) {
          auto& a = acc[p.k];
          a.first += std::log(p.cum_regret);
          a.second += 1;
        }
      }
    }
    std::vector<CurvePoint> mean_curve;
    for (const auto& [k, a] : acc) {
      if (a.second == group_members[g].size()) {
        mean_curve.push_back({k, std::exp(a.first / static_cast<double>(a.second))});
      }
    }
    const double s = loglog_slope(mean_curve);
    summary.group_slopes.push_back(s);
    group_slopes << summary.groups[g] << ',' << group_members[g].size() << ',' << fmt_slope(s)
                 << ',' << mean_curve.size() << '\n';
  }

  // Final-regret slope across K: median final cum_regret per episode count.
  std::ostringstream final_slopes;
  final_slopes << "family,k_values,runs,slope\n";
  for (std::size_t f = 0; f < family_members.size(); ++f) {
    std::map<double, std::vector<double>> by_k;
    for (std::size_t r : family_members[f]) {
      if (!runs[r].curve.empty()) by_k[runs[r].curve.back().k].push_back(runs[r].curve.back().cum_regret);
    }
    std::vector<CurvePoint> pts;
    std::string ks;
    for (const auto& [k, vals] : by_k) {
      pts.push_back({k, median(vals)});
      ks += (ks.empty() ? "" : ";") + fmt(k);
    }
    final_slopes << 'f' << f << ',' << ks << ',' << family_members[f].size() << ','
                 << fmt_slope(loglog_slope(pts)) << '\n';
  }

  write_file_atomic(out_dir / "curves.csv", curves.str());
  write_file_atomic(out_dir / "slopes.csv", slopes.str());
  write_file_atomic(out_dir / "group_slopes.csv", group_slopes.str());
  write_file_atomic(out_dir / "final_slopes.csv", final_slopes.str());
  return summary;
}

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (...) {
    err << "error: unknown failure\n";
    return 1;
  }
}

}  // namespace mamex::cli
