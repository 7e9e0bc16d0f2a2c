// Command line front end: closed-loop runs, parameter sweeps and closed-form
// feasibility screening. Exit codes: 0 success, 2 collision (or a sweep with
// no successful cell), 3 configuration or I/O problems; check-feasibility
// returns 1 when the configured road length cannot accommodate formation.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "platoon/scenario.hpp"
#include "platoon/sim.hpp"

namespace {

using namespace platoon;

Scenario load_spec(const std::string& which) {
  for (const auto& name : preset_names()) {
    if (name == which) return preset(name);
  }
  return load_scenario_file(which);
}

std::vector<std::pair<std::string, std::string>> split_overrides(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> result;
  result.reserve(raw.size());
  for (const auto& item : raw) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + item + "'");
    }
    result.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return result;
}

Scenario prepare(const std::string& which, const std::vector<std::string>& sets,
                 const std::optional<std::uint64_t>& seed) {
  Scenario s = load_spec(which);
  const auto overrides = split_overrides(sets);
  if (!overrides.empty()) s = apply_overrides(s, overrides);
  if (seed) {
    s.seed = *seed;
    s.validate();
  }
  return s;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  fn(out);
  if (!out) throw ConfigError("failed while writing '" + path.string() + "'");
}

void print_feasibility(const FeasibilityReport& f) {
  std::cout << "feasibility: traverse lower bound " << f.t_f_lower << " s, upper bound ";
  if (f.t_f_upper) {
    std::cout << *f.t_f_upper << " s";
  } else {
    std::cout << "unbounded";
  }
  std::cout << ", braking distance " << f.L_s << " m\n";
  if (f.already_formed) {
    std::cout << "feasibility: gaps already at their references\n";
  } else if (f.tau_p) {
    std::cout << "feasibility: predicted gap closure " << *f.tau_p << " s\n";
  } else {
    std::cout << "feasibility: gaps cannot close under these limits\n";
  }
  std::cout << "feasibility: platoon formation "
            << (f.platoon_feasible ? "achievable" : "not achievable")
            << " within the configured length\n";
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw ConfigError("bad numeric list entry '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty numeric list '" + csv + "'");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (double v : parse_values(csv)) {
    if (v < 0 || v != std::floor(v)) throw ConfigError("seeds must be nonnegative integers");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& rr) {
  std::filesystem::create_directories(dir);
  write_file(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, rr); });
  write_file(dir / "estimates.csv", [&](std::ostream& o) { write_estimates_csv(o, rr); });
  write_file(dir / "meta.json", [&](std::ostream& o) { write_meta_json(o, rr); });
}

int cmd_run(const std::string& which, const std::vector<std::string>& sets,
            const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
  const Scenario s = prepare(which, sets, seed);
  const std::filesystem::path dir(out_dir);

  RunResult rr;
  try {
    rr = run(s);
  } catch (const CollisionDetected& e) {
    // Dump whatever was recorded up to the impact, then report the failure.
    if (e.forensic) write_run_outputs(dir, *e.forensic);
    std::cerr << e.what() << "\n";
    return 2;
  }
  write_run_outputs(dir, rr);

  std::cout << "scenario " << s.name << ": " << s.n_vehicles << " vehicles"
            << (s.has_pv ? " plus a vehicle ahead" : "") << ", " << s.duration << " s, seed "
            << s.seed << "\n";
  if (rr.feasibility) print_feasibility(*rr.feasibility);
  if (rr.formation_time) {
    std::cout << "platoon formed at " << *rr.formation_time << " s\n";
  } else {
    std::cout << "platoon not formed by the end of the run\n";
  }
  std::cout << "solver: mean " << rr.mean_solve_ms << " ms, max " << rr.max_solve_ms
            << " ms over " << rr.steps.size() << " steps\n";
  if (!rr.steps.empty()) std::cout << "minimum bumper gap " << rr.min_headway << " m\n";
  std::cout << "wrote " << (dir / "trajectory.csv").string() << ", "
            << (dir / "estimates.csv").string() << ", " << (dir / "meta.json").string() << "\n";
  return 0;
}

int cmd_sweep(const std::string& which, const std::vector<std::string>& sets,
              const std::string& axis, const std::string& values_csv,
              const std::string& seeds_csv, const std::string& out_dir) {
  const Scenario base = prepare(which, sets, std::nullopt);
  SweepSpec spec;
  spec.axis = axis;
  spec.values = parse_values(values_csv);
  spec.seeds = parse_seeds(seeds_csv);
  const SweepResult result = sweep(base, spec);

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, result); });

  std::size_t ok = 0;
  for (const auto& cell : result.cells) {
    if (cell.status == "ok") ++ok;
    if (!cell.message.empty()) {
      std::cerr << spec.axis << "=" << cell.value << " seed " << cell.seed << ": "
                << cell.message << "\n";
    }
  }
  const std::size_t per_value = spec.seeds.size();
  for (std::size_t vi = 0; vi < spec.values.size(); ++vi) {
    double sum = 0.0;
    int formed = 0;
    for (std::size_t si = 0; si < per_value; ++si) {
      const auto& cell = result.cells[vi * per_value + si];
      if (cell.status == "ok" && cell.formation_time) {
        sum += *cell.formation_time;
        ++formed;
      }
    }
    std::cout << spec.axis << "=" << spec.values[vi] << ": formed " << formed << "/"
              << per_value;
    if (formed > 0) std::cout << ", mean formation " << sum / formed << " s";
    std::cout << "\n";
  }
  std::cout << ok << "/" << result.cells.size() << " cells completed, wrote "
            << (dir / "sweep.csv").string() << "\n";
  return ok > 0 ? 0 : 2;
}

int cmd_check(const std::string& which, const std::vector<std::string>& sets,
              const std::optional<std::uint64_t>& seed) {
  Scenario s = prepare(which, sets, seed);
  if (!s.road.length) {
    throw ConfigError("check-feasibility needs road.length (try --set road.length=...)");
  }
  s.duration = 0.0;  // screening only looks at the initial chain
  const RunResult rr = run(s);
  print_feasibility(*rr.feasibility);
  return rr.feasibility->platoon_feasible ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receding-horizon platoon formation simulator"};
  app.require_subcommand(1);

  std::string scenario_arg;
  std::string out_dir = "out";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::uint64_t seed_raw = 0;

  auto add_common = [&](CLI::App* cmd, bool with_out) {
    const std::string names = [] {
      std::string joined;
      for (const auto& n : platoon::preset_names()) {
        if (!joined.empty()) joined += ", ";
        joined += n;
      }
      return joined;
    }();
    CLI::Option* positional =
        cmd->add_option("scenario", scenario_arg,
                        "Scenario JSON file or preset name (" + names + ")");
    cmd->add_option("--preset", scenario_arg, "Named preset (" + names + ")")
        ->excludes(positional);
    cmd->callback([cmd]() {
      if (cmd->count("scenario") == 0 && cmd->count("--preset") == 0) {
        throw CLI::RequiredError("scenario (positional) or --preset");
      }
    });
    cmd->add_option("--set", sets, "Override a scenario field, e.g. --set controller.horizon=30");
    // The bound variable is only written once parsing finishes, so convert
    // here to learn whether the flag was given at all.
    cmd->add_option("--seed", seed_raw, "Override the scenario seed")
        ->each([&](const std::string& v) { seed = std::stoull(v); });
    if (with_out) cmd->add_option("--out", out_dir, "Output directory (default: out)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "Simulate one scenario and write CSV output");
  add_common(run_cmd, true);

  std::string axis = "N";
  std::string values_csv;
  std::string seeds_csv = "1";
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Run a one-axis parameter sweep crossed with seeds");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--axis", axis, "Sweep axis: N, alpha, beta, v_d or rho");
  sweep_cmd->add_option("--values", values_csv, "Comma-separated axis values")->required();
  sweep_cmd->add_option("--seeds", seeds_csv, "Comma-separated seeds (default: 1)");

  CLI::App* check_cmd = app.add_subcommand(
      "check-feasibility", "Closed-form screening of the configured road length");
  add_common(check_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(scenario_arg, sets, seed, out_dir);
    if (sweep_cmd->parsed()) return cmd_sweep(scenario_arg, sets, axis, values_csv, seeds_csv, out_dir);
    return cmd_check(scenario_arg, sets, seed);
  } catch (const platoon::CollisionDetected& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
