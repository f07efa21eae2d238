// excasim command line: run scenarios, validate them, evaluate trajectories.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "excasim/engine.hpp"
#include "excasim/eval.hpp"
#include "excasim/log.hpp"
#include "excasim/scenario.hpp"
#include "excasim/terrain.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunArgs {
  std::string scenario, commands, out, dem_out;
  double duration = 10.0;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::string mode;
};

int cmd_run(const RunArgs& a) {
  auto cfg = excasim::scenario::load_scenario_file(a.scenario);
  if (a.seed) cfg.seed = *a.seed;
  if (a.dt) {
    if (!(*a.dt > 0.0)) throw excasim::ConfigError("--dt must be > 0");
    cfg.dt = *a.dt;
  }
  if (!a.mode.empty()) {
    const auto m = excasim::excavator::parse_mode(a.mode);
    if (!m) throw excasim::ConfigError("unknown mode '" + a.mode + "'");
    cfg.mode = *m;
  }
  std::ifstream cmd(a.commands);
  if (!cmd) throw excasim::ConfigError("cannot open command log '" + a.commands + "'");
  const auto frames = excasim::log::read_command_log(cmd);

  excasim::engine::World world(cfg);
  world.set_commands(frames);
  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw excasim::IoError("cannot open state log '" + a.out + "'");
  const auto s = excasim::engine::run(world, a.duration, out);
  if (!a.dem_out.empty()) excasim::terrain::export_dem(world.terrain(), a.dem_out);
  std::printf("steps=%lld sim_time=%.6f wall_time=%.6f real_time_factor=%.3f\n", static_cast<long long>(s.steps),
              s.sim_time, s.wall_time, s.real_time_factor);
  return 0;
}

int cmd_validate(const std::string& path) {
  const auto cfg = excasim::scenario::load_scenario_file(path);
  std::printf("ok: %zu excavator(s), terrain %dx%d cells\n", cfg.excavators.size(), cfg.terrain.nx(),
              cfg.terrain.ny());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Headless excavator simulation"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario against a command log");
  run_cmd->add_option("--scenario", run.scenario, "Scenario YAML")->required();
  run_cmd->add_option("--commands", run.commands, "Command log (JSONL)")->required();
  run_cmd->add_option("--out", run.out, "State log output (JSONL)")->required();
  run_cmd->add_option("--dem-out", run.dem_out, "Final terrain as ESRI ASCII grid");
  run_cmd->add_option("--duration", run.duration, "Simulated seconds")->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Override the scenario seed");
  run_cmd->add_option("--dt", run.dt, "Override the time step (s)");
  run_cmd->add_option("--mode", run.mode, "Joint actuation")->check(CLI::IsMember({"ideal", "parameterized"}));

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("--scenario", validate_path, "Scenario YAML")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Trajectory metrics");
  eval_cmd->require_subcommand(1);

  std::string ref_path, test_path, id, align = "time";
  bool planar = false;
  double step = 0.0;
  auto* rmse_cmd = eval_cmd->add_subcommand("rmse", "RMSE between two trajectories");
  rmse_cmd->add_option("--ref", ref_path, "Reference trajectory (CSV or state log)")->required();
  rmse_cmd->add_option("--test", test_path, "Compared trajectory (CSV or state log)")->required();
  rmse_cmd->add_option("--align", align, "Resampling base")->check(CLI::IsMember({"time", "arclength"}))
      ->capture_default_str();
  rmse_cmd->add_flag("--planar", planar, "Ignore the vertical axis");
  rmse_cmd->add_option("--step", step, "Resampling step; 0 uses the finer native spacing");
  rmse_cmd->add_option("--id", id, "Excavator id when reading a state log");

  std::string traj_path;
  auto* pathlen_cmd = eval_cmd->add_subcommand("pathlen", "Path length of a trajectory");
  pathlen_cmd->add_option("--traj", traj_path, "Trajectory (CSV or state log)")->required();
  pathlen_cmd->add_option("--id", id, "Excavator id when reading a state log");
  auto* profile_cmd = eval_cmd->add_subcommand("profile", "Speed and acceleration series as CSV");
  profile_cmd->add_option("--traj", traj_path, "Trajectory (CSV or state log)")->required();
  profile_cmd->add_option("--id", id, "Excavator id when reading a state log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*validate_cmd) return cmd_validate(validate_path);
    if (*rmse_cmd) {
      const auto ref = excasim::eval::load_trajectory(ref_path, std::nullopt, id);
      const auto test = excasim::eval::load_trajectory(test_path, ref.geodetic_origin, id);
      excasim::eval::RmseOptions opt;
      opt.alignment = align == "arclength" ? excasim::eval::Alignment::kArcLength : excasim::eval::Alignment::kTime;
      opt.planar = planar;
      opt.step = step;
      const auto r = excasim::eval::rmse(ref, test, opt);
      std::printf("rmse=%.9g samples=%zu ref_length=%.9g test_length=%.9g\n", r.rmse, r.samples, r.ref_length,
                  r.test_length);
      return 0;
    }
    if (*pathlen_cmd) {
      std::printf("%.9g\n", excasim::eval::path_length(excasim::eval::load_trajectory(traj_path, std::nullopt, id)));
      return 0;
    }
    if (*profile_cmd) {
      const auto rows = excasim::eval::profile(excasim::eval::load_trajectory(traj_path, std::nullopt, id));
      std::fputs(excasim::eval::format_profile(rows).c_str(), stdout);
      return 0;
    }
  } catch (const excasim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
