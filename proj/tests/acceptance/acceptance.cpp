// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fail. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "excasim/engine.hpp"
#include "excasim/eval.hpp"
#include "excasim/excavator.hpp"
#include "excasim/geo.hpp"
#include "excasim/soil.hpp"
#include "excasim/terrain.hpp"
#include "oracles.hpp"

using namespace excasim;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = EXCASIM_SCENARIO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<log::ControlFrame> three_digs_commands(const std::string& id = "excavator1") {
  std::ifstream f(kScenarios / "three_digs_commands.jsonl");
  auto frames = log::read_command_log(f);
  for (auto& fr : frames) fr.excavator_id = id;
  return frames;
}

// 1. Joint velocity transient with eta=20, beta=6, phi=0, sampled from the
// parameterized joint integrator at 10 us steps.
Outcome joint_profile() {
  const auto m = excavator::compact_4t();
  const int j = 1;
  const auto& p = m.joint_dynamics[j];
  if (p.eta != 20.0 || p.beta != 6.0 || p.phi != 0.0) return {false, "default boom dynamics are not (20, 6, 0)"};
  auto s = excavator::spawn_state({}, m);
  excavator::Controls u;
  u.boom = 1.0;
  const double w_ss = m.omega_max[j];
  const double dt = 1e-5;
  double peak = 0.0, t_peak = 0.0, worst_envelope = -INFINITY;
  const double v0 = excavator::joint_velocity_profile(0.0, 1.0, j, m);
  for (int i = 1; i <= 200000; ++i) {
    excavator::step_joints(s, m, u, dt, excavator::ActuationMode::kParameterized);
    s.time = i * dt;
    const double r = s.joint_velocities[j] / w_ss;
    worst_envelope = std::max(worst_envelope, std::abs(r - 1.0) - std::exp(-6.0 * s.time));
    if (r > peak) {
      peak = r;
      t_peak = s.time;
    }
  }
  const bool ok = v0 == w_ss && worst_envelope <= 1e-12 && std::abs(peak - 1.6526) <= 1e-3 &&
                  std::abs(t_peak - 0.0640) <= 5e-4;
  return {ok, fmt("w(0)/w_ss=%.15g envelope_margin=%.3g peak=%.6f at t=%.5f s", v0 / w_ss, -worst_envelope, peak,
                  t_peak)};
}

// 2. Two excavators under random commands for 60 s: drive, dig, dump, plow.
Outcome mass_conservation() {
  scenario::ScenarioConfig cfg = scenario::load_scenario(R"(
seed: 11
terrain:
  width_m: 30
  length_m: 30
  resolution_m: 0.25
  initial_height_m: 1.0
  material: dirt
  regions:
    - {material: sand, x_min: 15, x_max: 30, y_min: 0, y_max: 15}
    - {material: gravel, x_min: 0, x_max: 15, y_min: 15, y_max: 30}
excavators:
  - {id: a, offset: [9, 9, 1]}
  - {id: b, offset: [21, 21, 1], rotation: [0, 0, 180]}
)");
  engine::World w(cfg);
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> cmd(-1.0, 1.0);
  std::vector<log::ControlFrame> frames;
  for (const char* id : {"a", "b"}) {
    for (int k = 0; k < 120; ++k) {
      log::ControlFrame f{0.5 * k, id, {}};
      for (std::size_t c = 0; c < log::kChannelNames.size(); ++c) log::channel(f.channels, c) = cmd(gen);
      frames.push_back(f);
    }
  }
  w.set_commands(frames);
  const double m0 = w.total_mass();
  double worst = 0.0, max_payload = 0.0;
  std::size_t max_particles = 0;
  for (int i = 0; i < 6000; ++i) {
    w.step();
    worst = std::max(worst, std::abs(w.total_mass() - m0) / m0);
    for (const auto& r : w.robots()) max_payload = std::max(max_payload, r.state.bucket_mass());
    max_particles = std::max(max_particles, w.particles().size());
  }
  const bool active = max_payload > 0.0 && max_particles > 0;
  return {worst <= 1e-9 && active, fmt("max relative drift=%.3g over 6000 steps (peak payload %.1f kg, peak particles %zu)",
                                       worst, max_payload, max_particles)};
}

// 3. Same scenario and seed twice: byte-identical state logs.
Outcome determinism() {
  const auto cfg = scenario::load_scenario_file(kScenarios / "three_digs.yaml");
  const auto cmds = three_digs_commands();
  std::ostringstream a, b, c;
  engine::run(cfg, cmds, 60.0, a);
  engine::run(cfg, cmds, 60.0, b);
  auto reseeded = cfg;
  reseeded.seed += 1;
  engine::run(reseeded, cmds, 60.0, c);
  const bool same = a.str() == b.str();
  const bool seed_matters = a.str() != c.str();
  return {same && seed_matters && !a.str().empty(),
          fmt("%zu bytes, identical=%s, other seed differs=%s", a.str().size(), same ? "yes" : "no",
              seed_matters ? "yes" : "no")};
}

// 4. WGS-84 round trip and anchors.
Outcome geo_round_trip() {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0), alt(-100e3, 100e3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto g = geo::GeodeticCoord::from_degrees(lat(gen), lon(gen), alt(gen));
    const auto e = geo::geodetic_to_ecef(g);
    const auto back = geo::geodetic_to_ecef(geo::ecef_to_geodetic(e));
    worst = std::max(worst, (back.vector() - e.vector()).norm());
  }
  const auto eq = geo::geodetic_to_ecef(geo::GeodeticCoord::from_degrees(0, 0, 0));
  const auto pole = geo::geodetic_to_ecef(geo::GeodeticCoord::from_degrees(90, 0, 0));
  const bool anchors = eq.x == 6378137.0 && eq.y == 0.0 && eq.z == 0.0 &&
                       std::abs(pole.z - 6356752.314245179) <= 1e-9 && std::abs(pole.x) < 1e-9;
  return {worst < 1e-6 && anchors,
          fmt("max round-trip error=%.3g m, equator x=%.3f, pole z=%.9f", worst, eq.x, pole.z)};
}

// 5. Full-throttle straight drive on the three presets.
Outcome terrain_speed() {
  const auto m = excavator::compact_4t();
  struct Run { std::string name; double speed, sinkage; };
  std::vector<Run> runs;
  for (const auto& mat : {soil::dirt(), soil::gravel(), soil::sand()}) {
    auto grid = terrain::TerrainGrid::flat(120, 24, 1.0, mat, {}, {0.125, 0.125});
    auto s = excavator::spawn_state({3.0, 3.0, 1.0, 0.0}, m);
    excavator::Controls u;
    u.track_left = u.track_right = 1.0;
    const double dt = 0.01;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      excavator::step_tracks(s, m, u, grid, dt);
      s.time += dt;
    }
    runs.push_back({mat.name, (s.base_pose.x - 3.0) / (n * dt), s.sinkage});
  }
  const bool order = runs[0].speed >= runs[1].speed && runs[1].speed > runs[2].speed;
  const bool sink = runs[2].sinkage > runs[0].sinkage && runs[2].sinkage > runs[1].sinkage;
  return {order && sink, fmt("mean speed dirt=%.4f gravel=%.4f sand=%.4f m/s; sinkage dirt=%.4f gravel=%.4f "
                             "sand=%.4f m",
                             runs[0].speed, runs[1].speed, runs[2].speed, runs[0].sinkage, runs[1].sinkage,
                             runs[2].sinkage)};
}

// 6. FEE monotonicity on a 10^3 grid, zero at zero depth, brute-force spot value.
Outcome fee_properties() {
  const double g = 9.81;
  const double alpha = soil::deg2rad(70.0);
  auto f = [&](int i, int j, int k) {
    auto m = soil::dirt();
    m.cohesion = 2e3 * j;
    return soil::fee_force({0.2 + 0.1 * i, 0.02 * (k + 1), alpha, 500.0}, m, g);
  };
  int violations = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 10; ++k) {
        const double v = f(i, j, k);
        if (i && !(v > f(i - 1, j, k))) ++violations;
        if (j && !(v > f(i, j - 1, k))) ++violations;
        if (k && !(v > f(i, j, k - 1))) ++violations;
      }
  const double zero = soil::fee_force({0.5, 0.0, alpha, 500.0}, soil::dirt(), g);
  const double spot = soil::fee_force({0.55, 0.2, soil::deg2rad(60.0), 0.0}, soil::dirt(), g);
  const double ref = oracle::wedge_sweep(0.55, 0.2, soil::deg2rad(60.0), 0.0, soil::dirt(), g);
  const double rel = std::abs(spot / ref - 1.0);
  return {violations == 0 && zero == 0.0 && rel <= 1e-6,
          fmt("monotonicity violations=%d, F(d=0)=%g, spot=%.6f N vs sweep %.6f N (rel %.2g)", violations, zero,
              spot, ref, rel)};
}

// 7. Three scripted digs: pits in the exported DEM and ruts along the drive.
Outcome dig_dem() {
  const auto cfg = scenario::load_scenario_file(kScenarios / "three_digs.yaml");
  engine::World w(cfg);
  w.set_commands(three_digs_commands());
  const auto& model = w.robots()[0].model;
  std::vector<Eigen::Vector2d> track_points;
  for (int i = 0; i < 6000; ++i) {
    w.step();
    const auto& s = w.robots()[0].state;
    if (s.linear_velocity != 0.0 && i % 5 == 0) {
      const auto tg = excavator::track_geometry(model, s.base_pose);
      track_points.push_back(tg.left_center);
      track_points.push_back(tg.right_center);
    }
  }
  const auto path = fs::temp_directory_path() / "excasim_acceptance_dem.asc";
  terrain::export_dem(w.terrain(), path);
  const auto dem = terrain::read_dem(path);
  fs::remove(path);

  const double h0 = cfg.terrain.initial_height_m;
  auto depth = [&](int row, int col) { return h0 - dem.at(row, col); };
  std::vector<int> label(dem.values.size(), -1);
  int components = 0;
  for (int r = 0; r < dem.nrows; ++r)
    for (int c = 0; c < dem.ncols; ++c) {
      if (label[r * dem.ncols + c] >= 0 || depth(r, c) <= 0.05) continue;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      label[r * dem.ncols + c] = components;
      while (!q.empty()) {
        const auto [y, x] = q.front();
        q.pop();
        const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (const auto& n : nb) {
          if (n[0] < 0 || n[0] >= dem.nrows || n[1] < 0 || n[1] >= dem.ncols) continue;
          const int idx = n[0] * dem.ncols + n[1];
          if (label[idx] >= 0 || depth(n[0], n[1]) <= 0.05) continue;
          label[idx] = components;
          q.push({n[0], n[1]});
        }
      }
      ++components;
    }

  int rutted = 0;
  double shallowest = INFINITY, deepest = 0.0;
  for (const auto& p : track_points) {
    const int col = static_cast<int>(std::floor((p.x() - dem.xllcorner) / dem.cellsize));
    const int row = dem.nrows - 1 - static_cast<int>(std::floor((p.y() - dem.yllcorner) / dem.cellsize));
    const double d = depth(row, col);
    shallowest = std::min(shallowest, d);
    deepest = std::max(deepest, d);
    if (d >= 0.01 && d <= 0.05) ++rutted;
  }
  const bool ruts = !track_points.empty() && rutted == static_cast<int>(track_points.size());
  return {components >= 3 && ruts,
          fmt("%d depression components deeper than 5 cm; %d/%zu track samples rutted (depth %.4f..%.4f m)",
              components, rutted, track_points.size(), shallowest, deepest)};
}

// 8. RMSE harness on synthetic tracks.
Outcome rmse_harness() {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> step(0.0, 0.5);
  eval::Trajectory ref, shifted;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  const Eigen::Vector3d offset = 1.376 * Eigen::Vector3d(std::cos(2.1), std::sin(2.1), 0.0);
  for (int i = 0; i < 600; ++i) {
    ref.points.push_back({0.1 * i, p});
    shifted.points.push_back({0.1 * i, p + offset});
    p += Eigen::Vector3d(step(gen), step(gen), 0.05 * step(gen));
  }
  const double same = eval::rmse(ref, ref).rmse;
  const double off = eval::rmse(ref, shifted).rmse;
  return {same == 0.0 && std::abs(off - 1.376) <= 1e-12,
          fmt("identical=%.3g, offset track=%.15f m", same, off)};
}

// 9. Stationary IMU with noise [0.1, 0.01] through the engine, 1e5 samples.
Outcome imu_statistics() {
  auto noisy = scenario::load_scenario_file(kScenarios / "single_imu.yaml");
  noisy.terrain.width_m = noisy.terrain.length_m = 4.0;
  auto clean = noisy;
  clean.excavators[0].sensors[0].noise = {0.0, 0.0};
  const auto& spec = noisy.excavators[0].sensors[0];
  const int n = 100000;
  const double duration = n / spec.rate;
  auto collect = [&](const scenario::ScenarioConfig& cfg) {
    engine::World w(cfg);
    std::vector<Eigen::Vector3d> out;
    out.reserve(n);
    while (static_cast<int>(out.size()) < n && w.time() < duration + 1.0) {
      for (const auto& rec : w.step()) {
        const auto j = nlohmann::json::parse(rec.line);
        const auto& a = j.at("linear_acceleration");
        out.emplace_back(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
      }
    }
    return out;
  };
  const auto a = collect(noisy);
  const auto b = collect(clean);
  if (static_cast<int>(a.size()) < n || b.size() != a.size()) return {false, "too few samples"};
  bool ok = true;
  std::string detail = fmt("n=%d", n);
  for (int axis = 0; axis < 3; ++axis) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = a[i][axis] - b[i][axis];
      sum += e;
      sq += e * e;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
    const double mean_tol = 3.0 * spec.noise.stddev / std::sqrt(double(n));
    ok = ok && std::abs(mean - spec.noise.bias) <= mean_tol && std::abs(sd / spec.noise.stddev - 1.0) <= 0.05;
    detail += fmt("; axis %d mean=%.5f (bias %.2f +- %.5f) sd=%.5f", axis, mean, spec.noise.bias, mean_tol, sd);
  }
  return {ok, detail};
}

// 10. Bucket-joint torque slope against payload at the level pose.
Outcome torque_linearity() {
  const auto m = excavator::compact_4t();
  const excavator::JointVector level{0, 0, 0, 0};
  const double g = excavator::kStandardGravity;
  const double lever = m.shovel.payload_center.x();
  double worst = 0.0;
  for (double mass : {0.0, 50.0, 150.0, 300.0}) {
    const double dm = 25.0;
    const double slope = (excavator::joint_torque(m, level, mass + dm)[3] -
                          excavator::joint_torque(m, level, mass)[3]) / dm;
    worst = std::max(worst, std::abs(slope - g * lever));
  }
  return {worst < 1e-9, fmt("g*L=%.12f N m/kg, max slope error=%.3g", g * lever, worst)};
}

// 11. Four digging excavators on a 200x200 grid at dt = 0.01 s.
Outcome performance() {
  auto cfg = scenario::load_scenario_file(kScenarios / "three_digs.yaml");
  cfg.terrain.width_m = cfg.terrain.length_m = 50.0;
  cfg.terrain.resolution_m = 0.25;
  const auto proto = cfg.excavators.front();
  cfg.excavators.clear();
  std::vector<log::ControlFrame> cmds;
  const double spots[4][2] = {{8, 12}, {8, 37}, {30, 12}, {30, 37}};
  for (int k = 0; k < 4; ++k) {
    auto e = proto;
    e.id = "excavator" + std::to_string(k + 1);
    e.offset = {spots[k][0], spots[k][1], 1.0};
    cfg.excavators.push_back(e);
    const auto c = three_digs_commands(e.id);
    cmds.insert(cmds.end(), c.begin(), c.end());
  }
  if (cfg.terrain.nx() != 200 || cfg.terrain.ny() != 200 || cfg.dt != 0.01) return {false, "setup mismatch"};
  const auto path = fs::temp_directory_path() / "excasim_acceptance_perf.jsonl";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const auto s = engine::run(cfg, cmds, 60.0, out);
  out.close();
  const auto bytes = fs::file_size(path);
  fs::remove(path);
  return {s.real_time_factor >= 1.0,
          fmt("%lld steps, sim %.1f s in %.2f s wall, real-time factor %.1f (%llu log bytes)",
              static_cast<long long>(s.steps), s.sim_time, s.wall_time, s.real_time_factor,
              static_cast<unsigned long long>(bytes))};
}

struct Criterion {
  int number;
  const char* name;
  double budget_s;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "joint velocity profile", 1.0, joint_profile},
      {2, "mass conservation", 30.0, mass_conservation},
      {3, "determinism", 60.0, determinism},
      {4, "geodetic round trip", 1.0, geo_round_trip},
      {5, "terrain speed ordering", 60.0, terrain_speed},
      {6, "FEE properties", 10.0, fee_properties},
      {7, "three-dig DEM", 60.0, dig_dem},
      {8, "RMSE harness", 1.0, rmse_harness},
      {9, "IMU statistics", 5.0, imu_statistics},
      {10, "torque linearity", 1.0, torque_linearity},
      {11, "real-time factor", INFINITY, performance},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("%s %2d %-24s %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.number, c.name, o.detail.c_str(), secs,
                in_budget ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
