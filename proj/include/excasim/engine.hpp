#pragma once

// Fixed-step world: terrain, free particles and any number of excavators,
// stepped in ascending id order, with sensor records written as JSONL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "excasim/errors.hpp"
#include "excasim/excavator.hpp"
#include "excasim/log.hpp"
#include "excasim/rng.hpp"
#include "excasim/scenario.hpp"
#include "excasim/sensors.hpp"
#include "excasim/terrain.hpp"

namespace excasim::engine {

struct SensorRuntime {
  sensors::SensorSpec spec;
  std::string topic;  // "/<excavator id><topic>"
  CounterRng rng;
  std::int64_t next_index = 1;  // next sample is due at next_index / rate
  Eigen::Vector3d previous_velocity = Eigen::Vector3d::Zero();
};

struct Robot {
  std::string id;
  excavator::ExcavatorModel model;
  excavator::ExcavatorState state;
  excavator::Controls controls;
  CounterRng soil_rng;
  std::vector<SensorRuntime> sensors;
  std::vector<log::ControlFrame> frames;
  std::size_t next_frame = 0;
};

inline std::string namespaced_topic(const std::string& id, const std::string& topic) {
  if (topic.empty()) return "/" + id;
  return "/" + id + (topic.front() == '/' ? topic : "/" + topic);
}

class World {
 public:
  explicit World(const scenario::ScenarioConfig& cfg)
      : dt_(cfg.dt), mode_(cfg.mode), seed_(cfg.seed), grid_(scenario::build_terrain(cfg)) {
    if (!(dt_ > 0.0)) throw ConfigError("dt must be > 0");
    auto specs = cfg.excavators;
    std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& e : specs) {
      Robot r;
      r.id = e.id;
      r.model = e.model;
      constexpr double kDeg = std::numbers::pi / 180.0;
      r.state = excavator::spawn_state({e.offset.x(), e.offset.y(), e.offset.z(), e.rotation.z() * kDeg}, e.model);
      r.soil_rng = CounterRng::derive(seed_, e.id, std::string_view("soil"));
      for (const auto& s : e.sensors) {
        SensorRuntime rt;
        rt.spec = s;
        rt.topic = namespaced_topic(e.id, s.topic);
        rt.rng = CounterRng::derive(seed_, e.id, s.id);
        rt.previous_velocity = sensors::mount_kinematics(r.model, r.state, s).linear_velocity;
        r.sensors.push_back(std::move(rt));
      }
      robots_.push_back(std::move(r));
    }
  }

  // Installs a command log. Frames for ids not in the world are rejected.
  void set_commands(const std::vector<log::ControlFrame>& frames) {
    std::map<std::string, std::vector<log::ControlFrame>> by_id;
    for (const auto& f : frames) {
      if (!find(f.excavator_id)) throw ConfigError("command for unknown excavator '" + f.excavator_id + "'");
      by_id[f.excavator_id].push_back(f);
    }
    for (auto& r : robots_) {
      auto& fs = by_id[r.id];
      std::stable_sort(fs.begin(), fs.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
      r.frames = std::move(fs);
      r.next_frame = 0;
    }
  }

  // Advances one tick and returns the records sampled at its end, sorted by
  // (timestamp, excavator id, topic).
  std::vector<log::StateRecord> step() {
    const double t0 = time();
    for (auto& r : robots_) {
      while (r.next_frame < r.frames.size() && r.frames[r.next_frame].timestamp <= t0 + 1e-9 * dt_) {
        r.controls = r.frames[r.next_frame].channels;
        ++r.next_frame;
      }
      excavator::step_joints(r.state, r.model, r.controls, dt_, mode_);
      excavator::step_tracks(r.state, r.model, r.controls, grid_, dt_, gravity_);
      excavator::bucket_sweep(r.state, r.model, grid_, particles_, dt_, r.soil_rng, gravity_);
      excavator::plow_sweep(r.state, r.model, r.controls, grid_, particles_, dt_, r.soil_rng, gravity_);
    }
    terrain::step_particles(particles_, grid_, dt_, gravity_);
    ++steps_;
    const double t1 = time();
    for (auto& r : robots_) r.state.time = t1;

    std::vector<log::StateRecord> records;
    for (auto& r : robots_) sample(r, t1, records);
    std::sort(records.begin(), records.end());
    return records;
  }

  double time() const { return static_cast<double>(steps_) * dt_; }
  std::int64_t steps() const { return steps_; }
  double dt() const { return dt_; }
  std::uint64_t seed() const { return seed_; }
  const terrain::TerrainGrid& terrain() const { return grid_; }
  terrain::TerrainGrid& terrain() { return grid_; }
  const std::vector<terrain::SoilParticle>& particles() const { return particles_; }
  const std::vector<Robot>& robots() const { return robots_; }
  std::vector<Robot>& robots() { return robots_; }

  const Robot* find(const std::string& id) const {
    for (const auto& r : robots_) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  // Soil in the terrain, in flight and in buckets.
  double total_mass() const {
    double m = terrain::total_mass(grid_, particles_);
    for (const auto& r : robots_) m += r.state.bucket_mass();
    return m;
  }

 private:
  void sample(Robot& r, double now, std::vector<log::StateRecord>& out) {
    for (auto& sr : r.sensors) {
      sensors::MountKinematics k;
      const bool is_imu = sr.spec.kind == sensors::SensorKind::kImu;
      if (is_imu) {
        k = sensors::mount_kinematics(r.model, r.state, sr.spec);
        k.linear_acceleration = (k.linear_velocity - sr.previous_velocity) / dt_;
        sr.previous_velocity = k.linear_velocity;
      }
      while (static_cast<double>(sr.next_index) / sr.spec.rate <= now + 1e-9 * dt_) {
        const double ts = static_cast<double>(sr.next_index) / sr.spec.rate;
        ++sr.next_index;
        out.push_back(record(r, sr, k, ts));
      }
    }
  }

  log::StateRecord record(const Robot& r, SensorRuntime& sr, const sensors::MountKinematics& k, double ts) {
    using sensors::SensorKind;
    switch (sr.spec.kind) {
      case SensorKind::kImu:
        return log::imu_record(r.id, sr.topic, sensors::imu_sample(k, sr.spec, sr.rng, ts, gravity_));
      case SensorKind::kOdometry: {
        auto s = sensors::odometry_sample(r.state);
        s.timestamp = ts;
        return log::odometry_record(r.id, sr.topic, s);
      }
      case SensorKind::kJointState: {
        auto s = sensors::joint_state_sample(r.state);
        s.timestamp = ts;
        return log::joint_state_record(r.id, sr.topic, s);
      }
      case SensorKind::kTransform: {
        auto s = sensors::transform_sample(r.state, r.model);
        s.timestamp = ts;
        return log::transform_record(r.id, sr.topic, s);
      }
      case SensorKind::kBucketMass: {
        auto s = sensors::bucket_mass_sample(r.state);
        s.timestamp = ts;
        return log::bucket_mass_record(r.id, sr.topic, s);
      }
      case SensorKind::kRange: {
        const auto pose = sensors::mount_kinematics(r.model, r.state, sr.spec).pose;
        return log::range_record(ts, r.id, sr.topic,
                                 sensors::range_scan(pose, grid_, sr.spec.beams, sr.spec.fov, sr.spec.max_range));
      }
    }
    throw std::logic_error("unhandled sensor kind");
  }

  double dt_;
  excavator::ActuationMode mode_;
  std::uint64_t seed_;
  double gravity_ = excavator::kStandardGravity;
  terrain::TerrainGrid grid_;
  std::vector<terrain::SoilParticle> particles_;
  std::vector<Robot> robots_;
  std::int64_t steps_ = 0;
};

struct RunSummary {
  std::int64_t steps = 0;
  double sim_time = 0.0;   // s
  double wall_time = 0.0;  // s
  double real_time_factor = 0.0;
};

inline std::int64_t step_count(double duration, double dt) {
  if (!(duration >= 0.0)) throw ConfigError("duration must be >= 0");
  return static_cast<std::int64_t>(std::floor(duration / dt + 1e-9));
}

// Steps the world for `duration` seconds, writing records as they are produced.
inline RunSummary run(World& world, double duration, std::ostream& out) {
  RunSummary summary;
  summary.steps = step_count(duration, world.dt());
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t i = 0; i < summary.steps; ++i) {
    for (const auto& rec : world.step()) {
      out << rec.line << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing state log");
  summary.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  summary.sim_time = static_cast<double>(summary.steps) * world.dt();
  summary.real_time_factor = summary.wall_time > 0.0 ? summary.sim_time / summary.wall_time : 0.0;
  return summary;
}

inline RunSummary run(const scenario::ScenarioConfig& cfg, const std::vector<log::ControlFrame>& commands,
                      double duration, std::ostream& out) {
  World world(cfg);
  world.set_commands(commands);
  return run(world, duration, out);
}

}  // namespace excasim::engine
