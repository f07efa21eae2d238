#pragma once

// Scenario YAML: seed, timestep, terrain, soil materials and excavators with
// their sensors. Unknown keys are rejected at every level.
//
//   seed: 7
//   dt: 0.01
//   mode: parameterized            # or ideal
//   terrain: {width_m: 50, length_m: 50, resolution_m: 0.25,
//             initial_height_m: 1.0, material: dirt}
//   materials: [{name: clay, young_modulus_pa: 5e6, friction_angle_deg: 20,
//                cohesion_pa: 25e3, density_kg_m3: 1800, swell_factor: 1.3}]
//   Excavator:                     # "excavators" is accepted as well
//     - id: excavator1
//       type: excavator
//       offset: [1, 1, 1]
//       rotation: [0, 0, 0]
//       sensors:
//         - {id: Chassis_IMU, type: IMU, topic: /imu_chassis, location: CHASSIS,
//            noise: [0.1, 0.01], offset: [0.3436, 0.15, -0.2921], rotation: [0, -90, 90]}

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <yaml-cpp/yaml.h>

#include "excasim/errors.hpp"
#include "excasim/excavator.hpp"
#include "excasim/sensors.hpp"
#include "excasim/soil.hpp"
#include "excasim/terrain.hpp"

namespace excasim::scenario {

struct TerrainRegion {
  std::string material;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
};

struct TerrainSpec {
  double width_m = 50.0;   // along x
  double length_m = 50.0;  // along y
  double resolution_m = 0.25;
  double cell_height_m = 0.1;
  double initial_height_m = 1.0;
  double bedrock_m = 0.0;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // world position of the grid's lower-left corner
  std::string material = "dirt";
  std::vector<TerrainRegion> regions;

  int nx() const { return std::max(1, static_cast<int>(std::llround(width_m / resolution_m))); }
  int ny() const { return std::max(1, static_cast<int>(std::llround(length_m / resolution_m))); }
};

struct ExcavatorSpec {
  std::string id;
  std::string type = "excavator";
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();  // deg; only yaw (z) is supported
  excavator::ExcavatorModel model = excavator::compact_4t();
  std::vector<sensors::SensorSpec> sensors;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  double dt = 0.01;
  excavator::ActuationMode mode = excavator::ActuationMode::kParameterized;
  TerrainSpec terrain;
  std::vector<soil::SoilMaterial> materials = soil::presets();
  std::vector<ExcavatorSpec> excavators;

  const soil::SoilMaterial* find_material(const std::string& name) const {
    for (const auto& m : materials) {
      if (m.name == name) return &m;
    }
    return nullptr;
  }
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

inline void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) fail(where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& where) {
  try {
    if (!node.IsScalar()) fail(where, "expected a scalar");
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(where, "invalid value '" + YAML::Dump(node) + "'");
  }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  if (const auto n = parent[key]) out = scalar<T>(n, where + "." + key);
}

inline std::vector<double> numbers(const YAML::Node& node, const std::string& where, std::size_t arity) {
  if (!node.IsSequence()) fail(where, "expected a list of " + std::to_string(arity) + " numbers");
  if (node.size() != arity) {
    fail(where, "expected " + std::to_string(arity) + " values, got " + std::to_string(node.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(scalar<double>(node[i], where));
  return out;
}

inline Eigen::Vector3d vec3(const YAML::Node& node, const std::string& where) {
  const auto v = numbers(node, where, 3);
  return {v[0], v[1], v[2]};
}

inline soil::SoilMaterial parse_material(const YAML::Node& node, const std::string& where) {
  check_keys(node, where, {"name", "young_modulus_pa", "friction_angle_deg", "cohesion_pa", "density_kg_m3",
                           "swell_factor", "slip_modulus"});
  soil::SoilMaterial m;
  for (const char* required : {"name", "young_modulus_pa", "friction_angle_deg", "cohesion_pa", "density_kg_m3"}) {
    if (!node[required]) fail(where, std::string("missing '") + required + "'");
  }
  m.name = scalar<std::string>(node["name"], where + ".name");
  m.young_modulus = scalar<double>(node["young_modulus_pa"], where + ".young_modulus_pa");
  m.friction_angle = soil::deg2rad(scalar<double>(node["friction_angle_deg"], where + ".friction_angle_deg"));
  m.cohesion = scalar<double>(node["cohesion_pa"], where + ".cohesion_pa");
  m.density = scalar<double>(node["density_kg_m3"], where + ".density_kg_m3");
  read(node, "swell_factor", m.swell_factor, where);
  read(node, "slip_modulus", m.slip_modulus, where);
  m.validate();
  return m;
}

inline void parse_terrain(const YAML::Node& node, TerrainSpec& t) {
  const std::string where = "terrain";
  check_keys(node, where, {"width_m", "length_m", "resolution_m", "initial_height_m", "material", "cell_height_m",
                           "bedrock_m", "origin", "regions"});
  read(node, "width_m", t.width_m, where);
  read(node, "length_m", t.length_m, where);
  read(node, "resolution_m", t.resolution_m, where);
  read(node, "initial_height_m", t.initial_height_m, where);
  read(node, "material", t.material, where);
  read(node, "cell_height_m", t.cell_height_m, where);
  read(node, "bedrock_m", t.bedrock_m, where);
  if (const auto o = node["origin"]) {
    const auto v = numbers(o, where + ".origin", 2);
    t.origin = {v[0], v[1]};
  }
  if (const auto regions = node["regions"]) {
    if (!regions.IsSequence()) fail(where + ".regions", "expected a list");
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const std::string w = where + ".regions[" + std::to_string(i) + "]";
      check_keys(regions[i], w, {"material", "x_min", "x_max", "y_min", "y_max"});
      TerrainRegion r;
      r.material = scalar<std::string>(regions[i]["material"], w + ".material");
      r.x_min = scalar<double>(regions[i]["x_min"], w + ".x_min");
      r.x_max = scalar<double>(regions[i]["x_max"], w + ".x_max");
      r.y_min = scalar<double>(regions[i]["y_min"], w + ".y_min");
      r.y_max = scalar<double>(regions[i]["y_max"], w + ".y_max");
      t.regions.push_back(r);
    }
  }
  if (!(t.width_m > 0.0 && t.length_m > 0.0 && t.resolution_m > 0.0 && t.cell_height_m > 0.0)) {
    fail(where, "width_m, length_m, resolution_m and cell_height_m must be > 0");
  }
  if (!(t.initial_height_m >= t.bedrock_m)) fail(where, "initial_height_m must be >= bedrock_m");
}

inline void parse_model(const YAML::Node& node, excavator::ExcavatorModel& m, const std::string& where) {
  check_keys(node, where,
             {"link_lengths_m", "link_masses_kg", "link_com_offsets_m", "joint_limits_deg", "slew_axis_height_m",
              "track_gauge_m", "track_length_m", "track_width_m", "machine_mass_kg", "track_speed_max_m_s",
              "omega_max_rad_s", "joint_dynamics", "shovel", "breakout_force_n", "plow_width_m", "plow_offset_m",
              "plow_min_m", "plow_max_m", "plow_speed_m_s", "plow_rake_deg", "dump_threshold"});
  auto triple = [&](const char* key, std::array<double, 3>& out) {
    if (const auto n = node[key]) {
      const auto v = numbers(n, where + "." + key, 3);
      std::copy(v.begin(), v.end(), out.begin());
    }
  };
  triple("link_lengths_m", m.link_lengths);
  triple("link_masses_kg", m.link_masses);
  triple("link_com_offsets_m", m.link_com_offsets);
  if (const auto n = node["joint_limits_deg"]) {
    const std::string w = where + ".joint_limits_deg";
    check_keys(n, w, {"slew", "boom", "arm", "bucket"});
    for (int j = 0; j < excavator::kNumJoints; ++j) {
      if (const auto lim = n[excavator::kJointNames[j]]) {
        const auto v = numbers(lim, w + "." + excavator::kJointNames[j], 2);
        m.joint_limits[j] = {soil::deg2rad(v[0]), soil::deg2rad(v[1])};
      }
    }
  }
  read(node, "slew_axis_height_m", m.slew_axis_height, where);
  read(node, "track_gauge_m", m.track_gauge, where);
  read(node, "track_length_m", m.track_length, where);
  read(node, "track_width_m", m.track_width, where);
  read(node, "machine_mass_kg", m.machine_mass, where);
  read(node, "track_speed_max_m_s", m.track_speed_max, where);
  if (const auto n = node["omega_max_rad_s"]) {
    const auto v = numbers(n, where + ".omega_max_rad_s", 4);
    std::copy(v.begin(), v.end(), m.omega_max.begin());
  }
  if (const auto n = node["joint_dynamics"]) {
    const std::string w = where + ".joint_dynamics";
    check_keys(n, w, {"boom", "arm", "bucket"});
    for (int j = 1; j < excavator::kNumJoints; ++j) {
      if (const auto p = n[excavator::kJointNames[j]]) {
        const std::string wj = w + "." + excavator::kJointNames[j];
        check_keys(p, wj, {"eta", "beta", "phi"});
        read(p, "eta", m.joint_dynamics[j].eta, wj);
        read(p, "beta", m.joint_dynamics[j].beta, wj);
        read(p, "phi", m.joint_dynamics[j].phi, wj);
      }
    }
  }
  if (const auto n = node["shovel"]) {
    const std::string w = where + ".shovel";
    check_keys(n, w, {"width_m", "capacity_m3", "top_edge", "bottom_edge", "cutting_edge", "payload_center"});
    read(n, "width_m", m.shovel.width, w);
    read(n, "capacity_m3", m.shovel.capacity, w);
    auto segment = [&](const char* key, excavator::Segment& s) {
      if (const auto e = n[key]) {
        if (!e.IsSequence() || e.size() != 2) fail(w + "." + key, "expected two endpoints");
        s = {vec3(e[0], w + "." + key), vec3(e[1], w + "." + key)};
      }
    };
    segment("top_edge", m.shovel.top_edge);
    segment("bottom_edge", m.shovel.bottom_edge);
    segment("cutting_edge", m.shovel.cutting_edge);
    if (const auto p = n["payload_center"]) m.shovel.payload_center = vec3(p, w + ".payload_center");
  }
  read(node, "breakout_force_n", m.breakout_force, where);
  read(node, "plow_width_m", m.plow_width, where);
  read(node, "plow_offset_m", m.plow_offset, where);
  read(node, "plow_min_m", m.plow_min, where);
  read(node, "plow_max_m", m.plow_max, where);
  read(node, "plow_speed_m_s", m.plow_speed, where);
  if (const auto n = node["plow_rake_deg"]) m.plow_rake = soil::deg2rad(scalar<double>(n, where + ".plow_rake_deg"));
  read(node, "dump_threshold", m.dump_threshold, where);
}

inline sensors::SensorSpec parse_sensor(const YAML::Node& node, const std::string& where) {
  check_keys(node, where, {"id", "type", "topic", "location", "noise", "offset", "rotation", "rate", "beams",
                           "fov_deg", "max_range"});
  sensors::SensorSpec s;
  for (const char* required : {"id", "type", "topic", "location"}) {
    if (!node[required]) fail(where, std::string("missing '") + required + "'");
  }
  s.id = scalar<std::string>(node["id"], where + ".id");
  const auto type = scalar<std::string>(node["type"], where + ".type");
  const auto kind = sensors::parse_kind(type);
  if (!kind) fail(where + ".type", "unknown sensor type '" + type + "'");
  s.kind = *kind;
  s.rate = sensors::default_rate(s.kind);
  s.topic = scalar<std::string>(node["topic"], where + ".topic");
  const auto location = scalar<std::string>(node["location"], where + ".location");
  const auto link = excavator::parse_link(location);
  if (!link) fail(where + ".location", "unknown link '" + location + "'");
  s.location = *link;
  if (const auto n = node["noise"]) {
    const auto v = numbers(n, where + ".noise", 2);
    s.noise = {v[0], v[1]};
  }
  if (const auto n = node["offset"]) s.offset = vec3(n, where + ".offset");
  if (const auto n = node["rotation"]) s.rotation = vec3(n, where + ".rotation");
  read(node, "rate", s.rate, where);
  read(node, "beams", s.beams, where);
  if (const auto n = node["fov_deg"]) s.fov = soil::deg2rad(scalar<double>(n, where + ".fov_deg"));
  read(node, "max_range", s.max_range, where);
  s.validate();
  return s;
}

inline YAML::Node load_yaml_file(const std::filesystem::path& path) {
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read '" + path.string() + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("YAML error in '" + path.string() + "': " + e.what());
  }
}

inline ExcavatorSpec parse_excavator(const YAML::Node& node, const std::string& where,
                                     const std::filesystem::path& base_dir) {
  check_keys(node, where, {"id", "type", "offset", "rotation", "sensors", "model", "model_file"});
  ExcavatorSpec e;
  if (!node["id"]) fail(where, "missing 'id'");
  e.id = scalar<std::string>(node["id"], where + ".id");
  if (e.id.empty()) fail(where + ".id", "must not be empty");
  read(node, "type", e.type, where);
  if (e.type != "excavator") fail(where + ".type", "unsupported robot type '" + e.type + "'");
  if (const auto n = node["offset"]) e.offset = vec3(n, where + ".offset");
  if (const auto n = node["rotation"]) e.rotation = vec3(n, where + ".rotation");
  if (e.rotation.x() != 0.0 || e.rotation.y() != 0.0) {
    fail(where + ".rotation", "the tracked base supports yaw (z rotation) only");
  }
  if (node["model"] && node["model_file"]) fail(where, "give either 'model' or 'model_file', not both");
  if (const auto n = node["model_file"]) {
    const auto file = base_dir / scalar<std::string>(n, where + ".model_file");
    parse_model(load_yaml_file(file), e.model, file.string());
  }
  if (const auto n = node["model"]) parse_model(n, e.model, where + ".model");
  e.model.validate();

  if (const auto list = node["sensors"]) {
    if (!list.IsSequence()) fail(where + ".sensors", "expected a list");
    std::set<std::string> ids, topics;
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto s = parse_sensor(list[i], where + ".sensors[" + std::to_string(i) + "]");
      if (!ids.insert(s.id).second) fail(where + ".sensors", "duplicate sensor id '" + s.id + "'");
      if (!topics.insert(s.topic).second) fail(where + ".sensors", "duplicate topic '" + s.topic + "'");
      e.sensors.push_back(std::move(s));
    }
  }
  return e;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const YAML::Node& root, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  ScenarioConfig cfg;
  if (!root || root.IsNull()) return cfg;
  check_keys(root, "scenario", {"seed", "dt", "mode", "terrain", "materials", "excavators", "Excavator"});
  read(root, "seed", cfg.seed, "scenario");
  read(root, "dt", cfg.dt, "scenario");
  if (!(cfg.dt > 0.0)) fail("scenario.dt", "must be > 0");
  if (const auto n = root["mode"]) {
    const auto mode = excavator::parse_mode(scalar<std::string>(n, "scenario.mode"));
    if (!mode) fail("scenario.mode", "expected 'ideal' or 'parameterized'");
    cfg.mode = *mode;
  }
  if (const auto n = root["materials"]) {
    if (!n.IsSequence()) fail("materials", "expected a list");
    for (std::size_t i = 0; i < n.size(); ++i) {
      auto m = parse_material(n[i], "materials[" + std::to_string(i) + "]");
      auto it = std::find_if(cfg.materials.begin(), cfg.materials.end(), [&](auto& x) { return x.name == m.name; });
      if (it != cfg.materials.end()) {
        *it = std::move(m);
      } else {
        cfg.materials.push_back(std::move(m));
      }
    }
  }
  if (const auto n = root["terrain"]) parse_terrain(n, cfg.terrain);
  if (!cfg.find_material(cfg.terrain.material)) {
    fail("terrain.material", "unknown material '" + cfg.terrain.material + "'");
  }
  for (const auto& r : cfg.terrain.regions) {
    if (!cfg.find_material(r.material)) fail("terrain.regions", "unknown material '" + r.material + "'");
  }

  if (root["excavators"] && root["Excavator"]) fail("scenario", "give either 'excavators' or 'Excavator', not both");
  const YAML::Node list = root["excavators"] ? root["excavators"] : root["Excavator"];
  if (list && !list.IsNull()) {
    if (!list.IsSequence()) fail("excavators", "expected a list");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto e = parse_excavator(list[i], "excavators[" + std::to_string(i) + "]", base_dir);
      if (!ids.insert(e.id).second) fail("excavators", "duplicate excavator id '" + e.id + "'");
      const auto& t = cfg.terrain;
      if (e.offset.x() < t.origin.x() || e.offset.x() > t.origin.x() + t.width_m || e.offset.y() < t.origin.y() ||
          e.offset.y() > t.origin.y() + t.length_m) {
        fail("excavators[" + std::to_string(i) + "].offset", "spawn position outside the terrain");
      }
      cfg.excavators.push_back(std::move(e));
    }
  }
  return cfg;
}

inline ScenarioConfig load_scenario(std::string_view yaml_text, const std::filesystem::path& base_dir = ".") {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML syntax error: ") + e.what());
  }
  return parse_scenario(root, base_dir);
}

inline ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read scenario '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return load_scenario(ss.str(), path.parent_path());
}

// Terrain grid described by the config: uniform fill plus material regions.
inline terrain::TerrainGrid build_terrain(const ScenarioConfig& cfg, const terrain::TerrainParams& base = {}) {
  const auto& t = cfg.terrain;
  terrain::TerrainParams p = base;
  p.resolution = t.resolution_m;
  p.cell_height = t.cell_height_m;
  const Eigen::Vector2d origin = t.origin + Eigen::Vector2d::Constant(0.5 * t.resolution_m);
  terrain::TerrainGrid grid(t.nx(), t.ny(), origin, t.bedrock_m, cfg.materials, p);
  auto id_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < cfg.materials.size(); ++i) {
      if (cfg.materials[i].name == name) return static_cast<terrain::MaterialId>(i);
    }
    throw ConfigError("unknown material '" + name + "'");
  };
  const auto base_id = id_of(t.material);
  for (int iy = 0; iy < grid.ny(); ++iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      const Eigen::Vector2d c = grid.column_center(ix, iy);
      auto id = base_id;
      for (const auto& r : t.regions) {
        if (c.x() >= r.x_min && c.x() <= r.x_max && c.y() >= r.y_min && c.y() <= r.y_max) id = id_of(r.material);
      }
      grid.fill_column(ix, iy, t.initial_height_m, id);
    }
  }
  return grid;
}

}  // namespace excasim::scenario
