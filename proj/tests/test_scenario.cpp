#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "excasim/scenario.hpp"

using namespace excasim;
using namespace excasim::scenario;

namespace {

const std::filesystem::path kScenarios = EXCASIM_SCENARIO_DIR;

constexpr const char* kFigureYaml = R"(
Excavator:
  - id: excavator1
    type: excavator
    offset: [1,1,1]
    rotation: [0,0,0]
    sensors:
      - id: Chassis_IMU
        type: IMU
        topic: /imu_chassis
        location: CHASSIS
        noise: [0.1, 0.01]
        offset: [0.3436, 0.15, -0.2921]
        rotation: [0,-90,90]
)";

std::string with_excavator(const std::string& body) {
  return "excavators:\n  - id: ex\n" + body;
}

void expect_config_error(const std::string& yaml, const std::string& fragment) {
  try {
    load_scenario(yaml);
    ADD_FAILURE() << "no error for:\n" << yaml;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Scenario, FigureConfigFieldForField) {
  const auto cfg = load_scenario(kFigureYaml);
  ASSERT_EQ(cfg.excavators.size(), 1u);
  const auto& e = cfg.excavators[0];
  EXPECT_EQ(e.id, "excavator1");
  EXPECT_EQ(e.type, "excavator");
  EXPECT_EQ(e.offset, Eigen::Vector3d(1, 1, 1));
  EXPECT_EQ(e.rotation, Eigen::Vector3d::Zero());
  ASSERT_EQ(e.sensors.size(), 1u);
  const auto& s = e.sensors[0];
  EXPECT_EQ(s.id, "Chassis_IMU");
  EXPECT_EQ(s.kind, sensors::SensorKind::kImu);
  EXPECT_EQ(s.topic, "/imu_chassis");
  EXPECT_EQ(s.location, excavator::Link::kChassis);
  EXPECT_EQ(s.noise.stddev, 0.1);
  EXPECT_EQ(s.noise.bias, 0.01);
  EXPECT_EQ(s.offset, Eigen::Vector3d(0.3436, 0.15, -0.2921));
  EXPECT_EQ(s.rotation, Eigen::Vector3d(0, -90, 90));
  EXPECT_EQ(s.rate, 100.0);
}

TEST(Scenario, Defaults) {
  const auto cfg = load_scenario(kFigureYaml);
  EXPECT_EQ(cfg.seed, 0u);
  EXPECT_EQ(cfg.dt, 0.01);
  EXPECT_EQ(cfg.mode, excavator::ActuationMode::kParameterized);
  EXPECT_EQ(cfg.terrain.material, "dirt");
  EXPECT_EQ(cfg.terrain.nx(), 200);
  EXPECT_EQ(cfg.terrain.ny(), 200);
}

TEST(Scenario, ShippedFilesLoad) {
  const auto a = load_scenario_file(kScenarios / "single_imu.yaml");
  EXPECT_EQ(a.excavators.size(), 1u);
  const auto b = load_scenario_file(kScenarios / "three_digs.yaml");
  ASSERT_EQ(b.excavators.size(), 1u);
  EXPECT_EQ(b.seed, 7u);
  EXPECT_EQ(b.excavators[0].sensors.size(), 6u);
}

TEST(Scenario, LowercaseListKeyAndEmptyList) {
  const auto cfg = load_scenario("excavators: []\n");
  EXPECT_TRUE(cfg.excavators.empty());
  EXPECT_TRUE(load_scenario("").excavators.empty());
}

TEST(Scenario, BuildTerrainPlacesRegions) {
  const auto cfg = load_scenario(R"(
terrain:
  width_m: 4
  length_m: 2
  resolution_m: 0.5
  initial_height_m: 1.5
  material: dirt
  origin: [10, 20]
  regions:
    - {material: sand, x_min: 12, x_max: 14, y_min: 20, y_max: 22}
)");
  const auto g = build_terrain(cfg);
  EXPECT_EQ(g.nx(), 8);
  EXPECT_EQ(g.ny(), 4);
  EXPECT_DOUBLE_EQ(g.x_min(), 10.0);
  EXPECT_DOUBLE_EQ(g.y_max(), 22.0);
  EXPECT_NEAR(g.column_height(0, 0), 1.5, 1e-12);
  EXPECT_EQ(g.material(g.top_material(0, 0)).name, "dirt");
  EXPECT_EQ(g.material(g.top_material(7, 3)).name, "sand");
  const double area = 0.25;
  EXPECT_NEAR(g.total_mass(), 1.5 * area * 16 * (soil::dirt().density + soil::sand().density), 1e-6);
}

TEST(Scenario, MaterialOverrideAndModelKeys) {
  const auto cfg = load_scenario(R"(
materials:
  - {name: dirt, young_modulus_pa: 7.0e6, friction_angle_deg: 30, cohesion_pa: 5000, density_kg_m3: 1700}
  - {name: clay, young_modulus_pa: 3.0e6, friction_angle_deg: 20, cohesion_pa: 20000, density_kg_m3: 1800}
excavators:
  - id: ex
    offset: [5, 5, 1]
    model:
      link_lengths_m: [2.5, 1.4, 0.6]
      breakout_force_n: 30000
      joint_dynamics:
        arm: {eta: 0.2, beta: 30, phi: 0}
)");
  EXPECT_EQ(cfg.find_material("dirt")->young_modulus, 7.0e6);
  EXPECT_NEAR(cfg.find_material("clay")->friction_angle, 20.0 * std::numbers::pi / 180.0, 1e-15);
  const auto& m = cfg.excavators[0].model;
  EXPECT_EQ(m.link_lengths[1], 1.4);
  EXPECT_EQ(m.breakout_force, 30000.0);
  EXPECT_EQ(m.joint_dynamics[2].beta, 30.0);
}

TEST(Scenario, Rejections) {
  expect_config_error("excavators:\n  - id: a\n  - id: a\n", "duplicate excavator id");
  expect_config_error(with_excavator("    offset: [1, 2]\n"), "expected 3 values");
  expect_config_error(with_excavator("    colour: red\n"), "unknown key 'colour'");
  expect_config_error(with_excavator("    sensors:\n      - {id: s, type: IMU, topic: /s, location: WHEEL}\n"),
                      "unknown link 'WHEEL'");
  expect_config_error(with_excavator("    sensors:\n      - {id: s, type: LIDAR, topic: /s, location: CAB}\n"),
                      "unknown sensor type");
  expect_config_error(with_excavator("    sensors:\n      - {id: s, type: IMU, topic: /s, location: CAB, noise: [-1, 0]}\n"),
                      "noise");
  expect_config_error(with_excavator("    sensors:\n      - {id: s, type: IMU, topic: /s, location: CAB}\n"
                                     "      - {id: s, type: ODOMETRY, topic: /t, location: CHASSIS}\n"),
                      "duplicate sensor id");
  expect_config_error("terrain:\n  material: peat\n", "unknown material 'peat'");
  expect_config_error("dt: 0\n", "dt");
  expect_config_error("mode: turbo\n", "mode");
  expect_config_error(with_excavator("    offset: [500, 1, 1]\n"), "outside the terrain");
  expect_config_error(with_excavator("    rotation: [10, 0, 0]\n"), "yaw");
  expect_config_error("excavators: [\n", "YAML");
  EXPECT_THROW(load_scenario_file(kScenarios / "missing.yaml"), ConfigError);
}

TEST(Scenario, ModelFileRelativeToScenario) {
  const auto dir = std::filesystem::temp_directory_path() / "excasim_model_file";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "machine.yaml") << "machine_mass_kg: 5200\ntrack_speed_max_m_s: 1.1\n";
  std::ofstream(dir / "scene.yaml") << "excavators:\n  - id: ex\n    model_file: machine.yaml\n";
  const auto cfg = load_scenario_file(dir / "scene.yaml");
  EXPECT_EQ(cfg.excavators[0].model.machine_mass, 5200.0);
  EXPECT_EQ(cfg.excavators[0].model.track_speed_max, 1.1);
  std::filesystem::remove_all(dir);
}
