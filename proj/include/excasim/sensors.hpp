#pragma once

// Simulated sensors mounted on excavator links.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "excasim/errors.hpp"
#include "excasim/excavator.hpp"
#include "excasim/rng.hpp"
#include "excasim/terrain.hpp"

namespace excasim::sensors {

enum class SensorKind { kImu, kOdometry, kJointState, kTransform, kBucketMass, kRange };

inline std::optional<SensorKind> parse_kind(const std::string& s) {
  if (s == "IMU") return SensorKind::kImu;
  if (s == "ODOMETRY") return SensorKind::kOdometry;
  if (s == "JOINT_STATE") return SensorKind::kJointState;
  if (s == "TRANSFORM") return SensorKind::kTransform;
  if (s == "BUCKET_MASS") return SensorKind::kBucketMass;
  if (s == "RANGE") return SensorKind::kRange;
  return std::nullopt;
}

inline const char* kind_name(SensorKind k) {
  switch (k) {
    case SensorKind::kImu: return "imu";
    case SensorKind::kOdometry: return "odometry";
    case SensorKind::kJointState: return "joint_state";
    case SensorKind::kTransform: return "transform";
    case SensorKind::kBucketMass: return "bucket_mass";
    case SensorKind::kRange: return "range";
  }
  return "unknown";
}

inline double default_rate(SensorKind k) { return k == SensorKind::kImu ? 100.0 : 50.0; }

// noise = [stddev, bias], applied per axis in sensor units.
struct NoiseModel {
  double stddev = 0.0;
  double bias = 0.0;
};

struct SensorSpec {
  std::string id;
  SensorKind kind = SensorKind::kImu;
  std::string topic;
  excavator::Link location = excavator::Link::kChassis;
  NoiseModel noise;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();    // m, link frame
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();  // deg, intrinsic x-y-z
  double rate = 100.0;                                 // Hz
  int beams = 16;
  double fov = std::numbers::pi / 2.0;  // rad
  double max_range = 20.0;              // m

  void validate() const {
    auto fail = [&](const std::string& what) { throw ConfigError("sensor '" + id + "': " + what); };
    if (id.empty()) throw ConfigError("sensor without id");
    if (!(noise.stddev >= 0.0)) fail("noise stddev must be >= 0");
    if (!(rate > 0.0)) fail("rate must be > 0");
    if (kind == SensorKind::kRange) {
      if (beams < 1) fail("beams must be >= 1");
      if (!(fov >= 0.0)) fail("fov must be >= 0");
      if (!(max_range > 0.0)) fail("max_range must be > 0");
    }
  }

  Eigen::Isometry3d mount() const {
    constexpr double k = std::numbers::pi / 180.0;
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.translate(offset);
    t.rotate(Eigen::AngleAxisd(rotation.x() * k, Eigen::Vector3d::UnitX()) *
             Eigen::AngleAxisd(rotation.y() * k, Eigen::Vector3d::UnitY()) *
             Eigen::AngleAxisd(rotation.z() * k, Eigen::Vector3d::UnitZ()));
    return t;
  }
};

// Pose and rates of a sensor mount, world frame.
struct MountKinematics {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d linear_acceleration = Eigen::Vector3d::Zero();
};

// Pose and velocities of the mount from the excavator state. Acceleration is
// left zero; the caller differentiates velocities over time.
inline MountKinematics mount_kinematics(const excavator::ExcavatorModel& model, const excavator::ExcavatorState& s,
                                        const SensorSpec& spec) {
  using namespace excavator;
  const Eigen::Isometry3d wb = base_to_world(s.base_pose);
  const LinkFrames f = link_frames(model, s.joint_angles);
  MountKinematics k;
  const Eigen::Isometry3d in_base = link_frame(f, spec.location) * spec.mount();
  k.pose = wb * in_base;

  const int n = joints_driving(spec.location);
  const JointAxes axes = joint_axes(f);
  const auto cols = point_jacobian(axes, in_base.translation(), n);
  Eigen::Vector3d v_base = Eigen::Vector3d::Zero();
  Eigen::Vector3d w_base = Eigen::Vector3d::UnitZ() * s.yaw_rate;
  for (int j = 0; j < n; ++j) {
    v_base += cols[j] * s.joint_velocities[j];
    w_base += axes.axis[j] * s.joint_velocities[j];
  }
  const Eigen::Vector3d r_world = wb.linear() * in_base.translation();
  const Eigen::Vector3d chassis_v(s.linear_velocity * std::cos(s.base_pose.heading),
                                  s.linear_velocity * std::sin(s.base_pose.heading), 0.0);
  k.linear_velocity = chassis_v + Eigen::Vector3d::UnitZ().cross(r_world) * s.yaw_rate + wb.linear() * v_base;
  k.angular_velocity = wb.linear() * w_base;
  return k;
}

struct ImuSample {
  double timestamp = 0.0;
  Eigen::Vector3d linear_acceleration = Eigen::Vector3d::Zero();  // specific force, sensor frame
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();     // sensor frame
};

// Specific force (acceleration minus gravity) and angular rate in the sensor
// frame, each axis corrupted by bias + N(0, stddev). A level sensor at rest
// reads +g on its up axis.
inline ImuSample imu_sample(const MountKinematics& k, const SensorSpec& spec, CounterRng& rng, double timestamp,
                            double gravity = excavator::kStandardGravity) {
  ImuSample out;
  out.timestamp = timestamp;
  const Eigen::Matrix3d r_sw = k.pose.linear().transpose();
  const Eigen::Vector3d specific_force = k.linear_acceleration + Eigen::Vector3d(0.0, 0.0, gravity);
  out.linear_acceleration = r_sw * specific_force;
  out.angular_velocity = r_sw * k.angular_velocity;
  for (int i = 0; i < 3; ++i) out.linear_acceleration[i] += spec.noise.bias + spec.noise.stddev * rng.normal();
  for (int i = 0; i < 3; ++i) out.angular_velocity[i] += spec.noise.bias + spec.noise.stddev * rng.normal();
  return out;
}

struct OdometrySample {
  double timestamp = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();   // body frame
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // body frame
};

inline OdometrySample odometry_sample(const excavator::ExcavatorState& s) {
  OdometrySample o;
  o.timestamp = s.time;
  o.position = {s.base_pose.x, s.base_pose.y, s.base_pose.z};
  o.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(s.base_pose.heading, Eigen::Vector3d::UnitZ()));
  o.linear_velocity = {s.linear_velocity, 0.0, 0.0};
  o.angular_velocity = {0.0, 0.0, s.yaw_rate};
  return o;
}

struct JointStateSample {
  double timestamp = 0.0;
  excavator::JointVector position{};
  excavator::JointVector velocity{};
  excavator::JointVector effort{};
};

inline JointStateSample joint_state_sample(const excavator::ExcavatorState& s) {
  return {s.time, s.joint_angles, s.joint_velocities, s.joint_efforts};
}

// End-effector pose relative to the base.
struct TransformSample {
  double timestamp = 0.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
};

inline TransformSample transform_sample(const excavator::ExcavatorState& s, const excavator::ExcavatorModel& model) {
  const Eigen::Isometry3d t = excavator::forward_kinematics(model, s.joint_angles);
  return {s.time, t.translation(), Eigen::Quaterniond(t.linear())};
}

struct BucketMassSample {
  double timestamp = 0.0;
  double mass = 0.0;
};

inline BucketMassSample bucket_mass_sample(const excavator::ExcavatorState& s) { return {s.time, s.bucket_mass()}; }

// Distance along one ray to the heightfield, or max_range when nothing is hit
// (including rays leaving the grid). Marches at max(resolution / 4, 1 cm),
// halves the bracketing step once and interpolates the height gap linearly.
inline double ray_distance(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, const terrain::TerrainGrid& grid,
                           double max_range) {
  if (grid.nx() == 0 || grid.ny() == 0) return max_range;
  auto gap = [&](double t, double& g) {
    const Eigen::Vector3d p = origin + t * dir;
    if (!grid.contains(p.x(), p.y())) return false;
    g = p.z() - grid.surface_height(p.x(), p.y());
    return true;
  };
  double g_prev = 0.0;
  if (!gap(0.0, g_prev)) return max_range;
  if (g_prev <= 0.0) return 0.0;
  const double step = std::max(grid.resolution() / 4.0, 0.01);
  double t_prev = 0.0;
  while (t_prev < max_range) {
    const double t = std::min(t_prev + step, max_range);
    double g = 0.0;
    if (!gap(t, g)) return max_range;
    if (g <= 0.0) {
      double lo = t_prev, hi = t, g_lo = g_prev, g_hi = g;
      const double mid = 0.5 * (lo + hi);
      double g_mid = 0.0;
      if (gap(mid, g_mid)) {
        if (g_mid > 0.0) {
          lo = mid;
          g_lo = g_mid;
        } else {
          hi = mid;
          g_hi = g_mid;
        }
      }
      const double hit = lo + (hi - lo) * g_lo / (g_lo - g_hi);
      return std::clamp(hit, 0.0, max_range);
    }
    t_prev = t;
    g_prev = g;
  }
  return max_range;
}

// Beam elevations sweep the sensor's x-z plane from +fov/2 down to -fov/2.
inline Eigen::Vector3d beam_direction(int i, int n_beams, double fov) {
  const double e = n_beams == 1 ? 0.0 : 0.5 * fov - fov * double(i) / double(n_beams - 1);
  return {std::cos(e), 0.0, std::sin(e)};
}

inline std::vector<double> range_scan(const Eigen::Isometry3d& mount_pose, const terrain::TerrainGrid& grid, int n_beams,
                                      double fov, double max_range) {
  if (n_beams < 1) throw std::invalid_argument("range scan needs at least one beam");
  std::vector<double> ranges(static_cast<std::size_t>(n_beams));
  for (int i = 0; i < n_beams; ++i) {
    const Eigen::Vector3d dir = mount_pose.linear() * beam_direction(i, n_beams, fov);
    ranges[static_cast<std::size_t>(i)] = ray_distance(mount_pose.translation(), dir, grid, max_range);
  }
  return ranges;
}

}  // namespace excasim::sensors
