#pragma once

// Excavator model: slew + 3-link planar manipulator on a tracked base.
//
// Frames (all right-handed, z up):
//   base    ground contact under the slew axis, x along the heading
//   cab     base rotated by the slew angle about z, origin at the boom pivot
//           (0, 0, slew_axis_height)
//   boom/arm/bucket  each rotated about the cab's -y axis, so a positive
//           joint angle lifts the link's x axis toward +z; the next link's
//           origin sits at the previous link's tip (x = link length).
// The end effector is the bucket tip: bucket frame translated by the bucket
// link length.

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "excasim/errors.hpp"
#include "excasim/rng.hpp"
#include "excasim/soil.hpp"
#include "excasim/terrain.hpp"

namespace excasim::excavator {

inline constexpr double kStandardGravity = 9.81;
inline constexpr int kNumJoints = 4;
inline constexpr int kNumPlanarLinks = 3;
// Commands closer than this to the active command do not restart the
// velocity transient.
inline constexpr double kCommandDeadband = 0.05;
inline constexpr double kRollingResistance = 0.05;

enum class Joint : int { kSlew = 0, kBoom = 1, kArm = 2, kBucket = 3 };
inline constexpr std::array<const char*, kNumJoints> kJointNames = {"slew", "boom", "arm", "bucket"};

enum class Link { kChassis, kCab, kBoom, kArm, kBucket };

inline std::optional<Link> parse_link(const std::string& name) {
  if (name == "CHASSIS") return Link::kChassis;
  if (name == "CAB") return Link::kCab;
  if (name == "BOOM") return Link::kBoom;
  if (name == "ARM") return Link::kArm;
  if (name == "BUCKET") return Link::kBucket;
  return std::nullopt;
}

enum class ActuationMode { kIdeal, kParameterized };

inline std::optional<ActuationMode> parse_mode(const std::string& s) {
  if (s == "ideal") return ActuationMode::kIdeal;
  if (s == "parameterized") return ActuationMode::kParameterized;
  return std::nullopt;
}

using JointVector = std::array<double, kNumJoints>;

struct JointDynamicsParams {
  double eta = 20.0;  // 1/s, oscillation frequency
  double beta = 6.0;  // 1/s, decay rate
  double phi = 0.0;   // rad, phase
};

struct Segment {
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();

  Eigen::Vector3d mid() const { return 0.5 * (a + b); }
  double length() const { return (b - a).norm(); }
};

// Edges are given in the bucket frame (origin at the bucket joint, x toward
// the tip, y across the width). The bucket opens toward its -z side.
struct ShovelGeometry {
  double width = 0.55;
  Segment top_edge;
  Segment bottom_edge;
  Segment cutting_edge;
  double capacity = 0.11;  // m^3
  Eigen::Vector3d payload_center = Eigen::Vector3d::Zero();
};

struct JointLimits {
  double min = 0.0;
  double max = 0.0;
};

struct ExcavatorModel {
  std::array<double, kNumPlanarLinks> link_lengths{};  // boom, arm, bucket (m)
  std::array<double, kNumPlanarLinks> link_masses{};   // kg
  std::array<double, kNumPlanarLinks> link_com_offsets{};  // m along each link
  std::array<JointLimits, kNumJoints> joint_limits{};
  double slew_axis_height = 1.0;
  double track_gauge = 1.3;   // centre-to-centre
  double track_length = 1.9;
  double track_width = 0.3;
  double machine_mass = 4000.0;
  double track_speed_max = 0.8;  // m/s at full input
  JointVector omega_max{};       // rad/s at full input
  std::array<JointDynamicsParams, kNumJoints> joint_dynamics{};  // slew entry unused
  ShovelGeometry shovel;
  double breakout_force = 30e3;  // N, largest force the bucket can apply to soil
  double plow_width = 1.55;
  double plow_offset = 1.3;       // m ahead of the slew axis
  double plow_min = -0.3;         // blade height range relative to track ground
  double plow_max = 0.3;
  double plow_speed = 0.2;        // m/s at full input
  double plow_rake = soil::deg2rad(75.0);
  double dump_threshold = 0.7;    // bucket dumps once its opening points this far down (-n_z)

  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("excavator model: " + what); };
    for (int i = 0; i < kNumPlanarLinks; ++i) {
      if (!(link_lengths[i] > 0.0)) fail("link lengths must be > 0");
      if (!(link_masses[i] > 0.0)) fail("link masses must be > 0");
    }
    for (int j = 0; j < kNumJoints; ++j) {
      if (!(joint_limits[j].min < joint_limits[j].max)) {
        fail(std::string("joint limits of ") + kJointNames[j] + " must satisfy min < max");
      }
      if (!(omega_max[j] > 0.0)) fail("omega_max must be > 0");
    }
    for (int j = 1; j < kNumJoints; ++j) {
      if (!(joint_dynamics[j].eta > 0.0) || !(joint_dynamics[j].beta > 0.0)) {
        fail("joint dynamics require eta > 0 and beta > 0");
      }
    }
    if (!(slew_axis_height > 0.0) || !(track_gauge > 0.0) || !(track_length > 0.0) || !(track_width > 0.0) ||
        !(machine_mass > 0.0) || !(track_speed_max > 0.0)) {
      fail("base dimensions, mass and track speed must be > 0");
    }
    if (!(shovel.width > 0.0) || !(shovel.capacity > 0.0)) fail("shovel width and capacity must be > 0");
    for (const Segment* s : {&shovel.top_edge, &shovel.bottom_edge, &shovel.cutting_edge}) {
      if (!(s->length() > 0.0)) fail("shovel edges must be non-degenerate");
    }
    if (!(breakout_force > 0.0) || !(plow_width > 0.0) || !(plow_min < plow_max) || !(plow_speed > 0.0)) {
      fail("breakout force, plow width, plow range and plow speed must be valid");
    }
    if (!(plow_rake > 0.0 && plow_rake < std::numbers::pi)) fail("plow rake must be in (0, 180) deg");
  }
};

inline ShovelGeometry default_shovel(double bucket_length, double width) {
  ShovelGeometry s;
  s.width = width;
  const double hw = 0.5 * width;
  s.cutting_edge = {{bucket_length, -hw, 0.0}, {bucket_length, hw, 0.0}};
  s.top_edge = {{0.15, -hw, -0.05}, {0.15, hw, -0.05}};
  s.bottom_edge = {{0.55 * bucket_length, -hw, 0.28}, {0.55 * bucket_length, hw, 0.28}};
  s.capacity = 0.11;
  s.payload_center = {0.5 * bucket_length, 0.0, 0.0};
  return s;
}

// Representative 4-tonne compact excavator. Values are illustrative, not
// manufacturer data.
inline ExcavatorModel compact_4t() {
  ExcavatorModel m;
  m.link_lengths = {2.5, 1.4, 0.6};
  m.link_masses = {180.0, 110.0, 90.0};
  m.link_com_offsets = {1.2, 0.7, 0.3};
  m.joint_limits = {{{-2.0 * std::numbers::pi, 2.0 * std::numbers::pi}, {-1.2, 1.2}, {-2.8, 0.9}, {-2.8, 2.0}}};
  m.omega_max = {0.8, 0.5, 0.6, 0.8};
  m.joint_dynamics = {};
  m.shovel = default_shovel(m.link_lengths[2], 0.55);
  return m;
}

struct BasePose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double heading = 0.0;  // rad, yaw about +z
};

struct JointCommand {
  double input = 0.0;            // active normalized command
  double target = 0.0;           // steady-state velocity of the active command
  double previous_target = 0.0;  // steady-state velocity before the last change
  double start = 0.0;            // s, when the active command began
};

struct Controls {
  double slew = 0.0;
  double boom = 0.0;
  double arm = 0.0;
  double bucket = 0.0;
  double track_left = 0.0;
  double track_right = 0.0;
  double plow = 0.0;

  double joint(int j) const {
    switch (j) {
      case 0: return slew;
      case 1: return boom;
      case 2: return arm;
      default: return bucket;
    }
  }
};

struct ExcavatorState {
  BasePose base_pose;
  double sinkage = 0.0;
  JointVector joint_angles{};
  JointVector joint_velocities{};
  JointVector joint_efforts{};
  std::array<JointCommand, kNumJoints> commands{};
  double track_speed_left = 0.0;   // m/s, effective
  double track_speed_right = 0.0;
  double linear_velocity = 0.0;    // m/s along heading
  double yaw_rate = 0.0;           // rad/s
  std::vector<double> payload;     // kg per material id
  double plow_height = 0.3;
  double tool_drag = 0.0;          // N, horizontal soil reaction; set by bucket_sweep, plow_sweep adds to it
  double time = 0.0;

  JointVector previous_angles{};
  std::optional<Segment> last_cutting_edge;  // world frame
  std::optional<Segment> last_plow_edge;

  double bucket_mass() const {
    double m = 0.0;
    for (double p : payload) m += p;
    return m;
  }
  double dig_phase_start(int joint) const { return commands[joint].start; }
};

// ---------------------------------------------------------------- kinematics

inline Eigen::Isometry3d base_to_world(const BasePose& p) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translate(Eigen::Vector3d(p.x, p.y, p.z));
  t.rotate(Eigen::AngleAxisd(p.heading, Eigen::Vector3d::UnitZ()));
  return t;
}

inline void check_limits(const ExcavatorModel& model, const JointVector& q) {
  for (int j = 0; j < kNumJoints; ++j) {
    if (!(q[j] >= model.joint_limits[j].min && q[j] <= model.joint_limits[j].max)) {
      throw std::out_of_range(std::string("joint '") + kJointNames[j] + "' angle " + std::to_string(q[j]) +
                              " outside its limits");
    }
  }
}

// Frames of cab, boom, arm and bucket in the base frame.
struct LinkFrames {
  Eigen::Isometry3d cab;
  Eigen::Isometry3d boom;
  Eigen::Isometry3d arm;
  Eigen::Isometry3d bucket;
  Eigen::Isometry3d tip;

  const Eigen::Isometry3d& planar(int i) const { return i == 0 ? boom : (i == 1 ? arm : bucket); }
};

inline LinkFrames link_frames(const ExcavatorModel& model, const JointVector& q) {
  LinkFrames f;
  f.cab = Eigen::Isometry3d::Identity();
  f.cab.translate(Eigen::Vector3d(0.0, 0.0, model.slew_axis_height));
  f.cab.rotate(Eigen::AngleAxisd(q[0], Eigen::Vector3d::UnitZ()));
  const Eigen::Vector3d axis = -Eigen::Vector3d::UnitY();
  f.boom = f.cab * Eigen::AngleAxisd(q[1], axis);
  f.arm = f.boom * Eigen::Translation3d(model.link_lengths[0], 0.0, 0.0) * Eigen::AngleAxisd(q[2], axis);
  f.bucket = f.arm * Eigen::Translation3d(model.link_lengths[1], 0.0, 0.0) * Eigen::AngleAxisd(q[3], axis);
  f.tip = f.bucket * Eigen::Translation3d(model.link_lengths[2], 0.0, 0.0);
  return f;
}

// End-effector (bucket tip) pose in the base frame.
inline Eigen::Isometry3d forward_kinematics(const ExcavatorModel& model, const JointVector& q) {
  check_limits(model, q);
  return link_frames(model, q).tip;
}

inline Eigen::Isometry3d link_frame(const LinkFrames& f, Link link) {
  switch (link) {
    case Link::kChassis: return Eigen::Isometry3d::Identity();
    case Link::kCab: return f.cab;
    case Link::kBoom: return f.boom;
    case Link::kArm: return f.arm;
    case Link::kBucket: return f.bucket;
  }
  return Eigen::Isometry3d::Identity();
}

// Number of manipulator joints (slew first) that move `link`.
inline int joints_driving(Link link) {
  switch (link) {
    case Link::kChassis: return 0;
    case Link::kCab: return 1;
    case Link::kBoom: return 2;
    case Link::kArm: return 3;
    case Link::kBucket: return 4;
  }
  return 0;
}

// Joint axes and axis points in the base frame.
struct JointAxes {
  std::array<Eigen::Vector3d, kNumJoints> axis;
  std::array<Eigen::Vector3d, kNumJoints> origin;
};

inline JointAxes joint_axes(const LinkFrames& f) {
  JointAxes a;
  a.axis[0] = Eigen::Vector3d::UnitZ();
  a.origin[0] = Eigen::Vector3d::Zero();
  const Eigen::Vector3d planar_axis = f.cab.linear() * -Eigen::Vector3d::UnitY();
  for (int i = 0; i < kNumPlanarLinks; ++i) {
    a.axis[i + 1] = planar_axis;
    a.origin[i + 1] = f.planar(i).translation();
  }
  return a;
}

// Geometric Jacobian columns (linear part) for a point moved by the first
// `n_joints` joints.
inline std::array<Eigen::Vector3d, kNumJoints> point_jacobian(const JointAxes& axes, const Eigen::Vector3d& point,
                                                              int n_joints = kNumJoints) {
  std::array<Eigen::Vector3d, kNumJoints> cols;
  for (int j = 0; j < kNumJoints; ++j) {
    cols[j] = j < n_joints ? Eigen::Vector3d(axes.axis[j].cross(point - axes.origin[j])) : Eigen::Vector3d::Zero();
  }
  return cols;
}

// Static holding torques (N m) against gravity for the links and a payload at
// the bucket's payload centre.
inline JointVector joint_torque(const ExcavatorModel& model, const JointVector& q, double bucket_mass,
                                double gravity = kStandardGravity) {
  check_limits(model, q);
  const LinkFrames f = link_frames(model, q);
  const JointAxes axes = joint_axes(f);
  JointVector tau{};
  auto add_load = [&](const Eigen::Vector3d& point, double mass, int n_joints) {
    const auto cols = point_jacobian(axes, point, n_joints);
    for (int j = 0; j < kNumJoints; ++j) tau[j] += mass * gravity * cols[j].z();
  };
  for (int i = 0; i < kNumPlanarLinks; ++i) {
    add_load(f.planar(i) * Eigen::Vector3d(model.link_com_offsets[i], 0.0, 0.0), model.link_masses[i], i + 2);
  }
  if (bucket_mass != 0.0) add_load(f.bucket * model.shovel.payload_center, bucket_mass, kNumJoints);
  return tau;
}

// ------------------------------------------------------------ joint dynamics

inline double steady_state_velocity(const ExcavatorModel& model, int joint, double input) {
  return std::clamp(input, -1.0, 1.0) * model.omega_max[joint];
}

// omega(t) = omega_ss (1 + sin(eta t + phi) e^{-beta t}), omega_ss = u * omega_max.
inline double joint_velocity_profile(double t_since_command, double input, int joint, const ExcavatorModel& model) {
  if (!(t_since_command >= 0.0)) throw std::invalid_argument("time since command must be >= 0");
  const auto& p = model.joint_dynamics[joint];
  const double w_ss = steady_state_velocity(model, joint, input);
  return w_ss * (1.0 + std::sin(p.eta * t_since_command + p.phi) * std::exp(-p.beta * t_since_command));
}

namespace detail {
// Antiderivative of e^{-beta t} sin(eta t + phi).
inline double damped_sine_integral(const JointDynamicsParams& p, double t) {
  const double s = std::sin(p.eta * t + p.phi), c = std::cos(p.eta * t + p.phi);
  return -std::exp(-p.beta * t) * (p.beta * s + p.eta * c) / (p.beta * p.beta + p.eta * p.eta);
}
}  // namespace detail

// Velocity of a transient from `from` to `to` steady states: the target plus
// the step size times the damped sine. From rest this is exactly the profile above.
inline double transient_velocity(const JointDynamicsParams& p, double from, double to, double t) {
  return to + (to - from) * std::sin(p.eta * t + p.phi) * std::exp(-p.beta * t);
}

inline double transient_displacement(const JointDynamicsParams& p, double from, double to, double t0, double t1) {
  return to * (t1 - t0) +
         (to - from) * (detail::damped_sine_integral(p, t1) - detail::damped_sine_integral(p, t0));
}

// Advances the four manipulator joints by dt. Slew always follows the ideal
// target-speed controller; the other joints do so only in kIdeal mode.
inline void step_joints(ExcavatorState& s, const ExcavatorModel& model, const Controls& u, double dt,
                        ActuationMode mode) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  s.previous_angles = s.joint_angles;
  for (int j = 0; j < kNumJoints; ++j) {
    const double input = std::clamp(u.joint(j), -1.0, 1.0);
    JointCommand& cmd = s.commands[j];
    if (std::abs(input - cmd.input) > kCommandDeadband) {
      cmd.previous_target = cmd.target;
      cmd.target = steady_state_velocity(model, j, input);
      cmd.input = input;
      cmd.start = s.time;
    }

    double dq = 0.0, w = 0.0;
    if (mode == ActuationMode::kIdeal || j == 0) {
      w = steady_state_velocity(model, j, input);
      dq = w * dt;
    } else {
      const auto& p = model.joint_dynamics[j];
      const double t0 = s.time - cmd.start;
      dq = transient_displacement(p, cmd.previous_target, cmd.target, t0, t0 + dt);
      w = transient_velocity(p, cmd.previous_target, cmd.target, t0 + dt);
    }

    const auto& lim = model.joint_limits[j];
    double q = s.joint_angles[j] + dq;
    if (q >= lim.max) {
      q = lim.max;
      if (w > 0.0) w = 0.0;
    } else if (q <= lim.min) {
      q = lim.min;
      if (w < 0.0) w = 0.0;
    }
    s.joint_angles[j] = q;
    s.joint_velocities[j] = w;
  }
}

// ------------------------------------------------------------------- tracks

struct TrackGeometry {
  Eigen::Vector2d left_center;
  Eigen::Vector2d right_center;
  Eigen::Vector2d forward;
  Eigen::Vector2d lateral;
};

inline TrackGeometry track_geometry(const ExcavatorModel& model, const BasePose& pose) {
  TrackGeometry g;
  g.forward = {std::cos(pose.heading), std::sin(pose.heading)};
  g.lateral = {-g.forward.y(), g.forward.x()};
  const Eigen::Vector2d c(pose.x, pose.y);
  g.left_center = c + 0.5 * model.track_gauge * g.lateral;
  g.right_center = c - 0.5 * model.track_gauge * g.lateral;
  return g;
}

// Columns under a track footprint, sampled at half-resolution spacing.
inline std::vector<terrain::CellIndex> track_cells(const terrain::TerrainGrid& grid, const ExcavatorModel& model,
                                                   const Eigen::Vector2d& center, const TrackGeometry& g) {
  std::vector<terrain::CellIndex> cells;
  const double step = 0.5 * grid.resolution();
  const int nl = std::max(1, static_cast<int>(std::ceil(model.track_length / step)));
  const int nw = std::max(1, static_cast<int>(std::ceil(model.track_width / step)));
  for (int i = 0; i <= nl; ++i) {
    for (int k = 0; k <= nw; ++k) {
      const Eigen::Vector2d p = center + (-0.5 + double(i) / nl) * model.track_length * g.forward +
                                (-0.5 + double(k) / nw) * model.track_width * g.lateral;
      if (!grid.contains(p.x(), p.y())) continue;
      const auto c = grid.cell_at(p.x(), p.y());
      if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
    }
  }
  return cells;
}

inline double machine_weight(const ExcavatorModel& model, const ExcavatorState& s, double gravity) {
  return (model.machine_mass + s.bucket_mass()) * gravity;
}

// Ground pressure under each track (Pa).
inline double track_pressure(const ExcavatorModel& model, const ExcavatorState& s, double gravity) {
  return machine_weight(model, s, gravity) / (2.0 * model.track_length * model.track_width);
}

// Differential-drive step. Each track delivers its commanded speed reduced by
// the equilibrium slip at which the soil's thrust-slip curve meets the
// required thrust (rolling resistance plus tool drag). Moving tracks compact
// the columns beneath them.
inline void step_tracks(ExcavatorState& s, const ExcavatorModel& model, const Controls& u,
                        terrain::TerrainGrid& grid, double dt, double gravity = kStandardGravity) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  const TrackGeometry g0 = track_geometry(model, s.base_pose);
  const double weight = machine_weight(model, s, gravity);
  const double area = model.track_length * model.track_width;
  const double required = 0.5 * (kRollingResistance * weight + s.tool_drag);

  auto material_under = [&](const Eigen::Vector2d& c) -> const soil::SoilMaterial& {
    const auto idx = grid.cell_at(c.x(), c.y());
    return grid.material(grid.top_material(idx.ix, idx.iy));
  };
  const auto& mat_l = material_under(g0.left_center);
  const auto& mat_r = material_under(g0.right_center);

  const double cmd_l = std::clamp(u.track_left, -1.0, 1.0) * model.track_speed_max;
  const double cmd_r = std::clamp(u.track_right, -1.0, 1.0) * model.track_speed_max;
  const double slip_l = cmd_l == 0.0 ? 0.0 : soil::equilibrium_slip(mat_l, 0.5 * weight, area, required);
  const double slip_r = cmd_r == 0.0 ? 0.0 : soil::equilibrium_slip(mat_r, 0.5 * weight, area, required);
  s.track_speed_left = cmd_l * (1.0 - slip_l);
  s.track_speed_right = cmd_r * (1.0 - slip_r);

  const double v = 0.5 * (s.track_speed_left + s.track_speed_right);
  const double w = (s.track_speed_right - s.track_speed_left) / model.track_gauge;
  s.linear_velocity = v;
  s.yaw_rate = w;

  // Midpoint heading: exact for straight lines and in-place turns.
  const double mid_heading = s.base_pose.heading + 0.5 * w * dt;
  s.base_pose.x += v * std::cos(mid_heading) * dt;
  s.base_pose.y += v * std::sin(mid_heading) * dt;
  s.base_pose.heading += w * dt;
  if (grid.nx() > 0 && grid.ny() > 0) {
    s.base_pose.x = std::clamp(s.base_pose.x, grid.x_min(), grid.x_max());
    s.base_pose.y = std::clamp(s.base_pose.y, grid.y_min(), grid.y_max());
  }

  const TrackGeometry g = track_geometry(model, s.base_pose);
  const double pressure = track_pressure(model, s, gravity);
  if (grid.nx() > 0 && grid.ny() > 0) {
    if (s.track_speed_left != 0.0) grid.compact(track_cells(grid, model, g.left_center, g), pressure);
    if (s.track_speed_right != 0.0) grid.compact(track_cells(grid, model, g.right_center, g), pressure);
  }

  const auto& ml = material_under(g.left_center);
  const auto& mr = material_under(g.right_center);
  s.sinkage = 0.5 * (soil::sinkage(pressure, ml, model.track_width) + soil::sinkage(pressure, mr, model.track_width));
  const double ground = 0.5 * (grid.surface_height_clamped(g.left_center.x(), g.left_center.y()) +
                               grid.surface_height_clamped(g.right_center.x(), g.right_center.y()));
  s.base_pose.z = ground - s.sinkage;
}

// ------------------------------------------------------- bucket and plow

struct ToolContact {
  bool engaged = false;
  bool stalled = false;
  double depth = 0.0;
  double rake_angle = 0.0;
  double force = 0.0;  // N, earthmoving resistance
  Eigen::Vector3d reaction = Eigen::Vector3d::Zero();  // soil force on the tool, world frame
  double removed_mass = 0.0;
  double captured_mass = 0.0;
  double spilled_mass = 0.0;
  double dumped_mass = 0.0;
};

namespace detail {

struct CutTarget {
  terrain::CellIndex cell;
  double z;
};

// Lowest edge height reached over each column while the edge sweeps from
// `from` to `to`.
inline std::vector<CutTarget> swept_cuts(const terrain::TerrainGrid& grid, const Segment& from, const Segment& to) {
  std::vector<CutTarget> targets;
  const double spacing = 0.5 * grid.resolution();
  const double travel = std::max((to.a - from.a).norm(), (to.b - from.b).norm());
  const int n_sweep = std::max(1, static_cast<int>(std::ceil(travel / spacing)));
  const int n_span = std::max(1, static_cast<int>(std::ceil(to.length() / spacing)));
  for (int i = 0; i <= n_sweep; ++i) {
    const double s = double(i) / n_sweep;
    const Eigen::Vector3d a = from.a + s * (to.a - from.a);
    const Eigen::Vector3d b = from.b + s * (to.b - from.b);
    for (int k = 0; k <= n_span; ++k) {
      const Eigen::Vector3d p = a + (double(k) / n_span) * (b - a);
      if (!grid.contains(p.x(), p.y())) continue;
      const auto c = grid.cell_at(p.x(), p.y());
      if (grid.column_height(c.ix, c.iy) <= p.z()) continue;
      auto it = std::find_if(targets.begin(), targets.end(), [&](const CutTarget& t) { return t.cell == c; });
      if (it == targets.end()) {
        targets.push_back({c, p.z()});
      } else {
        it->z = std::min(it->z, p.z());
      }
    }
  }
  return targets;
}

inline Segment transform(const Eigen::Isometry3d& t, const Segment& s) { return {t * s.a, t * s.b}; }

// Rake of a cutting face (vector from the cutting edge back along the face)
// against the direction of travel, clamped into the admissible wedge range.
inline double rake_angle(const Eigen::Vector3d& face, const Eigen::Vector3d& travel, double friction_angle) {
  Eigen::Vector2d dir(travel.x(), travel.y());
  if (dir.norm() < 1e-12) dir = Eigen::Vector2d(face.x(), face.y());
  dir = dir.norm() < 1e-12 ? Eigen::Vector2d(1.0, 0.0) : dir.normalized();
  const double back = -(face.x() * dir.x() + face.y() * dir.y());
  const double alpha = std::atan2(face.z(), back);
  const double lo = 0.05, hi = std::numbers::pi - friction_angle - 0.05;
  return std::clamp(alpha, lo, std::max(lo, hi));
}

}  // namespace detail

struct ToolFrames {
  Segment cutting_edge;  // world
  Eigen::Vector3d face;  // world, from cutting edge toward bottom of the bucket
  Eigen::Vector3d opening;  // world unit normal of the bucket opening
  Eigen::Vector3d payload_center;
};

inline ToolFrames bucket_world(const ExcavatorModel& model, const ExcavatorState& s) {
  const Eigen::Isometry3d wb = base_to_world(s.base_pose);
  const LinkFrames f = link_frames(model, s.joint_angles);
  const Eigen::Isometry3d bucket = wb * f.bucket;
  ToolFrames t;
  t.cutting_edge = detail::transform(bucket, model.shovel.cutting_edge);
  t.face = bucket.linear() * (model.shovel.bottom_edge.mid() - model.shovel.cutting_edge.mid());
  t.opening = bucket.linear() * -Eigen::Vector3d::UnitZ();
  t.payload_center = bucket * model.shovel.payload_center;
  return t;
}

inline Segment plow_world(const ExcavatorModel& model, const ExcavatorState& s) {
  const Eigen::Isometry3d wb = base_to_world(s.base_pose);
  const double z = s.sinkage + s.plow_height;
  const double hw = 0.5 * model.plow_width;
  return {wb * Eigen::Vector3d(model.plow_offset, -hw, z), wb * Eigen::Vector3d(model.plow_offset, hw, z)};
}

// Bucket capacity in kg for the given material (loose volume at the swollen density).
inline double bucket_capacity_mass(const ExcavatorModel& model, const soil::SoilMaterial& m) {
  return model.shovel.capacity * m.density / m.swell_factor;
}

namespace detail {

// Earthmoving reaction and cut for one tool edge sweep.
inline ToolContact engage(const terrain::TerrainGrid& grid, const std::vector<CutTarget>& targets, double width,
                          const Eigen::Vector3d& face, const Eigen::Vector3d& travel, double surcharge,
                          double max_force, double gravity) {
  ToolContact c;
  if (targets.empty()) return c;
  double depth = 0.0;
  terrain::CellIndex deepest = targets.front().cell;
  for (const auto& t : targets) {
    const double d = grid.column_height(t.cell.ix, t.cell.iy) - t.z;
    if (d > depth) {
      depth = d;
      deepest = t.cell;
    }
  }
  if (!(depth > 0.0)) return c;
  const auto& mat = grid.material(grid.top_material(deepest.ix, deepest.iy));
  c.engaged = true;
  c.depth = depth;
  c.rake_angle = rake_angle(face, travel, mat.friction_angle);
  c.force = soil::fee_force({width, depth, c.rake_angle, surcharge}, mat, gravity);

  // The soil fails when the shear stress the tool can mobilise on its cut
  // face reaches the Mohr-Coulomb strength at the mid-depth normal stress.
  const double face_area = width * depth / std::sin(c.rake_angle);
  const double tool_stress = max_force / face_area;
  const double normal_stress = mat.density * gravity * 0.5 * depth + surcharge;
  c.stalled = tool_stress < soil::shear_failure_threshold(c.rake_angle, mat, normal_stress);
  if (c.stalled) c.force = std::min(c.force, max_force);

  Eigen::Vector3d dir = travel;
  if (dir.norm() < 1e-12) dir = -face;
  dir.normalize();
  c.reaction = -c.force * dir;
  return c;
}

}  // namespace detail

// Bucket-soil interaction for one step. The cutting edge is swept from its
// previous world position to the current one; columns it passes below are cut
// down to the edge. Cut soil fills the bucket up to capacity and the overflow
// spawns as particles. A bucket whose opening faces downward dumps its payload.
// Joint efforts are set to the gravity torques plus the soil reaction mapped
// through the Jacobian transpose.
inline ToolContact bucket_sweep(ExcavatorState& s, const ExcavatorModel& model, terrain::TerrainGrid& grid,
                                std::vector<terrain::SoilParticle>& particles, double dt, CounterRng& rng,
                                double gravity = kStandardGravity) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  ToolContact contact;
  ToolFrames tool = bucket_world(model, s);
  const Segment from = s.last_cutting_edge.value_or(tool.cutting_edge);
  const Eigen::Vector3d travel = (tool.cutting_edge.mid() - from.mid()) / dt;

  if (grid.nx() > 0 && grid.ny() > 0) {
    const auto targets = detail::swept_cuts(grid, from, tool.cutting_edge);
    const double edge_to_lip = (model.shovel.cutting_edge.mid() - model.shovel.top_edge.mid()).norm();
    const double surcharge = s.bucket_mass() * gravity / (model.shovel.width * edge_to_lip);
    contact = detail::engage(grid, targets, model.shovel.width, tool.face, travel, surcharge,
                             model.breakout_force, gravity);
    if (contact.engaged && contact.stalled) {
      // Bucket cannot break the soil: the arm holds its previous pose.
      for (int j = 1; j < kNumJoints; ++j) {
        s.joint_angles[j] = s.previous_angles[j];
        s.joint_velocities[j] = 0.0;
      }
      tool = bucket_world(model, s);
    } else if (contact.engaged) {
      std::vector<terrain::CutRequest> cuts;
      cuts.reserve(targets.size());
      for (const auto& t : targets) {
        const double d = grid.column_height(t.cell.ix, t.cell.iy) - t.z;
        if (d > 0.0) cuts.push_back({t.cell, d});
      }
      terrain::RemovedSoil removed = grid.remove(cuts);
      contact.removed_mass = removed.total();

      terrain::RemovedSoil spill;
      for (std::size_t i = 0; i < removed.by_material.size(); ++i) {
        const double m = removed.by_material[i];
        if (!(m > 0.0)) continue;
        const auto id = static_cast<terrain::MaterialId>(i);
        const double room = std::max(0.0, bucket_capacity_mass(model, grid.material(id)) - s.bucket_mass());
        const double take = std::min(room, m);
        if (take > 0.0) {
          if (s.payload.size() <= i) s.payload.resize(i + 1, 0.0);
          s.payload[i] += take;
          contact.captured_mass += take;
        }
        if (m - take > 0.0) spill.add(id, m - take);
      }
      contact.spilled_mass = spill.total();
      if (contact.spilled_mass > 0.0) {
        auto ps = grid.make_particles(spill, tool.cutting_edge.mid(), rng);
        particles.insert(particles.end(), ps.begin(), ps.end());
      }
    }
  }

  // Dump when the opening faces down.
  if (s.bucket_mass() > 0.0 && -tool.opening.z() > model.dump_threshold) {
    terrain::RemovedSoil load;
    for (std::size_t i = 0; i < s.payload.size(); ++i) {
      if (s.payload[i] > 0.0) load.add(static_cast<terrain::MaterialId>(i), s.payload[i]);
    }
    contact.dumped_mass = load.total();
    auto ps = grid.make_particles(load, tool.payload_center, rng);
    particles.insert(particles.end(), ps.begin(), ps.end());
    s.payload.assign(s.payload.size(), 0.0);
  }

  // Efforts: gravity holding torques plus the soil reaction on the tip.
  JointVector tau = joint_torque(model, s.joint_angles, s.bucket_mass(), gravity);
  if (contact.engaged) {
    const Eigen::Isometry3d bw = base_to_world(s.base_pose).inverse();
    const LinkFrames f = link_frames(model, s.joint_angles);
    const auto cols = point_jacobian(joint_axes(f), bw * tool.cutting_edge.mid());
    const Eigen::Vector3d reaction_base = bw.linear() * contact.reaction;
    for (int j = 0; j < kNumJoints; ++j) tau[j] -= cols[j].dot(reaction_base);
  }
  s.joint_efforts = tau;
  s.last_cutting_edge = tool.cutting_edge;
  s.tool_drag = std::hypot(contact.reaction.x(), contact.reaction.y());
  return contact;
}

// Plow blade: raised/lowered by the plow channel, cuts columns it sweeps below
// and pushes the cut soil ahead as particles.
inline ToolContact plow_sweep(ExcavatorState& s, const ExcavatorModel& model, const Controls& u,
                              terrain::TerrainGrid& grid, std::vector<terrain::SoilParticle>& particles, double dt,
                              CounterRng& rng, double gravity = kStandardGravity) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  s.plow_height = std::clamp(s.plow_height + std::clamp(u.plow, -1.0, 1.0) * model.plow_speed * dt, model.plow_min,
                             model.plow_max);
  ToolContact contact;
  const Segment edge = plow_world(model, s);
  const Segment from = s.last_plow_edge.value_or(edge);
  s.last_plow_edge = edge;
  if (grid.nx() == 0 || grid.ny() == 0) return contact;
  const Eigen::Vector3d travel = (edge.mid() - from.mid()) / dt;
  const auto targets = detail::swept_cuts(grid, from, edge);
  const Eigen::Vector3d fwd(std::cos(s.base_pose.heading), std::sin(s.base_pose.heading), 0.0);
  // Blade face leans back from its edge at the plow rake.
  const Eigen::Vector3d face = -std::cos(model.plow_rake) * fwd + std::sin(model.plow_rake) * Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d push = travel.norm() > 1e-12 ? travel : fwd;
  contact = detail::engage(grid, targets, model.plow_width, face, push, 0.0,
                           std::numeric_limits<double>::infinity(), gravity);
  if (!contact.engaged) return contact;
  std::vector<terrain::CutRequest> cuts;
  for (const auto& t : targets) {
    const double d = grid.column_height(t.cell.ix, t.cell.iy) - t.z;
    if (d > 0.0) cuts.push_back({t.cell, d});
  }
  const terrain::RemovedSoil removed = grid.remove(cuts);
  contact.removed_mass = removed.total();
  contact.spilled_mass = contact.removed_mass;
  const Eigen::Vector3d ahead = edge.mid() + grid.resolution() * (travel.dot(fwd) < 0.0 ? -fwd : fwd);
  auto ps = grid.make_particles(removed, ahead, rng);
  particles.insert(particles.end(), ps.begin(), ps.end());
  s.tool_drag += std::hypot(contact.reaction.x(), contact.reaction.y());
  return contact;
}

// ------------------------------------------------------------------ spawn

inline ExcavatorState spawn_state(const BasePose& pose, const ExcavatorModel& model) {
  ExcavatorState s;
  s.base_pose = pose;
  s.plow_height = model.plow_max;
  for (int j = 0; j < kNumJoints; ++j) {
    s.joint_angles[j] = std::clamp(0.0, model.joint_limits[j].min, model.joint_limits[j].max);
  }
  s.previous_angles = s.joint_angles;
  s.joint_efforts = joint_torque(model, s.joint_angles, 0.0);
  return s;
}

}  // namespace excasim::excavator
