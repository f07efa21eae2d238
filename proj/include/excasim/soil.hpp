#pragma once

// Terramechanics: soil materials, earthmoving resistance on a flat tool,
// Mohr-Coulomb failure, track thrust-slip and elastic sinkage.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "excasim/errors.hpp"

namespace excasim::soil {

inline constexpr double kDefaultSlipModulus = 0.05;
inline constexpr double kDefaultSwellFactor = 1.25;

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

struct SoilMaterial {
  std::string name;
  double young_modulus = 0.0;   // Pa
  double friction_angle = 0.0;  // rad
  double cohesion = 0.0;        // Pa
  double density = 0.0;         // kg/m^3 (in-bank, compaction 1)
  double swell_factor = kDefaultSwellFactor;
  double slip_modulus = kDefaultSlipModulus;

  void validate() const {
    auto fail = [&](const std::string& what) {
      throw ConfigError("material '" + name + "': " + what);
    };
    if (name.empty()) throw ConfigError("material without a name");
    if (!(young_modulus > 0.0)) fail("young_modulus must be > 0");
    if (!(friction_angle >= 0.0 && friction_angle < std::numbers::pi / 2.0)) {
      fail("friction_angle must be in [0, 90) deg");
    }
    if (!(cohesion >= 0.0)) fail("cohesion must be >= 0");
    if (!(density > 0.0)) fail("density must be > 0");
    if (!(swell_factor >= 1.0)) fail("swell_factor must be >= 1");
    if (!(slip_modulus > 0.0)) fail("slip_modulus must be > 0");
  }
};

// Young's moduli for the three presets are the reported simulation values;
// cohesion, friction angle and density are typical textbook figures.
inline SoilMaterial dirt() { return {"dirt", 6.5e6, deg2rad(30.0), 10e3, 1600.0}; }
inline SoilMaterial gravel() { return {"gravel", 4.6e6, deg2rad(38.0), 1e3, 1900.0}; }
inline SoilMaterial sand() { return {"sand", 4.0e6, deg2rad(30.0), 0.0, 1700.0}; }

inline std::vector<SoilMaterial> presets() { return {dirt(), gravel(), sand()}; }

inline std::optional<SoilMaterial> find_preset(const std::string& name) {
  for (auto& m : presets()) {
    if (m.name == name) return m;
  }
  return std::nullopt;
}

struct ToolEngagement {
  double width = 0.0;       // m
  double depth = 0.0;       // m below the local surface
  double rake_angle = 0.0;  // rad, cutting face vs horizontal
  double surcharge = 0.0;   // Pa
};

// Dimensionless factors of the passive soil wedge for a failure plane at
// `failure_angle` from horizontal (smooth tool, no adhesion).
struct NFactors {
  double gamma = 0.0;
  double cohesion = 0.0;
  double surcharge = 0.0;
};

// Open interval of admissible failure-plane angles: (0, upper). Throws when empty.
inline double failure_angle_upper_bound(double rake_angle, double friction_angle) {
  if (!(rake_angle > 0.0 && rake_angle < std::numbers::pi)) {
    throw GeometryError("rake angle " + std::to_string(rake_angle) + " rad outside (0, pi)");
  }
  const double upper = std::min(std::numbers::pi / 2.0, std::numbers::pi - rake_angle - friction_angle);
  if (!(upper > 0.0)) {
    throw GeometryError("degenerate soil wedge: rake angle " + std::to_string(rake_angle) +
                        " rad + friction angle " + std::to_string(friction_angle) + " rad >= pi");
  }
  return upper;
}

inline NFactors n_factors(double rake_angle, double failure_angle, double friction_angle) {
  const double a = rake_angle, b = failure_angle, phi = friction_angle;
  const double s_abp = std::sin(a + b + phi);
  NFactors n;
  n.surcharge = std::sin(a + b) * std::sin(b + phi) / (std::sin(a) * std::sin(b) * s_abp);
  n.gamma = 0.5 * n.surcharge;
  n.cohesion = std::cos(phi) / (std::sin(b) * s_abp);
  return n;
}

// Resistance per unit width for a fixed failure plane.
inline double wedge_resistance(const ToolEngagement& t, const SoilMaterial& m, double gravity,
                               double failure_angle) {
  const NFactors n = n_factors(t.rake_angle, failure_angle, m.friction_angle);
  const double d = t.depth;
  return m.density * gravity * d * d * n.gamma + m.cohesion * d * n.cohesion + t.surcharge * d * n.surcharge;
}

// Failure-plane angle minimizing the wedge resistance (golden-section search).
inline double critical_failure_angle(const ToolEngagement& t, const SoilMaterial& m, double gravity) {
  const double upper = failure_angle_upper_bound(t.rake_angle, m.friction_angle);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = upper;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = wedge_resistance(t, m, gravity, x1);
  double f2 = wedge_resistance(t, m, gravity, x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = wedge_resistance(t, m, gravity, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = wedge_resistance(t, m, gravity, x2);
    }
  }
  return 0.5 * (lo + hi);
}

// Earthmoving separation force on a flat tool (N):
//   F = w (rho g d^2 N_gamma + c d N_c + q d N_q)
// with N-factors from the passive wedge at its critical failure angle.
inline double fee_force(const ToolEngagement& t, const SoilMaterial& m, double gravity) {
  if (!(t.width > 0.0) || !(t.depth >= 0.0)) {
    throw std::invalid_argument("tool engagement requires width > 0 and depth >= 0");
  }
  // Validates the geometry even when the result is trivially zero.
  failure_angle_upper_bound(t.rake_angle, m.friction_angle);
  if (t.depth == 0.0) return 0.0;
  const double beta = critical_failure_angle(t, m, gravity);
  return t.width * wedge_resistance(t, m, gravity, beta);
}

// Mohr-Coulomb shear strength on the cut face at the given normal stress (Pa).
inline double shear_failure_threshold(double rake_angle, const SoilMaterial& m, double normal_stress) {
  if (!(rake_angle > 0.0 && rake_angle < std::numbers::pi)) {
    throw std::invalid_argument("rake angle outside (0, pi)");
  }
  return m.cohesion + std::max(0.0, normal_stress) * std::tan(m.friction_angle);
}

inline double max_track_thrust(const SoilMaterial& m, double normal_load, double contact_area) {
  return contact_area * m.cohesion + normal_load * std::tan(m.friction_angle);
}

// Delivered thrust H = H_max (1 - exp(-slip / K)).
inline double track_thrust(const SoilMaterial& m, double normal_load, double contact_area, double slip) {
  if (!(normal_load >= 0.0) || !(contact_area > 0.0)) {
    throw std::invalid_argument("track thrust requires normal_load >= 0 and contact_area > 0");
  }
  const double s = std::clamp(slip, 0.0, 1.0);
  return max_track_thrust(m, normal_load, contact_area) * (1.0 - std::exp(-s / m.slip_modulus));
}

// Slip at which the delivered thrust equals `required`; 1 when the soil cannot
// deliver it (track spins in place).
inline double equilibrium_slip(const SoilMaterial& m, double normal_load, double contact_area, double required) {
  if (required <= 0.0) return 0.0;
  const double h_max = max_track_thrust(m, normal_load, contact_area);
  if (required >= h_max) return 1.0;
  return std::min(1.0, -m.slip_modulus * std::log1p(-required / h_max));
}

// Linear elastic settlement z = p L / E (m).
inline double sinkage(double contact_pressure, const SoilMaterial& m, double characteristic_length) {
  if (!(contact_pressure >= 0.0)) throw std::invalid_argument("contact pressure must be >= 0");
  return contact_pressure * characteristic_length / m.young_modulus;
}

}  // namespace excasim::soil
