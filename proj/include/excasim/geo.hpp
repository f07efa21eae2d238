#pragma once

// WGS-84 geodetic / ECEF / local ENU conversions.

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "excasim/errors.hpp"

namespace excasim::geo {

namespace wgs84 {
inline constexpr double kSemiMajorAxis = 6378137.0;
inline constexpr double kInverseFlattening = 298.257223563;
inline constexpr double kFlattening = 1.0 / kInverseFlattening;
inline constexpr double kSemiMinorAxis = kSemiMajorAxis * (1.0 - kFlattening);
// First and second eccentricity squared.
inline constexpr double kE2 = kFlattening * (2.0 - kFlattening);
inline constexpr double kEp2 = kE2 / ((1.0 - kFlattening) * (1.0 - kFlattening));
}  // namespace wgs84

inline constexpr int kMaxLatitudeIterations = 10;
inline constexpr double kLatitudeTolerance = 1e-12;

// Wraps an angle into (-pi, pi].
inline double wrap_pi(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

struct GeodeticCoord {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad
  double altitude = 0.0;   // m above the ellipsoid

  // Validates latitude and wraps longitude into (-pi, pi].
  static GeodeticCoord from_radians(double lat, double lon, double alt) {
    if (!(std::abs(lat) <= std::numbers::pi / 2.0) || !std::isfinite(lon) || !std::isfinite(alt)) {
      throw ConfigError("invalid geodetic coordinate: latitude " + std::to_string(lat) + " rad");
    }
    return {lat, wrap_pi(lon), alt};
  }

  static GeodeticCoord from_degrees(double lat_deg, double lon_deg, double alt) {
    constexpr double k = std::numbers::pi / 180.0;
    return from_radians(lat_deg * k, lon_deg * k, alt);
  }
};

struct EcefCoord {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vector() const { return {x, y, z}; }
};

struct EnuCoord {
  double east = 0.0;
  double north = 0.0;
  double up = 0.0;
  GeodeticCoord origin;

  Eigen::Vector3d vector() const { return {east, north, up}; }
};

inline EcefCoord geodetic_to_ecef(const GeodeticCoord& g) {
  using namespace wgs84;
  const double sin_lat = std::sin(g.latitude);
  const double cos_lat = std::cos(g.latitude);
  const double n = kSemiMajorAxis / std::sqrt(1.0 - kE2 * sin_lat * sin_lat);
  return {(n + g.altitude) * cos_lat * std::cos(g.longitude),
          (n + g.altitude) * cos_lat * std::sin(g.longitude),
          (n * (1.0 - kE2) + g.altitude) * sin_lat};
}

// Rows are the east, north and up unit vectors of the local tangent frame at `origin`.
inline Eigen::Matrix3d ecef_to_enu_rotation(const GeodeticCoord& origin) {
  const double sl = std::sin(origin.latitude), cl = std::cos(origin.latitude);
  const double so = std::sin(origin.longitude), co = std::cos(origin.longitude);
  Eigen::Matrix3d r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

inline EnuCoord ecef_to_enu(const EcefCoord& p, const GeodeticCoord& origin) {
  const Eigen::Vector3d d = p.vector() - geodetic_to_ecef(origin).vector();
  const Eigen::Vector3d enu = ecef_to_enu_rotation(origin) * d;
  return {enu.x(), enu.y(), enu.z(), origin};
}

inline EcefCoord enu_to_ecef(const EnuCoord& p) {
  const Eigen::Vector3d d = ecef_to_enu_rotation(p.origin).transpose() * p.vector();
  const Eigen::Vector3d e = geodetic_to_ecef(p.origin).vector() + d;
  return {e.x(), e.y(), e.z()};
}

// Bowring's parametric-latitude iteration. Throws ConvergenceError when the
// latitude update has not settled below kLatitudeTolerance within the cap.
inline GeodeticCoord ecef_to_geodetic(const EcefCoord& p) {
  using namespace wgs84;
  const double rho = std::hypot(p.x, p.y);
  const double lon = rho > 0.0 ? std::atan2(p.y, p.x) : 0.0;

  double beta = std::atan2(p.z, (1.0 - kFlattening) * rho);
  double lat = 0.0;
  bool converged = false;
  for (int i = 0; i < kMaxLatitudeIterations; ++i) {
    const double sb = std::sin(beta), cb = std::cos(beta);
    const double next = std::atan2(p.z + kEp2 * kSemiMinorAxis * sb * sb * sb,
                                   rho - kE2 * kSemiMajorAxis * cb * cb * cb);
    const double delta = std::abs(next - lat);
    lat = next;
    beta = std::atan2((1.0 - kFlattening) * std::sin(lat), std::cos(lat));
    if (i > 0 && delta < kLatitudeTolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("geodetic latitude iteration did not converge");
  }

  const double sl = std::sin(lat), cl = std::cos(lat);
  const double alt = rho * cl + p.z * sl - kSemiMajorAxis * std::sqrt(1.0 - kE2 * sl * sl);
  return {lat, wrap_pi(lon), alt};
}

inline GeodeticCoord enu_to_geodetic(const EnuCoord& p) { return ecef_to_geodetic(enu_to_ecef(p)); }

inline EnuCoord geodetic_to_enu(const GeodeticCoord& g, const GeodeticCoord& origin) {
  return ecef_to_enu(geodetic_to_ecef(g), origin);
}

}  // namespace excasim::geo
