#pragma once

// Trajectory metrics: RMSE between two tracks, path length, and
// speed/acceleration profiles.
//
// Trajectories load from
//   CSV with a header row, either t,x,y,z (metres) or t,lat,lon,alt
//   (degrees, metres; converted to local ENU), or
//   a JSONL state log, using its odometry records.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "excasim/errors.hpp"
#include "excasim/geo.hpp"

namespace excasim::eval {

struct TrajectoryPoint {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  std::optional<geo::GeodeticCoord> geodetic_origin;  // set when loaded from lat/lon/alt
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

inline double to_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number '" + s + "'");
  }
}

inline void check_times(const Trajectory& tr, const std::string& where) {
  for (std::size_t i = 1; i < tr.points.size(); ++i) {
    if (!(tr.points[i].t > tr.points[i - 1].t)) throw ConfigError(where + ": timestamps must increase");
  }
}

}  // namespace detail

// Geodetic rows are expressed in ENU about `origin`, or about the first row
// when no origin is given.
inline Trajectory parse_csv(std::istream& in, const std::string& name,
                            std::optional<geo::GeodeticCoord> origin = std::nullopt) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = detail::split_csv(line);
  }
  const bool cartesian = header == std::vector<std::string>{"t", "x", "y", "z"};
  const bool geodetic = header == std::vector<std::string>{"t", "lat", "lon", "alt"};
  if (!cartesian && !geodetic) throw ConfigError(name + ": header must be 't,x,y,z' or 't,lat,lon,alt'");

  Trajectory tr;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto cells = detail::split_csv(line);
    if (cells.size() != 4) throw ConfigError(where + ": expected 4 columns");
    double v[4];
    for (int i = 0; i < 4; ++i) v[i] = detail::to_number(cells[static_cast<std::size_t>(i)], where);
    TrajectoryPoint pt{v[0], {v[1], v[2], v[3]}};
    if (geodetic) {
      const auto g = geo::GeodeticCoord::from_degrees(v[1], v[2], v[3]);
      if (!origin) origin = g;
      pt.p = geo::geodetic_to_enu(g, *origin).vector();
    }
    tr.points.push_back(pt);
  }
  if (geodetic) tr.geodetic_origin = origin;
  detail::check_times(tr, name);
  return tr;
}

// Odometry positions from a state log. With several excavators in the log an
// id must be given.
inline Trajectory parse_state_log(std::istream& in, const std::string& name, const std::string& id = "") {
  Trajectory tr;
  std::string line, seen;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.value("type", "") != "odometry") continue;
    const std::string rid = j.value("id", "");
    if (!id.empty() && rid != id) continue;
    if (id.empty() && !seen.empty() && rid != seen) {
      throw ConfigError(name + ": odometry for several excavators; select one id");
    }
    seen = rid;
    const auto& pos = j.at("position");
    tr.points.push_back({j.at("t").get<double>(), {pos.at(0).get<double>(), pos.at(1).get<double>(),
                                                   pos.at(2).get<double>()}});
  }
  detail::check_times(tr, name);
  return tr;
}

inline bool is_state_log(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  return ext == ".jsonl" || ext == ".json";
}

inline Trajectory load_trajectory(const std::string& path, std::optional<geo::GeodeticCoord> origin = std::nullopt,
                                  const std::string& id = "") {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open trajectory '" + path + "'");
  return is_state_log(path) ? parse_state_log(f, path, id) : parse_csv(f, path, origin);
}

// ------------------------------------------------------------------ metrics

inline double path_length(const Trajectory& tr) {
  double len = 0.0;
  for (std::size_t i = 1; i < tr.points.size(); ++i) len += (tr.points[i].p - tr.points[i - 1].p).norm();
  return len;
}

// Piecewise-linear position at time t (clamped to the ends).
inline Eigen::Vector3d position_at(const Trajectory& tr, double t) {
  const auto& pts = tr.points;
  if (pts.empty()) throw std::invalid_argument("empty trajectory");
  if (t <= pts.front().t) return pts.front().p;
  if (t >= pts.back().t) return pts.back().p;
  const auto it = std::upper_bound(pts.begin(), pts.end(), t, [](double v, const auto& p) { return v < p.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  return a.p + w * (b.p - a.p);
}

// Position after travelling distance s along the path (clamped to the ends).
inline Eigen::Vector3d position_at_distance(const Trajectory& tr, const std::vector<double>& cumulative, double s) {
  const auto& pts = tr.points;
  if (s <= 0.0) return pts.front().p;
  if (s >= cumulative.back()) return pts.back().p;
  const auto i = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), s) -
                                          cumulative.begin());
  const double seg = cumulative[i] - cumulative[i - 1];
  const double w = seg > 0.0 ? (s - cumulative[i - 1]) / seg : 0.0;
  return pts[i - 1].p + w * (pts[i].p - pts[i - 1].p);
}

enum class Alignment { kTime, kArcLength };

struct RmseOptions {
  Alignment alignment = Alignment::kTime;
  bool planar = false;     // ignore z
  double step = 0.0;       // resampling step (s or m); 0 picks the finer native spacing
};

struct RmseResult {
  double rmse = 0.0;
  std::size_t samples = 0;
  double ref_length = 0.0;
  double test_length = 0.0;
};

// Both tracks are resampled on a common uniform base (time over the overlap
// window, or distance up to the shorter path) by linear interpolation; the
// error is the Euclidean distance between paired samples.
inline RmseResult rmse(const Trajectory& ref, const Trajectory& test, const RmseOptions& opt = {}) {
  if (ref.points.size() < 2 || test.points.size() < 2) {
    throw std::invalid_argument("rmse needs at least two points per trajectory");
  }
  RmseResult r;
  r.ref_length = path_length(ref);
  r.test_length = path_length(test);

  auto native_step = [](double span, std::size_t n) { return span / static_cast<double>(n - 1); };
  double lo = 0.0, hi = 0.0, step = opt.step;
  std::vector<double> cum_ref, cum_test;
  if (opt.alignment == Alignment::kTime) {
    lo = std::max(ref.points.front().t, test.points.front().t);
    hi = std::min(ref.points.back().t, test.points.back().t);
    if (hi < lo) throw std::invalid_argument("trajectories do not overlap in time");
    if (step <= 0.0) {
      step = std::min(native_step(ref.points.back().t - ref.points.front().t, ref.points.size()),
                      native_step(test.points.back().t - test.points.front().t, test.points.size()));
    }
  } else {
    auto cumulative = [](const Trajectory& tr) {
      std::vector<double> c{0.0};
      for (std::size_t i = 1; i < tr.points.size(); ++i) c.push_back(c.back() + (tr.points[i].p - tr.points[i - 1].p).norm());
      return c;
    };
    cum_ref = cumulative(ref);
    cum_test = cumulative(test);
    hi = std::min(r.ref_length, r.test_length);
    if (step <= 0.0) {
      step = std::min(native_step(r.ref_length, ref.points.size()), native_step(r.test_length, test.points.size()));
    }
  }
  const std::size_t n = step > 0.0 ? static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1 : 1;

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = lo + static_cast<double>(i) * step;
    Eigen::Vector3d a, b;
    if (opt.alignment == Alignment::kTime) {
      a = position_at(ref, u);
      b = position_at(test, u);
    } else {
      a = position_at_distance(ref, cum_ref, u);
      b = position_at_distance(test, cum_test, u);
    }
    Eigen::Vector3d d = a - b;
    if (opt.planar) d.z() = 0.0;
    sum += d.squaredNorm();
  }
  r.samples = n;
  r.rmse = std::sqrt(sum / static_cast<double>(n));
  return r;
}

struct ProfileRow {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  double speed = 0.0;         // m/s
  double acceleration = 0.0;  // m/s^2, rate of change of speed
};

// Central differences inside, one-sided at the ends.
inline std::vector<ProfileRow> profile(const Trajectory& tr) {
  const auto& pts = tr.points;
  const std::size_t n = pts.size();
  std::vector<ProfileRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].t = pts[i].t;
    rows[i].p = pts[i].p;
  }
  if (n < 2) return rows;
  auto span = [&](std::size_t i) { return std::pair{i == 0 ? 0 : i - 1, i + 1 == n ? i : i + 1}; };
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] = span(i);
    rows[i].speed = (pts[b].p - pts[a].p).norm() / (pts[b].t - pts[a].t);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] = span(i);
    rows[i].acceleration = (rows[b].speed - rows[a].speed) / (pts[b].t - pts[a].t);
  }
  return rows;
}

inline std::string format_profile(const std::vector<ProfileRow>& rows) {
  std::string out = "t,x,y,z,speed,acceleration\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.t, r.p.x(), r.p.y(), r.p.z(), r.speed,
                  r.acceleration);
    out += buf;
  }
  return out;
}

}  // namespace excasim::eval
