#pragma once

// JSONL command and state logs.
//
// Command log, one ControlFrame per line (missing channels are 0):
//   {"t":1.5,"id":"excavator1","slew":0,"boom":0.6,"arm":0,"bucket":0,
//    "track_left":0,"track_right":0,"plow":0}
//
// State log, one record per line. Keys always appear in this order:
//   t, id, topic, type, <payload keys of the record type>
// Floats are printed with 9 significant digits.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "excasim/errors.hpp"
#include "excasim/excavator.hpp"
#include "excasim/sensors.hpp"

namespace excasim::log {

struct ControlFrame {
  double timestamp = 0.0;
  std::string excavator_id;
  excavator::Controls channels;
};

inline constexpr std::array<const char*, 7> kChannelNames = {"slew",       "boom",        "arm", "bucket",
                                                             "track_left", "track_right", "plow"};

inline double& channel(excavator::Controls& c, std::size_t i) {
  switch (i) {
    case 0: return c.slew;
    case 1: return c.boom;
    case 2: return c.arm;
    case 3: return c.bucket;
    case 4: return c.track_left;
    case 5: return c.track_right;
    default: return c.plow;
  }
}

inline double channel(const excavator::Controls& c, std::size_t i) {
  return channel(const_cast<excavator::Controls&>(c), i);
}

inline ControlFrame parse_control_frame(const std::string& line, std::size_t line_no = 0) {
  const std::string where = "command log line " + std::to_string(line_no);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  ControlFrame f;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "t") {
      if (!it->is_number()) throw ConfigError(where + ": 't' must be a number");
      f.timestamp = it->get<double>();
    } else if (key == "id") {
      if (!it->is_string()) throw ConfigError(where + ": 'id' must be a string");
      f.excavator_id = it->get<std::string>();
    } else {
      const auto pos = std::find(kChannelNames.begin(), kChannelNames.end(), key);
      if (pos == kChannelNames.end()) throw ConfigError(where + ": unknown key '" + key + "'");
      if (!it->is_number()) throw ConfigError(where + ": channel '" + key + "' must be a number");
      const double v = it->get<double>();
      if (!(v >= -1.0 && v <= 1.0)) throw ConfigError(where + ": channel '" + key + "' outside [-1, 1]");
      channel(f.channels, static_cast<std::size_t>(pos - kChannelNames.begin())) = v;
    }
  }
  if (!j.contains("t") || !j.contains("id")) throw ConfigError(where + ": 't' and 'id' are required");
  if (!std::isfinite(f.timestamp)) throw ConfigError(where + ": non-finite timestamp");
  return f;
}

// Reads a command log; timestamps must be non-decreasing per excavator.
inline std::vector<ControlFrame> read_command_log(std::istream& in) {
  std::vector<ControlFrame> frames;
  std::map<std::string, double> last;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = parse_control_frame(line, line_no);
    auto [it, inserted] = last.emplace(f.excavator_id, f.timestamp);
    if (!inserted) {
      if (f.timestamp < it->second) {
        throw ConfigError("command log line " + std::to_string(line_no) + ": timestamp goes backwards for '" +
                          f.excavator_id + "'");
      }
      it->second = f.timestamp;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

// ------------------------------------------------------------------ writer

// Builds one JSON object with keys in insertion order.
class JsonLine {
 public:
  JsonLine& key(const char* k) {
    out_ += first_ ? "{\"" : ",\"";
    first_ = false;
    out_ += k;
    out_ += "\":";
    return *this;
  }

  JsonLine& number(double v) {
    if (!std::isfinite(v)) {
      out_ += "null";
      return *this;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out_ += buf;
    return *this;
  }

  JsonLine& string(const std::string& s) {
    out_ += '"';
    for (const char c : s) {
      if (c == '"' || c == '\\') out_ += '\\';
      if (static_cast<unsigned char>(c) < 0x20) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "\\u%04x", c);
        out_ += buf;
        continue;
      }
      out_ += c;
    }
    out_ += '"';
    return *this;
  }

  template <typename Range>
  JsonLine& array(const Range& values) {
    out_ += '[';
    bool first = true;
    for (const double v : values) {
      if (!first) out_ += ',';
      first = false;
      number(v);
    }
    out_ += ']';
    return *this;
  }

  template <typename Range>
  JsonLine& strings(const Range& values) {
    out_ += '[';
    bool first = true;
    for (const auto& v : values) {
      if (!first) out_ += ',';
      first = false;
      string(v);
    }
    out_ += ']';
    return *this;
  }

  JsonLine& field(const char* k, double v) { return key(k).number(v); }
  JsonLine& field(const char* k, const std::string& v) { return key(k).string(v); }
  JsonLine& vec(const char* k, const Eigen::Vector3d& v) {
    return key(k).array(std::array<double, 3>{v.x(), v.y(), v.z()});
  }
  // ROS order: x, y, z, w.
  JsonLine& quat(const char* k, const Eigen::Quaterniond& q) {
    return key(k).array(std::array<double, 4>{q.x(), q.y(), q.z(), q.w()});
  }

  std::string str() const { return out_ + (first_ ? "{}" : "}"); }

 private:
  std::string out_;
  bool first_ = true;
};

inline std::string format_control_frame(const ControlFrame& f) {
  JsonLine j;
  j.field("t", f.timestamp).field("id", f.excavator_id);
  for (std::size_t i = 0; i < kChannelNames.size(); ++i) j.field(kChannelNames[i], channel(f.channels, i));
  return j.str();
}

// A serialized state record plus its ordering key.
struct StateRecord {
  double timestamp = 0.0;
  std::string excavator_id;
  std::string topic;
  std::string line;

  friend bool operator<(const StateRecord& a, const StateRecord& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.excavator_id != b.excavator_id) return a.excavator_id < b.excavator_id;
    return a.topic < b.topic;
  }
};

inline JsonLine record_header(double t, const std::string& id, const std::string& topic, const char* type) {
  JsonLine j;
  j.field("t", t).field("id", id).field("topic", topic).field("type", std::string(type));
  return j;
}

inline StateRecord make_record(double t, const std::string& id, const std::string& topic, JsonLine&& body) {
  return {t, id, topic, body.str()};
}

inline StateRecord imu_record(const std::string& id, const std::string& topic, const sensors::ImuSample& s) {
  auto j = record_header(s.timestamp, id, topic, "imu");
  j.vec("linear_acceleration", s.linear_acceleration).vec("angular_velocity", s.angular_velocity);
  return make_record(s.timestamp, id, topic, std::move(j));
}

inline StateRecord odometry_record(const std::string& id, const std::string& topic, const sensors::OdometrySample& s) {
  auto j = record_header(s.timestamp, id, topic, "odometry");
  j.vec("position", s.position)
      .quat("orientation", s.orientation)
      .vec("linear_velocity", s.linear_velocity)
      .vec("angular_velocity", s.angular_velocity);
  return make_record(s.timestamp, id, topic, std::move(j));
}

inline StateRecord joint_state_record(const std::string& id, const std::string& topic,
                                      const sensors::JointStateSample& s) {
  auto j = record_header(s.timestamp, id, topic, "joint_state");
  j.key("name").strings(excavator::kJointNames);
  j.key("position").array(s.position).key("velocity").array(s.velocity).key("effort").array(s.effort);
  return make_record(s.timestamp, id, topic, std::move(j));
}

inline StateRecord transform_record(const std::string& id, const std::string& topic,
                                    const sensors::TransformSample& s) {
  auto j = record_header(s.timestamp, id, topic, "transform");
  j.vec("translation", s.translation).quat("rotation", s.rotation);
  return make_record(s.timestamp, id, topic, std::move(j));
}

inline StateRecord bucket_mass_record(const std::string& id, const std::string& topic,
                                      const sensors::BucketMassSample& s) {
  auto j = record_header(s.timestamp, id, topic, "bucket_mass");
  j.field("mass", s.mass);
  return make_record(s.timestamp, id, topic, std::move(j));
}

inline StateRecord range_record(double t, const std::string& id, const std::string& topic,
                                const std::vector<double>& ranges) {
  auto j = record_header(t, id, topic, "range");
  j.key("ranges").array(ranges);
  return make_record(t, id, topic, std::move(j));
}

}  // namespace excasim::log
