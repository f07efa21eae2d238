#pragma once

#include <stdexcept>
#include <string>

namespace excasim {

// Scenario, material or command input that cannot be accepted.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid tool geometry (e.g. a soil wedge that cannot form).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfBoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Iterative numerical routine failed to converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace excasim
