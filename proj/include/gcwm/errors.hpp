#pragma once

#include <stdexcept>
#include <string>

namespace gcwm {

// Error classes map onto the CLI exit-code contract:
//   input_error -> 2, convergence_error -> 3, sizing_error -> 4.
struct input_error : std::runtime_error {
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct convergence_error : std::runtime_error {
  explicit convergence_error(const std::string& msg)
      : std::runtime_error(msg) {}
};

struct sizing_error : std::runtime_error {
  explicit sizing_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by the M-step when a component's posterior mass drops below the
// collapse threshold; the fit driver discards that restart.
struct component_collapse : std::runtime_error {
  explicit component_collapse(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace gcwm
