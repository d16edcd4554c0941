#pragma once

#include <stdexcept>
#include <string>

namespace pgdlab {

// Invalid argument to a library routine (bad dimension, nonpositive
// parameter, shape mismatch, ...).
class invalid_parameter_error : public std::invalid_argument {
 public:
  explicit invalid_parameter_error(const std::string& what)
      : std::invalid_argument(what) {}
};

// Input data fails a structural requirement (non-finite entries,
// matrix not PSD where required, ...).
class invalid_input_error : public std::invalid_argument {
 public:
  explicit invalid_input_error(const std::string& what)
      : std::invalid_argument(what) {}
};

// An experiment precondition does not hold at the supplied point.
// The message names the failed check.
class precondition_error : public std::runtime_error {
 public:
  explicit precondition_error(const std::string& what)
      : std::runtime_error(what) {}
};

// A descent run produced a non-finite value. `iteration` is the step at
// which the problem was detected and `coordinate` the first offending
// entry (-1 when the function value itself blew up).
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, long iteration, int coordinate)
      : std::runtime_error(what), iteration(iteration), coordinate(coordinate) {}

  long iteration = 0;
  int coordinate = -1;
};

// An objective evaluation came back non-finite. `coordinate` is the first
// offending gradient component, or -1 when the scalar value itself is bad.
class evaluation_error : public std::runtime_error {
 public:
  evaluation_error(const std::string& what, int coordinate)
      : std::runtime_error(what), coordinate(coordinate) {}

  int coordinate = -1;
};

// Bad experiment configuration (maps to CLI exit code 2).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pgdlab
