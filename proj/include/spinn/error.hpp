#pragma once

#include <stdexcept>
#include <string>

namespace spinn {

/// Invalid shapes, names, or option combinations supplied by the caller.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value or a singular system.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown problem, model, or file.
class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An evaluation cannot be carried out (e.g. the metric is undefined).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spinn
