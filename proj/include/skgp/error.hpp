#pragma once

#include <stdexcept>
#include <string>

namespace skgp {

// Invalid user configuration or input file; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Situation sampling could not find enough qualifying decision points (exit code 4).
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Existing output directory was produced by a different plan (exit code 3).
class ResumeDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skgp
