#pragma once

#include <stdexcept>
#include <string>

namespace locomanip {

// Exit codes used by the CLI. Library code throws the exceptions below;
// the CLI maps them to these codes.
enum ExitCode : int {
  EXIT_OK = 0,
  EXIT_CONFIG = 2,
  EXIT_DATA = 3,
  EXIT_DIVERGENCE = 4,
};

// Unknown key, unparsable value, or a value outside its documented range.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or incompatible dataset / checkpoint input.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite state or loss encountered during simulation or training.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace locomanip
