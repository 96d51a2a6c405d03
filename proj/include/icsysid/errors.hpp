#pragma once

#include <stdexcept>
#include <string>

namespace icsysid {

// Invalid run/dataset/scenario configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or malformed data files (CLI exit code 3).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace icsysid
