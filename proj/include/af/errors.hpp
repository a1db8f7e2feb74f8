#pragma once

#include <stdexcept>
#include <string>

namespace af {

// Bad user input: config files, CLI arguments, malformed data files.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Runtime numerical failure: non-finite loss, diverged integration, overflow.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace af
