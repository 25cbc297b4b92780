#pragma once

#include <stdexcept>
#include <string>

// Error taxonomy shared by the library and the CLI:
//   ConfigError -> malformed or inconsistent configuration (CLI exit code 2)
//   MathError   -> domain violations, failed convergence, inadmissible
//                  measure changes (CLI exit code 3)
//   IoError     -> file system / format failures (CLI exit code 4)

namespace lssm {

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class MathError : public std::runtime_error {
  public:
    explicit MathError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace lssm
