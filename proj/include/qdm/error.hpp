#pragma once

#include <stdexcept>
#include <string>

namespace qdm {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  success = 0,
  config = 2,
  io = 3,
  format = 4,
  numerical = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ExitCode::format, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

// Raised by dip detection when a spectrum shows fewer resonances than its mode needs.
class DipDetectionError : public NumericalError {
 public:
  DipDetectionError(int found, int required)
      : NumericalError("found " + std::to_string(found) + " resonance dip(s), mode requires " +
                       std::to_string(required)),
        found_(found),
        required_(required) {}
  int found() const noexcept { return found_; }
  int required() const noexcept { return required_; }

 private:
  int found_;
  int required_;
};

}  // namespace qdm
