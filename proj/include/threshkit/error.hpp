#pragma once

#include <stdexcept>
#include <string>

namespace threshkit {

// Input errors map to exit code 1, degenerate statistical cases to exit code 2.
enum class ErrorKind { input, degenerate };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept { return kind_ == ErrorKind::input ? 1 : 2; }

private:
  ErrorKind kind_;
};

class InputError : public Error {
public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class DegenerateError : public Error {
public:
  explicit DegenerateError(const std::string& what) : Error(ErrorKind::degenerate, what) {}
};

}  // namespace threshkit
