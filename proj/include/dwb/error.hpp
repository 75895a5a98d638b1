#pragma once

#include <stdexcept>
#include <string>

namespace dwb {

/// Failure category; the CLI maps each to a distinct exit code.
enum class ErrorKind {
  Data,       // malformed or incompatible input
  Numerical,  // divergence, degenerate clustering
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error dataError(const std::string& what) {
  return Error(ErrorKind::Data, what);
}

inline Error numericalError(const std::string& what) {
  return Error(ErrorKind::Numerical, what);
}

}  // namespace dwb
