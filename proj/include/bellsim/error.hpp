#pragma once

#include <stdexcept>
#include <string>

namespace bellsim {

/// Failure category. The CLI maps these onto its exit codes.
enum class ErrorKind {
  kInput,          // malformed or inconsistent input data
  kConfig,         // scenario configuration rejected
  kInvalidState,   // non-physical quantum state or parameter
  kInvalidFrame,   // |v| >= c or no simultaneity frame
  kNoSignal,       // no coincidence peak in cross-correlation
  kInsufficientData,
  kCausality,      // exploit mode paired with a closed loophole
  kNumerical,      // eigen solver / optimizer failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace bellsim
