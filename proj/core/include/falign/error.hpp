#pragma once

#include <stdexcept>
#include <string>

namespace falign {

// Failure categories surfaced by library operations. The CLI maps kIo and
// kFormat to exit code 2 and everything else to exit code 1.
enum class ErrorKind {
  kInvalidParameter,
  kInvalidSize,
  kInvalidOrder,
  kInvalidToken,
  kInvalidPath,
  kInvalidConfig,
  kInfeasibleLength,
  kUndefinedPosterior,
  kUndefinedGradient,
  kNoFeasiblePath,
  kDegenerateLattice,
  kCheckInfeasible,
  kCapExceeded,
  kValidation,
  kIo,
  kFormat,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace falign
