#pragma once

#include <stdexcept>
#include <string>

namespace coreset {

// Broad failure classes; the CLI maps each to its own exit code.
enum class ErrorKind {
  Shape,        // incompatible dimensions
  Format,       // malformed or truncated file
  Validation,   // well-formed input that violates an invariant
  Convergence,  // iterative solver failed
  Budget,       // an accuracy budget could not be met
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace coreset
