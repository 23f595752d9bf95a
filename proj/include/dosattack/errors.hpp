#pragma once

#include <stdexcept>
#include <string>

namespace dosattack {

enum class ErrorKind {
  Dimension,
  Numerical,
  Config,
  InfeasibleRegion,
  RegimeInapplicable,
  DegenerateCurvature,
};

/// Single exception type for the library; `kind()` tells callers (the CLI in
/// particular) which failure class occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require_dims(bool ok, const std::string& field, const std::string& detail) {
  if (!ok) fail(ErrorKind::Dimension, "dimension mismatch in '" + field + "': " + detail);
}

}  // namespace dosattack
