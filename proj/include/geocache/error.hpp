#pragma once

#include <stdexcept>
#include <string>

namespace geocache {

/// Failure categories surfaced by the core library. The numeric values are
/// mirrored by the status codes of the C API (geocache.h).
enum class ErrorCode : int {
  InvalidArgument = 1,
  DimensionMismatch = 2,
  Infeasible = 3,
  Parse = 4,
  Io = 5,
  EmptyTopology = 6,
  UncoveredWindow = 7,
  EnumerationCap = 8,
  Config = 9,
  Internal = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace geocache
