#pragma once

#include <stdexcept>
#include <string>

namespace amodal {

// Machine-readable failure category, surfaced by the CLI as JSON.
enum class ErrorKind {
  kInvalidArgument,
  kSceneInfeasible,
  kIo,
  kFormat,
  kChecksum,
  kShapeMismatch,
  kEmptyInstance,
  kLatticeInfeasible,
  kDiverged,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace amodal
