#include "amodal/error.hpp"

namespace amodal {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kSceneInfeasible: return "scene_infeasible";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kChecksum: return "checksum";
    case ErrorKind::kShapeMismatch: return "shape_mismatch";
    case ErrorKind::kEmptyInstance: return "empty_instance";
    case ErrorKind::kLatticeInfeasible: return "lattice_infeasible";
    case ErrorKind::kDiverged: return "diverged";
  }
  return "unknown";
}

}  // namespace amodal
