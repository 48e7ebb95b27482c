#include "lineage/error.hpp"

namespace lineage {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedFile: return "malformed file";
    case ErrorKind::kUnsupportedDtype: return "unsupported dtype";
    case ErrorKind::kMissingTensor: return "missing tensor";
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kInvariantViolation: return "invariant violation";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kEmptyIntersection: return "empty intersection";
    case ErrorKind::kIo: return "I/O failure";
  }
  return "unknown";
}

}  // namespace lineage
