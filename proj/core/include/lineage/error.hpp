#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lineage {

enum class ErrorKind {
  kMalformedFile,
  kUnsupportedDtype,
  kMissingTensor,
  kShapeMismatch,
  kInvariantViolation,
  kInvalidArgument,
  kDegenerate,
  kEmptyIntersection,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported as lineage::Error; `kind()` lets callers
// (and the CLI's exit-code mapping) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lineage
