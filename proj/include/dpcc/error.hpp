#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpcc {

enum class Errc {
  DuplicateCoordinate,
  StrideViolation,
  ShapeMismatch,
  StrideMismatch,
  BadFactor,
  WidthMismatch,
  UnknownRoute,
  DisconnectedGraph,
  NonFiniteGradient,
  EmptyInput,
  CountExceedsCandidates,
  CoordMisalignment,
  MissingCorrespondence,
  CorruptStream,
  CdfMismatch,
  OutOfRange,
  ReferenceMissing,
  ColdStart,
  NoCandidates,
  NonFiniteLoss,
  EmptyCloud,
  DegenerateNeighborhood,
  InsufficientPoints,
  NoOverlap,
  ZeroTarget,
  MalformedHeader,
  UnsupportedFormat,
  DegenerateExtent,
  BadSpec,
  BadCheckpoint,
  Io,
};

std::string_view errc_name(Errc code);

// All library failures are reported through this type; `code()` identifies
// the failure class so callers (and the CLI) can map it to exit codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dpcc
