#include "dpcc/error.hpp"

namespace dpcc {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::DuplicateCoordinate: return "DuplicateCoordinate";
    case Errc::StrideViolation: return "StrideViolation";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::StrideMismatch: return "StrideMismatch";
    case Errc::BadFactor: return "BadFactor";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::UnknownRoute: return "UnknownRoute";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::CountExceedsCandidates: return "CountExceedsCandidates";
    case Errc::CoordMisalignment: return "CoordMisalignment";
    case Errc::MissingCorrespondence: return "MissingCorrespondence";
    case Errc::CorruptStream: return "CorruptStream";
    case Errc::CdfMismatch: return "CdfMismatch";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::ReferenceMissing: return "ReferenceMissing";
    case Errc::ColdStart: return "ColdStart";
    case Errc::NoCandidates: return "NoCandidates";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptyCloud: return "EmptyCloud";
    case Errc::DegenerateNeighborhood: return "DegenerateNeighborhood";
    case Errc::InsufficientPoints: return "InsufficientPoints";
    case Errc::NoOverlap: return "NoOverlap";
    case Errc::ZeroTarget: return "ZeroTarget";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::DegenerateExtent: return "DegenerateExtent";
    case Errc::BadSpec: return "BadSpec";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace dpcc
