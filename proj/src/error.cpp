#include "pieceid/error.hpp"

namespace pieceid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingView: return "MissingView";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::FragmentTooLong: return "FragmentTooLong";
    case ErrorCode::NonPositive: return "NonPositive";
    case ErrorCode::TruthMissing: return "TruthMissing";
    case ErrorCode::EmptyRanks: return "EmptyRanks";
    case ErrorCode::SizeTooLarge: return "SizeTooLarge";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadLength: return "BadLength";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BadManifest: return "BadManifest";
  }
  return "Unknown";
}

}  // namespace pieceid
