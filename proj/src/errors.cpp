#include "ebr/errors.hpp"

namespace ebr {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyStore: return "EmptyStore";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownItem: return "UnknownItem";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NoPositives: return "NoPositives";
    case Errc::BadTemperature: return "BadTemperature";
    case Errc::ZeroEmbedding: return "ZeroEmbedding";
    case Errc::EmptyTokens: return "EmptyTokens";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::UnknownCluster: return "UnknownCluster";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::UnknownTrend: return "UnknownTrend";
    case Errc::UnknownSeed: return "UnknownSeed";
    case Errc::NoSeeds: return "NoSeeds";
    case Errc::MalformedTiers: return "MalformedTiers";
    case Errc::NoPriorDecision: return "NoPriorDecision";
    case Errc::NoLabeledCandidates: return "NoLabeledCandidates";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::CorruptLog: return "CorruptLog";
    case Errc::Conflict: return "Conflict";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ebr
