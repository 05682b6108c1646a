#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ebr {

enum class Errc {
  ZeroVector,
  DimensionMismatch,
  EmptyStore,
  DuplicateId,
  UnknownItem,
  InvalidArgument,
  NoPositives,
  BadTemperature,
  ZeroEmbedding,
  EmptyTokens,
  InvalidConfig,
  UnknownCluster,
  EmptyWindow,
  UnknownTrend,
  UnknownSeed,
  NoSeeds,
  MalformedTiers,
  NoPriorDecision,
  NoLabeledCandidates,
  EmptyInput,
  DegenerateLabels,
  CorruptFile,
  CorruptLog,
  Conflict,
  IoError,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Raised when an event log line cannot be parsed or breaks sequencing.
class CorruptLogError : public Error {
 public:
  CorruptLogError(std::uint64_t byte_offset, const std::string& message)
      : Error(Errc::CorruptLog, message + " at byte offset " + std::to_string(byte_offset)),
        offset_(byte_offset) {}

  std::uint64_t byte_offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace ebr
