#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebr/linalg.hpp"

namespace ebr {

inline constexpr std::int64_t kBenignLabel = -1;

// A set of same-width feature tokens (frames or text pieces), row-major.
struct Tokens {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  Mat to_mat() const;
  bool operator==(const Tokens&) const = default;
};

struct VideoRecord {
  std::string id;
  std::int64_t label = kBenignLabel;  // trend/class index, or kBenignLabel
  Tokens visual;
  Tokens text;
  std::int64_t timestamp = 0;  // event time, seconds
  std::int64_t group = -1;     // for negatives: the trend whose evaluation pool holds it

  bool operator==(const VideoRecord&) const = default;
};

// {id, label, visual: [[..]..], text: [[..]..], time?, group?}
nlohmann::json to_json(const VideoRecord& r);
// Throws EmptyTokens or InvalidArgument on malformed token arrays.
VideoRecord record_from_json(const nlohmann::json& j);
Tokens tokens_from_json(const nlohmann::json& j, const char* field);
nlohmann::json tokens_to_json(const Tokens& t);

void write_dataset_jsonl(const std::filesystem::path& path, std::span<const VideoRecord> records);
std::vector<VideoRecord> read_dataset_jsonl(const std::filesystem::path& path);

}  // namespace ebr
