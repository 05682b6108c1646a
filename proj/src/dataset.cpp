#include "ebr/dataset.hpp"

#include <cmath>
#include <fstream>

#include "ebr/errors.hpp"

namespace ebr {

Mat Tokens::to_mat() const {
  Mat m(count, dim);
  for (std::size_t i = 0; i < values.size(); ++i) m.v[i] = values[i];
  return m;
}

nlohmann::json tokens_to_json(const Tokens& t) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < t.count; ++i) {
    const auto r = t.row(i);
    arr.push_back(std::vector<float>(r.begin(), r.end()));
  }
  return arr;
}

Tokens tokens_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw Error(Errc::InvalidArgument, std::string(field) + " must be an array");
  if (j.empty()) throw Error(Errc::EmptyTokens, std::string(field) + " has no tokens");
  Tokens t;
  t.count = j.size();
  for (const auto& tok : j) {
    if (!tok.is_array() || tok.empty()) {
      throw Error(Errc::InvalidArgument, std::string(field) + " token must be a non-empty array");
    }
    if (t.dim == 0) t.dim = tok.size();
    if (tok.size() != t.dim) throw Error(Errc::InvalidArgument, std::string(field) + " ragged tokens");
    for (const auto& x : tok) {
      if (!x.is_number()) throw Error(Errc::InvalidArgument, std::string(field) + " non-numeric value");
      const float f = x.get<float>();
      if (!std::isfinite(f)) throw Error(Errc::InvalidArgument, std::string(field) + " non-finite value");
      t.values.push_back(f);
    }
  }
  return t;
}

nlohmann::json to_json(const VideoRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["label"] = r.label;
  j["visual"] = tokens_to_json(r.visual);
  j["text"] = tokens_to_json(r.text);
  j["time"] = r.timestamp;
  if (r.group >= 0) j["group"] = r.group;
  return j;
}

VideoRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
    throw Error(Errc::InvalidArgument, "record needs a string id");
  }
  VideoRecord r;
  r.id = j["id"].get<std::string>();
  r.label = j.value("label", kBenignLabel);
  r.visual = tokens_from_json(j.value("visual", nlohmann::json::array()), "visual");
  r.text = tokens_from_json(j.value("text", nlohmann::json::array()), "text");
  r.timestamp = j.value("time", std::int64_t{0});
  r.group = j.value("group", std::int64_t{-1});
  return r;
}

void write_dataset_jsonl(const std::filesystem::path& path, std::span<const VideoRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::vector<VideoRecord> read_dataset_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<VideoRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidArgument, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ebr
