#pragma once

// Append-only JSON-lines event log. One event per line:
//   {"seq": n, "event_time": t, "received_at": t, "kind": "...", "payload": {...}}

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace ebr {

struct EventRecord {
  std::uint64_t seq = 0;
  std::int64_t event_time = 0;
  std::int64_t received_at = 0;  // server clock, not part of folded state
  std::string kind;
  nlohmann::json payload = nlohmann::json::object();
  std::uint64_t byte_offset = 0;  // where the line starts, when read back

  bool operator==(const EventRecord& o) const {
    return seq == o.seq && event_time == o.event_time && received_at == o.received_at && kind == o.kind &&
           payload == o.payload;
  }
};

nlohmann::json to_json(const EventRecord& e);
std::string to_line(const EventRecord& e);  // compact JSON plus '\n'

struct LoadedLog {
  std::vector<EventRecord> events;
  bool dropped_torn_tail = false;
  std::uint64_t valid_bytes = 0;
};

// Reads every event. A final line without '\n' that fails to parse is a torn
// write and is dropped; any other bad line, or a seq that does not increase,
// throws CorruptLogError with the line's byte offset. A missing file is empty.
LoadedLog read_event_log(const std::filesystem::path& path);

class EventLog {
 public:
  // Loads the log, truncates a torn tail and opens for appending.
  explicit EventLog(std::filesystem::path path, bool sync_each_append = false);

  const LoadedLog& loaded() const { return loaded_; }
  std::uint64_t last_seq() const { return last_seq_; }

  // Assigns the next seq and appends. Throws IoError.
  EventRecord append(std::int64_t event_time, std::int64_t received_at, const std::string& kind,
                     nlohmann::json payload);

 private:
  std::filesystem::path path_;
  bool sync_;
  LoadedLog loaded_;
  std::uint64_t last_seq_ = 0;
  std::ofstream out_;
};

}  // namespace ebr
