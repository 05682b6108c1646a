#include "ebr/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <sstream>

#include "ebr/errors.hpp"

namespace ebr {

nlohmann::json to_json(const EventRecord& e) {
  return {{"seq", e.seq},
          {"event_time", e.event_time},
          {"received_at", e.received_at},
          {"kind", e.kind},
          {"payload", e.payload}};
}

std::string to_line(const EventRecord& e) { return to_json(e).dump() + "\n"; }

namespace {

EventRecord parse_line(const std::string& line, std::uint64_t offset) {
  const auto j = nlohmann::json::parse(line);
  EventRecord e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.event_time = j.at("event_time").get<std::int64_t>();
  e.received_at = j.at("received_at").get<std::int64_t>();
  e.kind = j.at("kind").get<std::string>();
  e.payload = j.at("payload");
  if (!e.payload.is_object()) throw Error(Errc::CorruptLog, "payload is not an object");
  e.byte_offset = offset;
  return e;
}

}  // namespace

LoadedLog read_event_log(const std::filesystem::path& path) {
  LoadedLog out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::uint64_t offset = 0;
  while (offset < text.size()) {
    const auto nl = text.find('\n', offset);
    const bool terminated = nl != std::string::npos;
    const std::string line = text.substr(offset, terminated ? nl - offset : std::string::npos);
    try {
      if (line.empty()) throw Error(Errc::CorruptLog, "empty line");
      auto e = parse_line(line, offset);
      if (!out.events.empty() && e.seq <= out.events.back().seq) {
        throw CorruptLogError(offset, "seq " + std::to_string(e.seq) + " does not increase");
      }
      if (!terminated) {
        // Complete JSON but no newline: keep it, the next append adds one.
        out.events.push_back(std::move(e));
        out.valid_bytes = text.size();
        break;
      }
      out.events.push_back(std::move(e));
    } catch (const CorruptLogError&) {
      throw;
    } catch (const std::exception& ex) {
      if (!terminated) {
        out.dropped_torn_tail = true;
        break;
      }
      throw CorruptLogError(offset, std::string("malformed event: ") + ex.what());
    }
    offset = nl + 1;
    out.valid_bytes = offset;
  }
  return out;
}

EventLog::EventLog(std::filesystem::path path, bool sync_each_append) : path_(std::move(path)), sync_(sync_each_append) {
  loaded_ = read_event_log(path_);
  if (!loaded_.events.empty()) last_seq_ = loaded_.events.back().seq;
  if (std::filesystem::exists(path_)) {
    const auto size = std::filesystem::file_size(path_);
    if (loaded_.dropped_torn_tail || loaded_.valid_bytes != size) {
      std::filesystem::resize_file(path_, loaded_.valid_bytes);
    }
  }
  const bool needs_newline = loaded_.valid_bytes > 0 && [&] {
    std::ifstream in(path_, std::ios::binary);
    in.seekg(-1, std::ios::end);
    return in.get() != '\n';
  }();
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(Errc::IoError, "cannot open " + path_.string() + " for append");
  if (needs_newline) out_ << '\n' << std::flush;
}

EventRecord EventLog::append(std::int64_t event_time, std::int64_t received_at, const std::string& kind,
                             nlohmann::json payload) {
  EventRecord e;
  e.seq = last_seq_ + 1;
  e.event_time = event_time;
  e.received_at = received_at;
  e.kind = kind;
  e.payload = std::move(payload);
  out_ << to_line(e);
  out_.flush();
  if (!out_) throw Error(Errc::IoError, "append failed for " + path_.string());
  if (sync_) {
    const int fd = ::open(path_.c_str(), O_WRONLY);
    if (fd >= 0) {
      ::fsync(fd);
      ::close(fd);
    }
  }
  last_seq_ = e.seq;
  return e;
}

}  // namespace ebr
