#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peekaboom/campaign_state.hpp"
#include "peekaboom/event.hpp"

namespace peekaboom {

enum class Durability {
  memory,  // no file
  flush,   // write(2) per append
  fsync,   // write(2) + fsync(2) per append
};

// Append-only campaign log. A single writer appends; readers take snapshots.
// File naming: <store>/<campaign_id>.events.jsonl.
class EventLog {
 public:
  EventLog() = default;
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  // Opens (creating if needed) a log file; existing records are loaded and
  // must form a dense, well-formed prefix.
  static std::unique_ptr<EventLog> open(const std::filesystem::path& path,
                                        Durability durability = Durability::fsync);

  // Requires event.seq == last_seq() + 1. Returns once the record is
  // written per the durability level.
  std::uint64_t append(const Event& event);

  std::uint64_t last_seq() const;
  std::vector<Event> snapshot() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  mutable std::mutex mu_;
  std::vector<Event> events_;
  std::filesystem::path path_;
  Durability durability_ = Durability::memory;
  int fd_ = -1;
};

std::filesystem::path log_path(const std::filesystem::path& store_dir,
                               const std::string& campaign_id);

struct ReplayError {
  std::uint64_t seq = 0;  // offending record
  std::string message;
};

struct ReplayResult {
  CampaignState state;               // state after the last good record
  std::optional<ReplayError> error;  // set when replay halted early
};

ReplayResult replay(std::span<const Event> events);
// Decodes line by line; a corrupt line k is reported as sequence k.
ReplayResult replay_file(const std::filesystem::path& path);

// Canonical key/value text of a state (same JSON-lines form as the log).
std::string export_snapshot(const CampaignState& state);

}  // namespace peekaboom
