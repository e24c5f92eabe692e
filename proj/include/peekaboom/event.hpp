#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <string_view>

namespace peekaboom {

enum class EventKind {
  campaign_created,
  worker_registered,
  pairs_assigned,
  trial_started,
  answer_submitted,
  trial_completed,
};

std::string_view event_kind_name(EventKind kind);
// Throws Error(schema) for an unknown name.
EventKind parse_event_kind(std::string_view name);

struct Event {
  std::uint64_t seq = 0;
  std::int64_t timestamp = 0;  // milliseconds
  EventKind kind = EventKind::campaign_created;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const Event&) const = default;
};

// One JSON object per line: {"kind":..,"payload":{..},"seq":n,"ts":ms}.
// Keys are emitted in sorted order so encoding is canonical.
std::string encode_event(const Event& event);
Event decode_event(std::string_view line);

}  // namespace peekaboom
