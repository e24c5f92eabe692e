#include "peekaboom/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "peekaboom/error.hpp"

namespace peekaboom {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<EventKind, std::string_view> kKindNames[] = {
    {EventKind::campaign_created, "campaign_created"},
    {EventKind::worker_registered, "worker_registered"},
    {EventKind::pairs_assigned, "pairs_assigned"},
    {EventKind::trial_started, "trial_started"},
    {EventKind::answer_submitted, "answer_submitted"},
    {EventKind::trial_completed, "trial_completed"},
};

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::io, "write to " + path.string() + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string_view event_kind_name(EventKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  fail(Errc::schema, "unknown event kind '" + std::string(name) + "'");
}

std::string encode_event(const Event& event) {
  json line{{"seq", event.seq},
            {"ts", event.timestamp},
            {"kind", event_kind_name(event.kind)},
            {"payload", event.payload}};
  return line.dump();
}

Event decode_event(std::string_view line) {
  Event event;
  try {
    const json doc = json::parse(line);
    if (!doc.is_object()) fail(Errc::schema, "event record is not an object");
    event.seq = doc.at("seq").get<std::uint64_t>();
    event.timestamp = doc.at("ts").get<std::int64_t>();
    event.kind = parse_event_kind(doc.at("kind").get<std::string>());
    event.payload = doc.at("payload");
    if (!event.payload.is_object()) fail(Errc::schema, "event payload is not an object");
  } catch (const json::exception& e) {
    fail(Errc::schema, std::string("malformed event record: ") + e.what());
  }
  return event;
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<EventLog> EventLog::open(const fs::path& path, Durability durability) {
  auto log = std::make_unique<EventLog>();
  log->path_ = path;
  log->durability_ = durability;
  if (durability == Durability::memory) return log;

  if (fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Event e = decode_event(line);
      if (e.seq != log->events_.size() + 1) {
        fail(Errc::sequence, path.string() + ": record " + std::to_string(e.seq) +
                                 " breaks the dense sequence");
      }
      log->events_.push_back(std::move(e));
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  log->fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log->fd_ < 0) {
    fail(Errc::io, "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  return log;
}

std::uint64_t EventLog::append(const Event& event) {
  std::lock_guard lock(mu_);
  const std::uint64_t expected = events_.size() + 1;
  if (event.seq != expected) {
    fail(Errc::sequence, "append expected sequence " + std::to_string(expected) + ", got " +
                             std::to_string(event.seq));
  }
  if (fd_ >= 0) {
    write_all(fd_, encode_event(event) + "\n", path_);
    if (durability_ == Durability::fsync && ::fsync(fd_) != 0) {
      fail(Errc::io, "fsync of " + path_.string() + " failed: " + std::strerror(errno));
    }
  }
  events_.push_back(event);
  return event.seq;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::vector<Event> EventLog::snapshot() const {
  std::lock_guard lock(mu_);
  return events_;
}

fs::path log_path(const fs::path& store_dir, const std::string& campaign_id) {
  return store_dir / (campaign_id + ".events.jsonl");
}

ReplayResult replay(std::span<const Event> events) {
  ReplayResult result;
  for (const auto& e : events) {
    try {
      result.state.apply(e);
    } catch (const Error& err) {
      result.error = ReplayError{result.state.last_seq + 1, err.what()};
      break;
    }
  }
  return result;
}

ReplayResult replay_file(const fs::path& path) {
  ReplayResult result;
  std::ifstream in(path);
  if (!in) {
    result.error = ReplayError{1, "cannot open " + path.string()};
    return result;
  }
  std::string line;
  while (std::getline(in, line)) {
    try {
      result.state.apply(decode_event(line));
    } catch (const Error& err) {
      result.error = ReplayError{result.state.last_seq + 1, err.what()};
      break;
    }
  }
  return result;
}

std::string export_snapshot(const CampaignState& state) {
  std::string out;
  auto emit = [&out](json j) { out += j.dump() + "\n"; };
  emit({{"record", "campaign"},
        {"created", state.created},
        {"last_seq", state.last_seq},
        {"config", state.config.to_json()},
        {"class_names", state.class_names}});
  for (const auto& p : state.pairs) {
    emit({{"record", "pair"},
          {"pair_id", p.pair_id},
          {"image_id", p.image_id},
          {"method_id", p.method_id},
          {"label", p.label},
          {"remaining_quota", p.remaining_quota}});
  }
  for (const auto& [id, w] : state.workers) {
    emit({{"record", "worker"},
          {"worker_id", id},
          {"assigned", w.assigned},
          {"started", std::vector<std::string>(w.started.begin(), w.started.end())}});
  }
  for (const auto& [id, t] : state.trials) {
    json history = json::array();
    for (const auto& a : t.history) {
      history.push_back({{"step", a.step},
                         {"rate", a.rate},
                         {"choice", a.choice},
                         {"outcome", answer_kind_name(a.kind)},
                         {"ts", a.timestamp}});
    }
    emit({{"record", "trial"},
          {"trial_id", id},
          {"worker_id", t.worker_id},
          {"pair_id", t.pair_id},
          {"position", t.position},
          {"status", trial_status_name(t.status)},
          {"correct_rate", t.correct_rate},
          {"choices", t.choices.labels},
          {"history", history}});
  }
  return out;
}

}  // namespace peekaboom
