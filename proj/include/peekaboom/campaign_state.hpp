#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "peekaboom/event.hpp"
#include "peekaboom/masking.hpp"

namespace peekaboom {

inline constexpr const char* kIdkChoice = "idk";

struct CampaignConfig {
  std::string campaign_id = "campaign";
  std::string dataset_id;
  std::string dataset_dir;   // used by file-backed deployments
  std::string saliency_dir;  // <saliency_dir>/<image_id>.<method>.salm
  std::vector<std::string> methods;
  ExposureSchedule schedule = ExposureSchedule::game_default();
  int quota = 10;
  int pairs_per_worker = 20;
  int wrong_choices = 4;
  std::uint64_t seed = 1;

  void validate(int class_count) const;
  nlohmann::json to_json() const;
  static CampaignConfig from_json(const nlohmann::json& doc);

  bool operator==(const CampaignConfig&) const = default;
};

struct PairInfo {
  std::string pair_id;
  std::string image_id;
  std::string method_id;
  std::string label;  // correct class name
  int remaining_quota = 0;

  bool operator==(const PairInfo&) const = default;
};

// Labels shown to the worker, in display order; the "I don't know" option is
// implicit and always available.
struct ChoiceSet {
  std::vector<std::string> labels;

  bool contains(const std::string& label) const;
  bool operator==(const ChoiceSet&) const = default;
};

enum class TrialStatus { in_progress, correct, exhausted, abandoned };
enum class AnswerKind { correct, wrong, idk };

std::string_view trial_status_name(TrialStatus status);
std::string_view answer_kind_name(AnswerKind kind);

struct AnswerRecord {
  int step = 0;
  double rate = 0.0;
  std::string choice;
  AnswerKind kind = AnswerKind::idk;
  std::int64_t timestamp = 0;

  bool operator==(const AnswerRecord&) const = default;
};

struct Trial {
  std::string trial_id;
  std::string worker_id;
  std::string pair_id;
  int position = 0;  // index into the schedule; only increases
  TrialStatus status = TrialStatus::in_progress;
  double correct_rate = 0.0;  // meaningful when status == correct
  ChoiceSet choices;
  std::vector<AnswerRecord> history;

  bool terminal() const { return status != TrialStatus::in_progress; }
  bool operator==(const Trial&) const = default;
};

struct WorkerRecord {
  std::string worker_id;
  std::vector<std::string> assigned;  // assignment order
  std::set<std::string> started;      // pair ids

  bool operator==(const WorkerRecord&) const = default;
};

// Logical campaign state; a pure fold over the event log. Live campaigns and
// replay both build it through apply().
struct CampaignState {
  bool created = false;
  CampaignConfig config;
  std::vector<std::string> class_names;
  std::vector<PairInfo> pairs;
  std::map<std::string, std::size_t> pair_index;
  std::map<std::string, WorkerRecord> workers;
  std::map<std::string, Trial> trials;
  std::uint64_t last_seq = 0;

  // Throws Error(sequence) on a gap/duplicate and Error(schema) when the
  // payload is malformed or the transition is illegal. State is unchanged
  // on failure.
  void apply(const Event& event);

  const PairInfo& pair(const std::string& pair_id) const;
  const Trial& trial(const std::string& trial_id) const;
  const WorkerRecord& worker(const std::string& worker_id) const;
  bool has_remaining_quota() const;

  bool operator==(const CampaignState&) const = default;
};

}  // namespace peekaboom
