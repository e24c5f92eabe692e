#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "peekaboom/campaign_state.hpp"
#include "peekaboom/dataset.hpp"
#include "peekaboom/image.hpp"
#include "peekaboom/saliency.hpp"
#include "peekaboom/storage.hpp"

namespace peekaboom {

// Milliseconds; injected so simulations can use a logical clock.
using Clock = std::function<std::int64_t()>;
Clock system_clock();
// Returns start, start + 1, ... on successive calls (thread-safe).
Clock logical_clock(std::int64_t start = 1);

// Images and pixel rankings the campaign renders from. Never sent to clients.
struct CampaignAssets {
  std::vector<std::string> class_names;
  std::map<std::string, DatasetItem> images;
  // image id -> method id -> ranking
  std::map<std::string, std::map<std::string, PixelRanking>> rankings;

  const PixelRanking& ranking(const std::string& image_id, const std::string& method_id) const;
};

// Ranks every supplied map. Errors with missing_saliency when a
// (image, method) combination of `methods` is absent.
CampaignAssets make_campaign_assets(const Dataset& dataset,
                                    const std::vector<SaliencyMap>& saliencies,
                                    const std::vector<std::string>& methods);

// Loads dataset_dir and <saliency_dir>/<image_id>.<method>.salm.
CampaignAssets load_campaign_assets(const CampaignConfig& config);

// Correct label plus n_wrong distinct wrong labels drawn uniformly from the
// other classes, in a seeded shuffled order.
ChoiceSet build_choices(const std::string& correct_label,
                        const std::vector<std::string>& class_list, int n_wrong,
                        std::uint64_t seed);

struct TaskView {
  std::string trial_id;
  std::string pair_id;
  int step = 0;
  double rate = 0.0;
  ImageTensor image;  // masked with the UI (black) fill
  ChoiceSet choices;
  bool idk_allowed = true;
};

struct TrialOutcome {
  enum class Kind { advance, correct, exhausted };
  Kind kind = Kind::advance;
  double rate = 0.0;            // exposure at which the answer was given
  std::optional<TaskView> next;  // set for advance

  static std::string_view kind_name(Kind kind);
};

// A live campaign. Every mutation is validated, appended to the event log,
// then folded into the in-memory state, under one per-campaign lock, so
// assignments and events are totally ordered.
class Campaign {
 public:
  static std::unique_ptr<Campaign> create(const CampaignConfig& config, CampaignAssets assets,
                                          std::unique_ptr<EventLog> log,
                                          Clock clock = system_clock());

  // Rebuilds from a log that already holds events (crash recovery).
  static std::unique_ptr<Campaign> resume(CampaignAssets assets, std::unique_ptr<EventLog> log,
                                          Clock clock = system_clock());

  const std::string& id() const { return id_; }

  std::string register_worker();

  // Uniform seeded sample (without replacement) of up to pairs-per-worker
  // pairs that still have quota and were never given to this worker.
  // Errors: unknown_worker, campaign_closed (no quota left anywhere).
  std::vector<std::string> assign_tasks(const std::string& worker_id);

  // Errors: unknown_worker, not_found (pair not assigned to the worker),
  // conflict (already started).
  TaskView start_trial(const std::string& worker_id, const std::string& pair_id);

  // `step` is the schedule position being answered. Re-submitting the same
  // (trial, step, choice) returns the original outcome without a new event.
  // Errors: not_found, unauthorized (trial of another worker),
  // invalid_argument (unknown choice token), conflict (terminal trial,
  // out-of-order step, or a different choice for an answered step).
  TrialOutcome submit_answer(const std::string& worker_id, const std::string& trial_id,
                             int step, const std::string& choice);

  // Marks an in-progress trial abandoned; its quota stays consumed.
  void abandon_trial(const std::string& worker_id, const std::string& trial_id);

  // Current view of the worker's in-progress trial, else starts the next
  // assigned pair; nullopt when the worker has nothing left.
  std::optional<TaskView> next_trial(const std::string& worker_id);

  CampaignState snapshot() const;
  std::vector<Event> events() const { return log_->snapshot(); }
  const CampaignAssets& assets() const { return assets_; }
  const EventLog& log() const { return *log_; }

 private:
  Campaign(CampaignAssets assets, std::unique_ptr<EventLog> log, Clock clock);

  void commit(EventKind kind, nlohmann::json payload);
  TaskView render(const Trial& trial, int step) const;
  TaskView start_locked(const std::string& worker_id, const std::string& pair_id);
  TrialOutcome outcome_for(const Trial& trial, const AnswerRecord& answer) const;

  mutable std::mutex mu_;
  std::string id_;
  CampaignAssets assets_;
  std::unique_ptr<EventLog> log_;
  Clock clock_;
  CampaignState state_;
};

}  // namespace peekaboom
