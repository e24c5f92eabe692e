#include "peekaboom/crowdgame.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>

#include "peekaboom/error.hpp"
#include "peekaboom/random.hpp"
#include "peekaboom/salm.hpp"

namespace peekaboom {

using nlohmann::json;

namespace {

std::string padded_id(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%06zu", prefix, n);
  return buf;
}

// Stream keys for seed derivation; disjoint ranges per purpose.
constexpr std::uint64_t kChoiceStream = 1ULL << 40;

}  // namespace

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

Clock logical_clock(std::int64_t start) {
  auto counter = std::make_shared<std::atomic<std::int64_t>>(start - 1);
  return [counter] { return ++*counter; };
}

const PixelRanking& CampaignAssets::ranking(const std::string& image_id,
                                            const std::string& method_id) const {
  auto it = rankings.find(image_id);
  if (it != rankings.end()) {
    auto m = it->second.find(method_id);
    if (m != it->second.end()) return m->second;
  }
  fail(Errc::missing_saliency, "no saliency for image '" + image_id + "' method '" +
                                   method_id + "'");
}

CampaignAssets make_campaign_assets(const Dataset& dataset,
                                    const std::vector<SaliencyMap>& saliencies,
                                    const std::vector<std::string>& methods) {
  dataset.validate();
  CampaignAssets assets;
  assets.class_names = dataset.class_names;
  for (const auto& item : dataset.items) assets.images[item.id] = item;
  for (const auto& map : saliencies) {
    auto it = assets.images.find(map.image_id);
    if (it == assets.images.end()) continue;
    if (map.width != it->second.image.width || map.height != it->second.image.height) {
      fail(Errc::dimension_mismatch, "saliency for '" + map.image_id + "' (" + map.method_id +
                                         ") does not match the image size");
    }
    assets.rankings[map.image_id][map.method_id] = rank_pixels(map);
  }
  for (const auto& [image_id, item] : assets.images) {
    for (const auto& method : methods) assets.ranking(image_id, method);
  }
  return assets;
}

CampaignAssets load_campaign_assets(const CampaignConfig& config) {
  const Dataset dataset = load_dataset(config.dataset_dir);
  std::vector<SaliencyMap> maps;
  for (const auto& item : dataset.items) {
    for (const auto& method : config.methods) {
      const auto path =
          std::filesystem::path(config.saliency_dir) / (item.id + "." + method + ".salm");
      if (!std::filesystem::exists(path)) {
        fail(Errc::missing_saliency, "missing saliency file " + path.string());
      }
      maps.push_back(read_salm(path));
      maps.back().image_id = item.id;
      maps.back().method_id = method;
    }
  }
  return make_campaign_assets(dataset, maps, config.methods);
}

ChoiceSet build_choices(const std::string& correct_label,
                        const std::vector<std::string>& class_list, int n_wrong,
                        std::uint64_t seed) {
  std::vector<std::string> others;
  bool found = false;
  for (const auto& c : class_list) {
    if (c == correct_label) {
      found = true;
    } else if (std::find(others.begin(), others.end(), c) == others.end()) {
      others.push_back(c);
    }
  }
  if (!found) fail(Errc::invalid_argument, "class list lacks the correct label '" + correct_label + "'");
  if (n_wrong < 0 || static_cast<std::size_t>(n_wrong) > others.size()) {
    fail(Errc::invalid_argument, "cannot draw " + std::to_string(n_wrong) +
                                     " wrong labels from " + std::to_string(others.size()));
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first n_wrong slots become the sample.
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_wrong); ++i) {
    const std::size_t j = i + uniform_index(rng, others.size() - i);
    std::swap(others[i], others[j]);
  }
  ChoiceSet set;
  set.labels.push_back(correct_label);
  set.labels.insert(set.labels.end(), others.begin(), others.begin() + n_wrong);
  for (std::size_t i = set.labels.size(); i > 1; --i) {
    std::swap(set.labels[i - 1], set.labels[uniform_index(rng, i)]);
  }
  return set;
}

std::string_view TrialOutcome::kind_name(Kind kind) {
  switch (kind) {
    case Kind::advance: return "advance";
    case Kind::correct: return "correct";
    case Kind::exhausted: return "exhausted";
  }
  return "advance";
}

Campaign::Campaign(CampaignAssets assets, std::unique_ptr<EventLog> log, Clock clock)
    : assets_(std::move(assets)), log_(std::move(log)), clock_(std::move(clock)) {}

std::unique_ptr<Campaign> Campaign::create(const CampaignConfig& config, CampaignAssets assets,
                                           std::unique_ptr<EventLog> log, Clock clock) {
  config.validate(static_cast<int>(assets.class_names.size()));
  if (!log) log = std::make_unique<EventLog>();
  if (log->last_seq() != 0) fail(Errc::conflict, "campaign log is not empty");
  for (const auto& name : assets.class_names) {
    if (name == kIdkChoice) fail(Errc::invalid_argument, "class name collides with 'idk'");
  }

  json pairs = json::array();
  std::size_t n = 0;
  for (const auto& [image_id, item] : assets.images) {
    for (const auto& method : config.methods) {
      assets.ranking(image_id, method);
      pairs.push_back({{"pair_id", padded_id('p', ++n)},
                       {"image_id", image_id},
                       {"method_id", method},
                       {"label", assets.class_names.at(static_cast<std::size_t>(item.label))}});
    }
  }
  if (pairs.empty()) fail(Errc::invalid_argument, "campaign has no (image, method) pairs");

  std::unique_ptr<Campaign> campaign(new Campaign(std::move(assets), std::move(log), std::move(clock)));
  campaign->id_ = config.campaign_id;
  campaign->commit(EventKind::campaign_created,
                   {{"config", config.to_json()},
                    {"class_names", campaign->assets_.class_names},
                    {"pairs", std::move(pairs)}});
  return campaign;
}

std::unique_ptr<Campaign> Campaign::resume(CampaignAssets assets, std::unique_ptr<EventLog> log,
                                           Clock clock) {
  const auto events = log->snapshot();
  ReplayResult replayed = replay(events);
  if (replayed.error) {
    fail(Errc::schema, "cannot resume: record " + std::to_string(replayed.error->seq) + ": " +
                           replayed.error->message);
  }
  if (!replayed.state.created) fail(Errc::not_found, "log holds no campaign");
  for (const auto& p : replayed.state.pairs) assets.ranking(p.image_id, p.method_id);
  std::unique_ptr<Campaign> campaign(new Campaign(std::move(assets), std::move(log), std::move(clock)));
  campaign->state_ = std::move(replayed.state);
  campaign->id_ = campaign->state_.config.campaign_id;
  return campaign;
}

void Campaign::commit(EventKind kind, json payload) {
  Event e{state_.last_seq + 1, clock_(), kind, std::move(payload)};
  log_->append(e);
  state_.apply(e);
}

std::string Campaign::register_worker() {
  std::lock_guard lock(mu_);
  const std::string id = padded_id('w', state_.workers.size() + 1);
  commit(EventKind::worker_registered, {{"worker_id", id}});
  return id;
}

std::vector<std::string> Campaign::assign_tasks(const std::string& worker_id) {
  std::lock_guard lock(mu_);
  const WorkerRecord& worker = state_.worker(worker_id);
  if (!state_.has_remaining_quota()) fail(Errc::campaign_closed, "campaign has no quota left");

  std::set<std::string> had(worker.assigned.begin(), worker.assigned.end());
  std::vector<std::string> eligible;
  for (const auto& p : state_.pairs) {
    if (p.remaining_quota > 0 && !had.count(p.pair_id)) eligible.push_back(p.pair_id);
  }
  const std::size_t k =
      std::min(eligible.size(), static_cast<std::size_t>(state_.config.pairs_per_worker));
  if (k == 0) return {};
  Rng rng(mix_seed(state_.config.seed, state_.last_seq + 1));
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
  }
  eligible.resize(k);
  commit(EventKind::pairs_assigned, {{"worker_id", worker_id}, {"pairs", eligible}});
  return eligible;
}

TaskView Campaign::render(const Trial& trial, int step) const {
  const PairInfo& pair = state_.pair(trial.pair_id);
  const DatasetItem& item = assets_.images.at(pair.image_id);
  const double rate = state_.config.schedule[static_cast<std::size_t>(step)];
  TaskView view;
  view.trial_id = trial.trial_id;
  view.pair_id = trial.pair_id;
  view.step = step;
  view.rate = rate;
  view.image = apply_mask(item.image,
                          reveal_set(assets_.ranking(pair.image_id, pair.method_id), rate,
                                     item.image.pixel_count()),
                          FillStrategy::black());
  view.choices = trial.choices;
  view.idk_allowed = true;
  return view;
}

TaskView Campaign::start_locked(const std::string& worker_id, const std::string& pair_id) {
  const WorkerRecord& worker = state_.worker(worker_id);
  if (std::find(worker.assigned.begin(), worker.assigned.end(), pair_id) ==
      worker.assigned.end()) {
    fail(Errc::not_found, "pair '" + pair_id + "' is not assigned to " + worker_id);
  }
  if (worker.started.count(pair_id)) {
    fail(Errc::conflict, "pair '" + pair_id + "' already started by " + worker_id);
  }
  const std::size_t number = state_.trials.size() + 1;
  const std::string trial_id = padded_id('t', number);
  const PairInfo& pair = state_.pair(pair_id);
  const ChoiceSet choices = build_choices(pair.label, state_.class_names,
                                          state_.config.wrong_choices,
                                          mix_seed(state_.config.seed, kChoiceStream + number));
  commit(EventKind::trial_started, {{"trial_id", trial_id},
                                    {"worker_id", worker_id},
                                    {"pair_id", pair_id},
                                    {"choices", choices.labels}});
  return render(state_.trials.at(trial_id), 0);
}

TaskView Campaign::start_trial(const std::string& worker_id, const std::string& pair_id) {
  std::lock_guard lock(mu_);
  return start_locked(worker_id, pair_id);
}

TrialOutcome Campaign::outcome_for(const Trial& trial, const AnswerRecord& answer) const {
  TrialOutcome out;
  out.rate = answer.rate;
  if (answer.kind == AnswerKind::correct) {
    out.kind = TrialOutcome::Kind::correct;
  } else if (static_cast<std::size_t>(answer.step) + 1 == state_.config.schedule.size()) {
    out.kind = TrialOutcome::Kind::exhausted;
  } else {
    out.kind = TrialOutcome::Kind::advance;
    out.next = render(trial, answer.step + 1);
  }
  return out;
}

TrialOutcome Campaign::submit_answer(const std::string& worker_id, const std::string& trial_id,
                                     int step, const std::string& choice) {
  std::lock_guard lock(mu_);
  const Trial& trial = state_.trial(trial_id);
  if (trial.worker_id != worker_id) {
    fail(Errc::unauthorized, "trial '" + trial_id + "' belongs to another worker");
  }
  if (choice != kIdkChoice && !trial.choices.contains(choice)) {
    fail(Errc::invalid_argument, "unknown choice token '" + choice + "'");
  }
  if (step >= 0 && static_cast<std::size_t>(step) < trial.history.size()) {
    const AnswerRecord& earlier = trial.history[static_cast<std::size_t>(step)];
    if (earlier.choice != choice) {
      fail(Errc::conflict, "step " + std::to_string(step) + " of '" + trial_id +
                               "' was already answered differently");
    }
    return outcome_for(trial, earlier);
  }
  if (trial.terminal()) fail(Errc::conflict, "trial '" + trial_id + "' is already complete");
  if (step != trial.position) {
    fail(Errc::conflict, "trial '" + trial_id + "' is at step " +
                             std::to_string(trial.position) + ", not " + std::to_string(step));
  }

  const PairInfo& pair = state_.pair(trial.pair_id);
  const double rate = state_.config.schedule[static_cast<std::size_t>(step)];
  const AnswerKind kind = choice == kIdkChoice   ? AnswerKind::idk
                          : choice == pair.label ? AnswerKind::correct
                                                 : AnswerKind::wrong;
  const bool final_step = static_cast<std::size_t>(step) + 1 == state_.config.schedule.size();
  commit(EventKind::answer_submitted, {{"trial_id", trial_id},
                                       {"step", step},
                                       {"rate", rate},
                                       {"choice", choice},
                                       {"outcome", answer_kind_name(kind)}});
  if (kind == AnswerKind::correct) {
    commit(EventKind::trial_completed,
           {{"trial_id", trial_id}, {"status", "correct"}, {"rate", rate}});
  } else if (final_step) {
    commit(EventKind::trial_completed, {{"trial_id", trial_id}, {"status", "exhausted"}});
  }
  const Trial& updated = state_.trials.at(trial_id);
  return outcome_for(updated, updated.history.back());
}

void Campaign::abandon_trial(const std::string& worker_id, const std::string& trial_id) {
  std::lock_guard lock(mu_);
  const Trial& trial = state_.trial(trial_id);
  if (trial.worker_id != worker_id) {
    fail(Errc::unauthorized, "trial '" + trial_id + "' belongs to another worker");
  }
  if (trial.terminal()) fail(Errc::conflict, "trial '" + trial_id + "' is already complete");
  commit(EventKind::trial_completed, {{"trial_id", trial_id}, {"status", "abandoned"}});
}

std::optional<TaskView> Campaign::next_trial(const std::string& worker_id) {
  std::lock_guard lock(mu_);
  const WorkerRecord& worker = state_.worker(worker_id);
  for (const auto& [id, trial] : state_.trials) {
    if (trial.worker_id == worker_id && !trial.terminal()) return render(trial, trial.position);
  }
  for (const auto& pair_id : worker.assigned) {
    if (!worker.started.count(pair_id)) return start_locked(worker_id, pair_id);
  }
  return std::nullopt;
}

CampaignState Campaign::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

}  // namespace peekaboom
