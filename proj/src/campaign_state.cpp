#include "peekaboom/campaign_state.hpp"

#include <algorithm>

#include "peekaboom/error.hpp"

namespace peekaboom {

using nlohmann::json;

namespace {

[[noreturn]] void illegal(const Event& e, const std::string& why) {
  fail(Errc::schema, "event " + std::to_string(e.seq) + " (" +
                         std::string(event_kind_name(e.kind)) + "): " + why);
}

template <typename T>
T field(const Event& e, const char* key) {
  try {
    return e.payload.at(key).get<T>();
  } catch (const json::exception&) {
    illegal(e, std::string("missing or mistyped field '") + key + "'");
  }
}

TrialStatus parse_status(const Event& e, const std::string& s) {
  if (s == "correct") return TrialStatus::correct;
  if (s == "exhausted") return TrialStatus::exhausted;
  if (s == "abandoned") return TrialStatus::abandoned;
  illegal(e, "unknown trial status '" + s + "'");
}

AnswerKind parse_answer(const Event& e, const std::string& s) {
  if (s == "correct") return AnswerKind::correct;
  if (s == "wrong") return AnswerKind::wrong;
  if (s == "idk") return AnswerKind::idk;
  illegal(e, "unknown answer kind '" + s + "'");
}

}  // namespace

void CampaignConfig::validate(int class_count) const {
  if (campaign_id.empty()) fail(Errc::invalid_argument, "campaign id is empty");
  if (methods.empty()) fail(Errc::invalid_argument, "campaign has no methods");
  if (quota < 1) fail(Errc::invalid_argument, "quota must be at least 1");
  if (pairs_per_worker < 1) fail(Errc::invalid_argument, "pairs-per-worker must be at least 1");
  if (wrong_choices < 1 || wrong_choices >= class_count) {
    fail(Errc::invalid_argument, "wrong-choice count must be in [1, class count)");
  }
}

json CampaignConfig::to_json() const {
  return json{{"campaign_id", campaign_id},   {"dataset_id", dataset_id},
              {"dataset_dir", dataset_dir},   {"saliency_dir", saliency_dir},
              {"methods", methods},           {"schedule", schedule.rates()},
              {"quota", quota},               {"pairs_per_worker", pairs_per_worker},
              {"wrong_choices", wrong_choices}, {"seed", seed}};
}

CampaignConfig CampaignConfig::from_json(const json& doc) {
  CampaignConfig c;
  try {
    c.campaign_id = doc.value("campaign_id", c.campaign_id);
    c.dataset_id = doc.value("dataset_id", c.dataset_id);
    c.dataset_dir = doc.value("dataset_dir", c.dataset_dir);
    c.saliency_dir = doc.value("saliency_dir", c.saliency_dir);
    c.methods = doc.value("methods", c.methods);
    if (doc.contains("schedule")) {
      c.schedule = ExposureSchedule(doc.at("schedule").get<std::vector<double>>());
    }
    c.quota = doc.value("quota", c.quota);
    c.pairs_per_worker = doc.value("pairs_per_worker", c.pairs_per_worker);
    c.wrong_choices = doc.value("wrong_choices", c.wrong_choices);
    c.seed = doc.value("seed", c.seed);
  } catch (const json::exception& e) {
    fail(Errc::schema, std::string("malformed campaign config: ") + e.what());
  }
  return c;
}

bool ChoiceSet::contains(const std::string& label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

std::string_view trial_status_name(TrialStatus status) {
  switch (status) {
    case TrialStatus::in_progress: return "in_progress";
    case TrialStatus::correct: return "correct";
    case TrialStatus::exhausted: return "exhausted";
    case TrialStatus::abandoned: return "abandoned";
  }
  return "in_progress";
}

std::string_view answer_kind_name(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::correct: return "correct";
    case AnswerKind::wrong: return "wrong";
    case AnswerKind::idk: return "idk";
  }
  return "idk";
}

const PairInfo& CampaignState::pair(const std::string& pair_id) const {
  auto it = pair_index.find(pair_id);
  if (it == pair_index.end()) fail(Errc::not_found, "unknown pair '" + pair_id + "'");
  return pairs[it->second];
}

const Trial& CampaignState::trial(const std::string& trial_id) const {
  auto it = trials.find(trial_id);
  if (it == trials.end()) fail(Errc::not_found, "unknown trial '" + trial_id + "'");
  return it->second;
}

const WorkerRecord& CampaignState::worker(const std::string& worker_id) const {
  auto it = workers.find(worker_id);
  if (it == workers.end()) fail(Errc::unknown_worker, "unknown worker '" + worker_id + "'");
  return it->second;
}

bool CampaignState::has_remaining_quota() const {
  return std::any_of(pairs.begin(), pairs.end(),
                     [](const PairInfo& p) { return p.remaining_quota > 0; });
}

void CampaignState::apply(const Event& e) {
  if (e.seq != last_seq + 1) {
    fail(Errc::sequence, "expected sequence " + std::to_string(last_seq + 1) + ", got " +
                             std::to_string(e.seq));
  }
  if (!e.payload.is_object()) illegal(e, "payload is not an object");
  if (!created && e.kind != EventKind::campaign_created) {
    illegal(e, "first event must be campaign_created");
  }

  switch (e.kind) {
    case EventKind::campaign_created: {
      if (created) illegal(e, "campaign already created");
      CampaignConfig cfg;
      try {
        cfg = CampaignConfig::from_json(e.payload.at("config"));
      } catch (const json::exception&) {
        illegal(e, "missing config");
      } catch (const Error& err) {
        illegal(e, err.what());
      }
      auto names = field<std::vector<std::string>>(e, "class_names");
      std::vector<PairInfo> new_pairs;
      std::map<std::string, std::size_t> index;
      if (!e.payload.contains("pairs") || !e.payload["pairs"].is_array()) {
        illegal(e, "missing pairs");
      }
      for (const auto& p : e.payload["pairs"]) {
        PairInfo info;
        try {
          info.pair_id = p.at("pair_id").get<std::string>();
          info.image_id = p.at("image_id").get<std::string>();
          info.method_id = p.at("method_id").get<std::string>();
          info.label = p.at("label").get<std::string>();
        } catch (const json::exception&) {
          illegal(e, "malformed pair record");
        }
        info.remaining_quota = cfg.quota;
        if (!index.emplace(info.pair_id, new_pairs.size()).second) {
          illegal(e, "duplicate pair id " + info.pair_id);
        }
        new_pairs.push_back(std::move(info));
      }
      created = true;
      config = std::move(cfg);
      class_names = std::move(names);
      pairs = std::move(new_pairs);
      pair_index = std::move(index);
      break;
    }
    case EventKind::worker_registered: {
      auto id = field<std::string>(e, "worker_id");
      if (workers.count(id)) illegal(e, "worker " + id + " already registered");
      workers[id] = WorkerRecord{id, {}, {}};
      break;
    }
    case EventKind::pairs_assigned: {
      auto id = field<std::string>(e, "worker_id");
      auto ids = field<std::vector<std::string>>(e, "pairs");
      auto wit = workers.find(id);
      if (wit == workers.end()) illegal(e, "unknown worker " + id);
      std::set<std::string> seen(wit->second.assigned.begin(), wit->second.assigned.end());
      for (const auto& pid : ids) {
        auto pit = pair_index.find(pid);
        if (pit == pair_index.end()) illegal(e, "unknown pair " + pid);
        if (pairs[pit->second].remaining_quota <= 0) illegal(e, "pair " + pid + " over quota");
        if (!seen.insert(pid).second) illegal(e, "pair " + pid + " assigned twice to " + id);
      }
      for (const auto& pid : ids) {
        --pairs[pair_index[pid]].remaining_quota;
        wit->second.assigned.push_back(pid);
      }
      break;
    }
    case EventKind::trial_started: {
      auto tid = field<std::string>(e, "trial_id");
      auto wid = field<std::string>(e, "worker_id");
      auto pid = field<std::string>(e, "pair_id");
      auto labels = field<std::vector<std::string>>(e, "choices");
      if (trials.count(tid)) illegal(e, "trial " + tid + " already exists");
      auto wit = workers.find(wid);
      if (wit == workers.end()) illegal(e, "unknown worker " + wid);
      auto& w = wit->second;
      if (std::find(w.assigned.begin(), w.assigned.end(), pid) == w.assigned.end()) {
        illegal(e, "pair " + pid + " not assigned to " + wid);
      }
      if (w.started.count(pid)) illegal(e, "pair " + pid + " already started by " + wid);
      w.started.insert(pid);
      Trial t;
      t.trial_id = tid;
      t.worker_id = wid;
      t.pair_id = pid;
      t.choices.labels = std::move(labels);
      trials[tid] = std::move(t);
      break;
    }
    case EventKind::answer_submitted: {
      auto tid = field<std::string>(e, "trial_id");
      const int step = field<int>(e, "step");
      const double rate = field<double>(e, "rate");
      auto choice = field<std::string>(e, "choice");
      const AnswerKind kind = parse_answer(e, field<std::string>(e, "outcome"));
      auto it = trials.find(tid);
      if (it == trials.end()) illegal(e, "unknown trial " + tid);
      Trial& t = it->second;
      if (t.terminal()) illegal(e, "trial " + tid + " is already terminal");
      if (step != t.position) illegal(e, "answer step does not match trial position");
      if (!t.history.empty() && t.history.back().step == step) {
        illegal(e, "trial " + tid + " awaits completion");
      }
      if (rate != config.schedule[static_cast<std::size_t>(step)]) {
        illegal(e, "answer rate does not match schedule");
      }
      t.history.push_back(AnswerRecord{step, rate, choice, kind, e.timestamp});
      if (kind != AnswerKind::correct &&
          static_cast<std::size_t>(step) + 1 < config.schedule.size()) {
        ++t.position;
      }
      break;
    }
    case EventKind::trial_completed: {
      auto tid = field<std::string>(e, "trial_id");
      const TrialStatus status = parse_status(e, field<std::string>(e, "status"));
      auto it = trials.find(tid);
      if (it == trials.end()) illegal(e, "unknown trial " + tid);
      Trial& t = it->second;
      if (t.terminal()) illegal(e, "trial " + tid + " is already terminal");
      const AnswerRecord* last = t.history.empty() ? nullptr : &t.history.back();
      if (status == TrialStatus::correct) {
        if (last == nullptr || last->kind != AnswerKind::correct) {
          illegal(e, "correct completion without a correct answer");
        }
        if (field<double>(e, "rate") != last->rate) illegal(e, "completion rate mismatch");
        t.correct_rate = last->rate;
      } else if (status == TrialStatus::exhausted) {
        if (last == nullptr || last->kind == AnswerKind::correct ||
            static_cast<std::size_t>(last->step) + 1 != config.schedule.size()) {
          illegal(e, "exhausted completion before the final exposure");
        }
      }
      t.status = status;
      break;
    }
  }
  last_seq = e.seq;
}

}  // namespace peekaboom
