#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "peekaboom/crowdgame.hpp"
#include "peekaboom/error.hpp"
#include "peekaboom/metrics.hpp"
#include "support.hpp"

using namespace peekaboom;

namespace {

// Minimal assets: classes x images_per_class one-pixel images, every method.
CampaignAssets shaped_assets(int classes, int per_class, const std::vector<std::string>& methods) {
  CampaignAssets a;
  for (int c = 0; c < classes; ++c) a.class_names.push_back("class" + std::to_string(c));
  PixelRanking one;
  one.order = {0};
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      DatasetItem item;
      item.id = "i" + std::to_string(c) + "_" + std::to_string(i);
      item.label = c;
      item.image = ImageTensor::filled(1, 1, 3, 0.5);
      for (const auto& m : methods) a.rankings[item.id][m] = one;
      a.images[item.id] = item;
    }
  }
  return a;
}

std::unique_ptr<Campaign> fresh(const CampaignConfig& cfg = testing::small_config(), int classes = 4,
                                int per_class = 3) {
  static const auto fx = testing::make_game_fixture(4, 3);
  if (classes == 4 && per_class == 3) {
    return testing::make_campaign(fx, cfg, EventLog::open("", Durability::memory));
  }
  return testing::make_campaign(testing::make_game_fixture(classes, per_class), cfg,
                                EventLog::open("", Durability::memory));
}

template <class F>
Errc code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::invalid_argument;
}

std::string wrong_label(const TaskView& v, const std::string& correct) {
  for (const auto& l : v.choices.labels) {
    if (l != correct) return l;
  }
  return "";
}

}  // namespace

TEST_CASE("campaign pair pools match the published campaign shapes") {
  const std::vector<std::string> methods{"gradcam", "guided_bp", "smoothgrad", "vanilla", "random"};
  CampaignConfig cfg;
  cfg.methods = methods;
  cfg.dataset_id = "food";
  auto food = Campaign::create(cfg, shaped_assets(30, 10, methods),
                               EventLog::open("", Durability::memory), logical_clock());
  const auto state = food->snapshot();
  CHECK(state.pairs.size() == 1500);
  long capacity = 0;
  for (const auto& p : state.pairs) capacity += p.remaining_quota;
  CHECK(capacity == 15000);
  CHECK(state.config.quota == 10);
  CHECK(state.config.pairs_per_worker == 20);
  CHECK(state.config.wrong_choices == 4);

  auto animal = Campaign::create(cfg, shaped_assets(95, 10, methods),
                                 EventLog::open("", Durability::memory), logical_clock());
  CHECK(animal->snapshot().pairs.size() == 4750);
}

TEST_CASE("campaign creation errors") {
  const auto fx = testing::make_game_fixture();
  CampaignConfig cfg = testing::small_config();
  cfg.methods = {"oracle", "gradcam"};
  CHECK(code_of([&] { make_campaign_assets(fx.dataset, fx.maps, cfg.methods); }) ==
        Errc::missing_saliency);
  cfg = testing::small_config();
  cfg.quota = 0;
  CHECK(code_of([&] { testing::make_campaign(fx, cfg, EventLog::open("", Durability::memory)); }) ==
        Errc::invalid_argument);
  cfg = testing::small_config();
  cfg.wrong_choices = 4;  // only 3 other classes
  CHECK(code_of([&] { testing::make_campaign(fx, cfg, EventLog::open("", Durability::memory)); }) ==
        Errc::invalid_argument);
}

TEST_CASE("config JSON round trip") {
  CampaignConfig cfg = testing::small_config();
  cfg.schedule = ExposureSchedule({0.25, 0.5, 1.0});
  CHECK(CampaignConfig::from_json(cfg.to_json()) == cfg);
  CHECK_THROWS_AS(CampaignConfig::from_json(nlohmann::json{{"quota", "ten"}}), Error);
}

TEST_CASE("assignment samples distinct pairs with quota") {
  CampaignConfig cfg;
  cfg.methods = {"a", "b"};
  auto c = Campaign::create(cfg, shaped_assets(5, 10, cfg.methods),
                            EventLog::open("", Durability::memory), logical_clock());
  const auto w = c->register_worker();
  const auto pairs = c->assign_tasks(w);
  CHECK(pairs.size() == 20);
  CHECK(std::set<std::string>(pairs.begin(), pairs.end()).size() == 20);
  const auto more = c->assign_tasks(w);
  for (const auto& p : more) CHECK(std::find(pairs.begin(), pairs.end(), p) == pairs.end());
  CHECK(code_of([&] { c->assign_tasks("w999"); }) == Errc::unknown_worker);
}

TEST_CASE("assignment returns what remains and then closes") {
  CampaignConfig cfg = testing::small_config();
  cfg.quota = 1;
  cfg.pairs_per_worker = 20;
  auto c = fresh(cfg);
  const auto total = c->snapshot().pairs.size();  // 24
  const auto w1 = c->register_worker();
  CHECK(c->assign_tasks(w1).size() == 20);
  const auto w2 = c->register_worker();
  CHECK(c->assign_tasks(w2).size() == total - 20);
  const auto w3 = c->register_worker();
  CHECK(code_of([&] { c->assign_tasks(w3); }) == Errc::campaign_closed);
}

TEST_CASE("concurrent assignment never exceeds quota") {
  CampaignConfig cfg;
  cfg.methods = {"a", "b"};
  cfg.quota = 3;
  cfg.pairs_per_worker = 7;
  auto c = Campaign::create(cfg, shaped_assets(5, 4, cfg.methods),
                            EventLog::open("", Durability::memory), logical_clock());
  std::atomic<int> assigned{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 50; ++t) {
    threads.emplace_back([&] {
      const auto w = c->register_worker();
      try {
        assigned += static_cast<int>(c->assign_tasks(w).size());
      } catch (const Error& e) {
        CHECK(e.code() == Errc::campaign_closed);
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto state = c->snapshot();
  CHECK(assigned.load() == 40 * 3);
  std::map<std::string, int> per_pair;
  for (const auto& [id, w] : state.workers) {
    CHECK(std::set<std::string>(w.assigned.begin(), w.assigned.end()).size() == w.assigned.size());
    for (const auto& p : w.assigned) per_pair[p]++;
  }
  for (const auto& p : state.pairs) {
    CHECK(p.remaining_quota == 0);
    CHECK(per_pair[p.pair_id] == 3);
  }
  CHECK(replay(c->events()).state == state);
}

TEST_CASE("build_choices") {
  std::vector<std::string> classes;
  for (int i = 0; i < 30; ++i) classes.push_back("c" + std::to_string(i));

  const ChoiceSet all = build_choices("c3", classes, 29, 1);
  CHECK(std::set<std::string>(all.labels.begin(), all.labels.end()) ==
        std::set<std::string>(classes.begin(), classes.end()));
  CHECK(build_choices("c3", classes, 4, 77) == build_choices("c3", classes, 4, 77));
  CHECK_THROWS_AS(build_choices("c3", classes, 30, 1), Error);
  CHECK_THROWS_AS(build_choices("zz", classes, 2, 1), Error);

  std::map<std::string, int> counts;
  std::map<std::size_t, int> correct_slot;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    const ChoiceSet set = build_choices("c0", classes, 4, static_cast<std::uint64_t>(s));
    REQUIRE(set.labels.size() == 5);
    CHECK(std::count(set.labels.begin(), set.labels.end(), "c0") == 1);
    CHECK(std::set<std::string>(set.labels.begin(), set.labels.end()).size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      if (set.labels[i] == "c0") {
        correct_slot[i]++;
      } else {
        counts[set.labels[i]]++;
      }
    }
  }
  REQUIRE(counts.size() == 29);
  const double p = 4.0 / 29.0;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (const auto& [label, n] : counts) CHECK(std::abs(n - draws * p) <= 5 * sigma);
  const double ps = 0.2, ss = std::sqrt(draws * ps * (1 - ps));
  for (const auto& [slot, n] : correct_slot) CHECK(std::abs(n - draws * ps) <= 5 * ss);
}

TEST_CASE("start_trial shows the first exposure with an IDK option") {
  auto c = fresh();
  const auto w = c->register_worker();
  const auto pairs = c->assign_tasks(w);
  const TaskView v = c->start_trial(w, pairs[0]);
  CHECK(v.step == 0);
  CHECK(v.rate == 0.05);
  CHECK(v.idk_allowed);
  CHECK(v.choices.labels.size() == 3);
  std::size_t shown = 0;
  for (std::size_t p = 0; p < v.image.pixel_count(); ++p) {
    bool lit = false;
    for (std::size_t ch = 0; ch < 3; ++ch) lit |= v.image.at(p, ch) != 0.0;
    shown += lit;
  }
  CHECK(shown <= exposure_count(0.05, 100));

  const auto before = c->snapshot();
  CHECK(code_of([&] { c->start_trial(w, pairs[0]); }) == Errc::conflict);
  CHECK(c->snapshot() == before);
  const auto w2 = c->register_worker();
  CHECK(code_of([&] { c->start_trial(w2, pairs[0]); }) == Errc::not_found);
}

TEST_CASE("answer walk: correct, exhausted and wrong-wrong-correct") {
  auto c = fresh();
  const auto w = c->register_worker();
  const auto pairs = c->assign_tasks(w);
  const auto state = c->snapshot();

  TaskView v = c->start_trial(w, pairs[0]);
  const std::string label0 = state.pair(pairs[0]).label;
  TrialOutcome o = c->submit_answer(w, v.trial_id, 0, label0);
  CHECK(o.kind == TrialOutcome::Kind::correct);
  CHECK(o.rate == 0.05);
  CHECK(!o.next);

  v = c->start_trial(w, pairs[1]);
  const std::string tid = v.trial_id;
  double last_rate = 0.0;
  for (int step = 0; step < 8; ++step) {
    o = c->submit_answer(w, tid, step, kIdkChoice);
    CHECK(o.rate >= last_rate);
    last_rate = o.rate;
    if (step < 7) {
      CHECK(o.kind == TrialOutcome::Kind::advance);
      REQUIRE(o.next);
      CHECK(o.next->step == step + 1);
    }
  }
  CHECK(o.kind == TrialOutcome::Kind::exhausted);
  CHECK(c->snapshot().trial(tid).status == TrialStatus::exhausted);
  CHECK(code_of([&] { c->submit_answer(w, tid, 8, kIdkChoice); }) == Errc::conflict);

  v = c->start_trial(w, pairs[2]);
  const std::string label2 = state.pair(pairs[2]).label;
  const std::string wrong = wrong_label(v, label2);
  CHECK(c->submit_answer(w, v.trial_id, 0, wrong).kind == TrialOutcome::Kind::advance);
  CHECK(c->submit_answer(w, v.trial_id, 1, wrong).kind == TrialOutcome::Kind::advance);
  o = c->submit_answer(w, v.trial_id, 2, label2);
  CHECK(o.kind == TrialOutcome::Kind::correct);
  CHECK(o.rate == 0.15);
  const Trial t = c->snapshot().trial(v.trial_id);
  CHECK(t.correct_rate == 0.15);
  REQUIRE(t.history.size() == 3);
  CHECK(t.history[0].kind == AnswerKind::wrong);
}

TEST_CASE("submission errors and idempotency") {
  auto c = fresh();
  const auto w = c->register_worker();
  const auto other = c->register_worker();
  const auto pairs = c->assign_tasks(w);
  const TaskView v = c->start_trial(w, pairs[0]);
  const std::string label = c->snapshot().pair(pairs[0]).label;

  CHECK(code_of([&] { c->submit_answer(w, v.trial_id, 0, "no-such-label"); }) ==
        Errc::invalid_argument);
  CHECK(code_of([&] { c->submit_answer(other, v.trial_id, 0, kIdkChoice); }) ==
        Errc::unauthorized);
  CHECK(code_of([&] { c->submit_answer(w, "t99999", 0, kIdkChoice); }) == Errc::not_found);
  CHECK(code_of([&] { c->submit_answer(w, v.trial_id, 3, kIdkChoice); }) == Errc::conflict);

  const TrialOutcome first = c->submit_answer(w, v.trial_id, 0, kIdkChoice);
  const auto seq = c->log().last_seq();
  const TrialOutcome again = c->submit_answer(w, v.trial_id, 0, kIdkChoice);
  CHECK(c->log().last_seq() == seq);
  CHECK(again.kind == first.kind);
  REQUIRE(again.next);
  CHECK(again.next->step == 1);
  CHECK(code_of([&] { c->submit_answer(w, v.trial_id, 0, label); }) == Errc::conflict);

  c->submit_answer(w, v.trial_id, 1, label);
  const TrialOutcome replayed = c->submit_answer(w, v.trial_id, 1, label);
  CHECK(replayed.kind == TrialOutcome::Kind::correct);
  CHECK(c->log().last_seq() == seq + 2);
}

TEST_CASE("abandoning a trial keeps its quota consumed") {
  auto c = fresh();
  const auto w = c->register_worker();
  const auto pairs = c->assign_tasks(w);
  const int quota_before = c->snapshot().pair(pairs[0]).remaining_quota;
  const TaskView v = c->start_trial(w, pairs[0]);
  const auto other = c->register_worker();
  CHECK(code_of([&] { c->abandon_trial(other, v.trial_id); }) == Errc::unauthorized);
  c->abandon_trial(w, v.trial_id);
  const auto s = c->snapshot();
  CHECK(s.trial(v.trial_id).status == TrialStatus::abandoned);
  CHECK(s.pair(pairs[0]).remaining_quota == quota_before);
  CHECK(code_of([&] { c->abandon_trial(w, v.trial_id); }) == Errc::conflict);
  CHECK(code_of([&] { c->submit_answer(w, v.trial_id, 0, kIdkChoice); }) == Errc::conflict);

  const auto events = c->events();
  CHECK(completed_trials(events).empty());
  const auto with = completed_trials(events, true);
  REQUIRE(with.size() == 1);
  CHECK(!with[0].correct);
}

TEST_CASE("next_trial resumes the open trial before starting another") {
  auto c = fresh();
  const auto w = c->register_worker();
  CHECK(!c->next_trial(w));
  const auto pairs = c->assign_tasks(w);
  const auto v = c->next_trial(w);
  REQUIRE(v);
  CHECK(v->pair_id == pairs[0]);
  c->submit_answer(w, v->trial_id, 0, kIdkChoice);
  const auto again = c->next_trial(w);
  REQUIRE(again);
  CHECK(again->trial_id == v->trial_id);
  CHECK(again->step == 1);
}

TEST_CASE("completed campaigns satisfy quota, terminality and replay equivalence") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CampaignConfig cfg = testing::small_config();
    cfg.seed = seed;
    auto c = fresh(cfg);
    testing::play_out(*c, seed);
    const auto state = c->snapshot();
    const auto events = c->events();
    std::map<std::string, int> per_pair;
    for (const auto& [id, w] : state.workers) {
      for (const auto& p : w.assigned) per_pair[p]++;
    }
    for (const auto& p : state.pairs) {
      CHECK(per_pair[p.pair_id] == cfg.quota);
      CHECK(p.remaining_quota == 0);
    }
    std::set<std::string> finished;
    std::map<std::string, double> last_rate;
    for (const auto& e : events) {
      const std::string tid = e.payload.value("trial_id", "");
      if (tid.empty()) continue;
      CHECK(finished.count(tid) == 0);
      if (e.kind == EventKind::answer_submitted) {
        const double r = e.payload.at("rate");
        CHECK(r >= last_rate[tid]);
        last_rate[tid] = r;
      }
      if (e.kind == EventKind::trial_completed) finished.insert(tid);
      CHECK(e.seq > 0);
    }
    for (std::size_t i = 1; i < events.size(); ++i) {
      CHECK(events[i].seq == events[i - 1].seq + 1);
      CHECK(events[i].timestamp > events[i - 1].timestamp);
    }
    CHECK(replay(events).state == state);
    CHECK(completed_trials(events).size() ==
          static_cast<std::size_t>(cfg.quota) * state.pairs.size());
  }
}

TEST_CASE("resume continues from the log") {
  const auto fx = testing::make_game_fixture();
  testing::TempDir dir("resume");
  const auto path = log_path(dir.path(), "camp");
  std::string first_worker;
  {
    auto c = testing::make_campaign(fx, testing::small_config(), EventLog::open(path, Durability::flush));
    first_worker = c->register_worker();
    c->assign_tasks(first_worker);
  }
  auto assets = make_campaign_assets(fx.dataset, fx.maps, testing::small_config().methods);
  auto c = Campaign::resume(std::move(assets), EventLog::open(path, Durability::flush), logical_clock(100));
  CHECK(c->id() == "camp");
  CHECK(c->snapshot().workers.count(first_worker) == 1);
  CHECK(c->register_worker() != first_worker);
  testing::play_out(*c);
  CHECK(replay_file(path).state == c->snapshot());
  CHECK(code_of([&] {
          testing::make_campaign(fx, testing::small_config(), EventLog::open(path, Durability::flush));
        }) == Errc::conflict);
}
