#include "peekaboom/simcrowd.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "peekaboom/error.hpp"
#include "peekaboom/random.hpp"

namespace peekaboom {

namespace {

enum class Shape { square, disk, triangle, cross };
constexpr std::array<const char*, 4> kShapeNames = {"square", "disk", "triangle", "cross"};

struct Color {
  const char* name;
  double rgb[3];
};
constexpr std::array<Color, 6> kColors = {{
    {"red", {0.85, 0.15, 0.15}},
    {"green", {0.15, 0.75, 0.20}},
    {"blue", {0.20, 0.30, 0.90}},
    {"yellow", {0.90, 0.85, 0.15}},
    {"magenta", {0.85, 0.20, 0.80}},
    {"cyan", {0.15, 0.80, 0.85}},
}};

// Class k: color k mod 6, shape (k + k/6) mod 4; the first six classes
// differ in color, later ones reuse colors with another shape.
std::pair<Shape, const Color*> class_design(int k) {
  return {static_cast<Shape>((k + k / 6) % 4), &kColors[static_cast<std::size_t>(k % 6)]};
}

bool inside(Shape shape, double dx, double dy, double half) {
  switch (shape) {
    case Shape::square:
      return std::fabs(dx) <= half && std::fabs(dy) <= half;
    case Shape::disk:
      return dx * dx + dy * dy <= half * half;
    case Shape::triangle: {
      // Apex up; width grows linearly towards the base.
      if (dy < -half || dy > half) return false;
      return std::fabs(dx) <= 0.5 * (dy + half);
    }
    case Shape::cross: {
      const double arm = std::max(0.5, half / 3.0);
      return (std::fabs(dx) <= arm && std::fabs(dy) <= half) ||
             (std::fabs(dy) <= arm && std::fabs(dx) <= half);
    }
  }
  return false;
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void SyntheticDatasetConfig::validate() const {
  if (class_count < 2 || class_count > kMaxSyntheticClasses) {
    fail(Errc::invalid_argument, "synthetic class count must be in [2, " +
                                     std::to_string(kMaxSyntheticClasses) + "]");
  }
  if (images_per_class < 1) fail(Errc::invalid_argument, "images per class must be positive");
  if (!(noise >= 0.0) || noise > 1.0) fail(Errc::invalid_argument, "noise must be in [0,1]");
  if (width < 8 || height < 8) {
    fail(Errc::invalid_argument,
         "object-size constraint unsatisfiable: images must be at least 8x8");
  }
}

Dataset generate_synthetic_dataset(const SyntheticDatasetConfig& config) {
  config.validate();
  Dataset dataset;
  for (int k = 0; k < config.class_count; ++k) {
    const auto [shape, color] = class_design(k);
    dataset.class_names.push_back(std::string(color->name) + "_" +
                                  kShapeNames[static_cast<std::size_t>(shape)]);
  }
  Rng rng(config.seed);
  const std::size_t w = config.width, h = config.height, n = w * h;
  const double side = static_cast<double>(std::min(w, h));

  for (int i = 0; i < config.images_per_class; ++i) {
    for (int k = 0; k < config.class_count; ++k) {
      const auto [shape, color] = class_design(k);
      DatasetItem item;
      char id[64];
      std::snprintf(id, sizeof(id), "%s%05d", config.id_prefix.c_str(),
                    i * config.class_count + k);
      item.id = id;
      item.label = k;

      std::vector<std::uint8_t> mask;
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const double half = side * (0.12 + 0.26 * uniform01(rng));
        const double cx = half + (static_cast<double>(w) - 1.0 - 2.0 * half) * uniform01(rng);
        const double cy = half + (static_cast<double>(h) - 1.0 - 2.0 * half) * uniform01(rng);
        mask.assign(n, 0);
        std::size_t count = 0;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            if (inside(shape, static_cast<double>(x) - cx, static_cast<double>(y) - cy, half)) {
              mask[y * w + x] = 1;
              ++count;
            }
          }
        }
        const double share = static_cast<double>(count) / static_cast<double>(n);
        placed = share >= 0.05 && share <= 0.40;
      }
      if (!placed) {
        fail(Errc::invalid_argument, "object-size constraint unsatisfiable for a " +
                                         std::to_string(w) + "x" + std::to_string(h) + " image");
      }

      item.image = ImageTensor::filled(w, h, 3, 0.0);
      const double gray = 0.3 + 0.4 * uniform01(rng);
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
          const double base = mask[p] ? color->rgb[c] : gray;
          item.image.at(p, c) = clamp01(base + config.noise * standard_normal(rng));
        }
      }
      item.object_mask = std::move(mask);
      dataset.items.push_back(std::move(item));
    }
  }
  return dataset;
}

SaliencyMap oracle_saliency(std::span<const std::uint8_t> object_mask, std::size_t width,
                            std::size_t height, std::string image_id) {
  if (object_mask.size() != width * height || object_mask.empty()) {
    fail(Errc::dimension_mismatch, "oracle mask does not match width*height");
  }
  if (std::none_of(object_mask.begin(), object_mask.end(), [](auto v) { return v != 0; })) {
    fail(Errc::invalid_argument, "oracle saliency needs a nonempty object mask");
  }
  SaliencyMap map;
  map.width = width;
  map.height = height;
  map.method_id = kOracleMethod;
  map.image_id = std::move(image_id);
  map.scores.resize(object_mask.size());
  const double n = static_cast<double>(object_mask.size());
  for (std::size_t i = 0; i < object_mask.size(); ++i) {
    map.scores[i] =
        object_mask[i] ? static_cast<float>(1.0 - 1e-3 * (static_cast<double>(i) / n)) : 0.0f;
  }
  return map;
}

std::vector<WorkerProfile> make_population(std::size_t count, std::uint64_t seed,
                                           double theta_min, double theta_max, double guess) {
  if (!(theta_min >= 0.0 && theta_min <= theta_max && theta_max <= 1.0)) {
    fail(Errc::invalid_argument, "theta range must satisfy 0 <= min <= max <= 1");
  }
  if (!(guess >= 0.0 && guess < 1.0)) fail(Errc::invalid_argument, "guess must be in [0,1)");
  Rng rng(seed);
  std::vector<WorkerProfile> out(count);
  for (auto& p : out) {
    p.theta = theta_min + (theta_max - theta_min) * uniform01(rng);
    p.guess = guess;
    p.seed = rng();
  }
  return out;
}

std::string simulate_worker_answer(const WorkerProfile& profile, double revealed_object_fraction,
                                   const ChoiceSet& choices, const std::string& correct_label,
                                   std::uint64_t step_seed) {
  if (revealed_object_fraction >= profile.theta) return correct_label;
  Rng rng(mix_seed(profile.seed, step_seed));
  if (profile.guess > 0.0 && uniform01(rng) < profile.guess && !choices.labels.empty()) {
    return choices.labels[uniform_index(rng, choices.labels.size())];
  }
  return kIdkChoice;
}

PerceptionTable build_perception(const CampaignState& state, const CampaignAssets& assets) {
  PerceptionTable table;
  const auto& rates = state.config.schedule.rates();
  for (const auto& pair : state.pairs) {
    const DatasetItem& item = assets.images.at(pair.image_id);
    if (item.object_mask.empty()) {
      fail(Errc::invalid_argument, "image '" + pair.image_id + "' has no object mask");
    }
    const auto& order = assets.ranking(pair.image_id, pair.method_id).order;
    const auto object_size = static_cast<double>(
        std::count(item.object_mask.begin(), item.object_mask.end(), std::uint8_t{1}));
    PairPerception p;
    p.label = pair.label;
    std::size_t revealed = 0, covered = 0;
    for (double r : rates) {
      const std::size_t k = exposure_count(r, order.size());
      for (; revealed < k; ++revealed) covered += item.object_mask[order[revealed]] ? 1 : 0;
      p.coverage.push_back(static_cast<double>(covered) / object_size);
    }
    table[pair.pair_id] = std::move(p);
  }
  return table;
}

std::string InProcessTransport::register_worker() { return campaign_.register_worker(); }

std::vector<std::string> InProcessTransport::assign(const std::string& worker) {
  return campaign_.assign_tasks(worker);
}

std::optional<WorkerView> InProcessTransport::next_trial(const std::string& worker) {
  auto view = campaign_.next_trial(worker);
  if (!view) return std::nullopt;
  return WorkerView{view->trial_id, view->pair_id, view->step, view->choices};
}

WorkerOutcome InProcessTransport::submit(const std::string& worker, const std::string& trial_id,
                                         int step, const std::string& choice) {
  TrialOutcome out = campaign_.submit_answer(worker, trial_id, step, choice);
  WorkerOutcome result;
  result.kind = out.kind;
  if (out.next) {
    result.next = WorkerView{out.next->trial_id, out.next->pair_id, out.next->step,
                             out.next->choices};
  }
  return result;
}

namespace {

// Plays one worker to the end of its assignment. Returns false once the
// campaign is closed.
bool play_worker(GameTransport& transport, const PerceptionTable& perception,
                 const WorkerProfile& profile, std::uint64_t seed, SimulationReport& report) {
  const std::string worker = transport.register_worker();
  try {
    transport.assign(worker);
  } catch (const Error& e) {
    if (e.code() == Errc::campaign_closed) return false;
    throw;
  }
  ++report.workers_used;
  while (auto view = transport.next_trial(worker)) {
    ++report.trials_played;
    const PairPerception& seen = perception.at(view->pair_id);
    const std::uint64_t trial_seed = mix_seed(seed, fnv1a(view->trial_id));
    for (;;) {
      const std::string choice =
          simulate_worker_answer(profile, seen.coverage.at(static_cast<std::size_t>(view->step)),
                                 view->choices, seen.label,
                                 mix_seed(trial_seed, static_cast<std::uint64_t>(view->step)));
      WorkerOutcome out = transport.submit(worker, view->trial_id, view->step, choice);
      ++report.answers;
      if (out.kind != TrialOutcome::Kind::advance) break;
      view = std::move(out.next);
    }
  }
  return true;
}

}  // namespace

SimulationReport run_simulated_campaign(GameTransport& transport,
                                        const PerceptionTable& perception,
                                        const std::vector<WorkerProfile>& population,
                                        std::uint64_t seed) {
  if (population.empty()) fail(Errc::invalid_argument, "empty worker population");
  SimulationReport report;
  for (const auto& profile : population) {
    if (!play_worker(transport, perception, profile, seed, report)) return report;
  }
  fail(Errc::no_data, "worker population exhausted before the campaign closed (" +
                          std::to_string(population.size()) + " workers)");
}

SimulationReport run_simulated_campaign_concurrent(GameTransport& transport,
                                                   const PerceptionTable& perception,
                                                   const std::vector<WorkerProfile>& population,
                                                   std::uint64_t seed, std::size_t threads) {
  if (population.empty()) fail(Errc::invalid_argument, "empty worker population");
  std::atomic<std::size_t> next{0};
  std::atomic<bool> closed{false};
  std::vector<SimulationReport> reports(threads);
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        while (!closed.load()) {
          const std::size_t i = next.fetch_add(1);
          if (i >= population.size()) return;
          if (!play_worker(transport, perception, population[i], seed, reports[t])) {
            closed.store(true);
          }
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SimulationReport total;
  for (const auto& r : reports) {
    total.workers_used += r.workers_used;
    total.trials_played += r.trials_played;
    total.answers += r.answers;
  }
  if (!closed.load()) {
    fail(Errc::no_data, "worker population exhausted before the campaign closed");
  }
  return total;
}

}  // namespace peekaboom
