#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peekaboom/campaign_state.hpp"
#include "peekaboom/crowdgame.hpp"
#include "peekaboom/dataset.hpp"
#include "peekaboom/saliency.hpp"

namespace peekaboom {

struct SyntheticDatasetConfig {
  std::size_t width = 24;
  std::size_t height = 24;
  int class_count = 6;  // each class is one shape/color combination
  int images_per_class = 100;
  double noise = 0.3;   // std-dev of per-pixel background/object noise
  std::uint64_t seed = 7;
  std::string id_prefix = "img";

  void validate() const;
};

// Classes enumerate (shape, color) combinations so neighbouring classes
// differ in both. At most kMaxSyntheticClasses.
inline constexpr int kMaxSyntheticClasses = 24;

// Each image: noisy gray background plus one object whose pixel share is in
// [0.05, 0.40]; object_mask marks it. Errors with invalid_argument when the
// image is too small to satisfy the size constraint.
Dataset generate_synthetic_dataset(const SyntheticDatasetConfig& config);

inline constexpr const char* kOracleMethod = "oracle";

// Object pixels score 1 - 1e-3 * (index / pixel_count); background 0.
SaliencyMap oracle_saliency(std::span<const std::uint8_t> object_mask, std::size_t width,
                            std::size_t height, std::string image_id = {});

struct WorkerProfile {
  double theta = 0.5;  // object coverage needed to recognize the class
  double guess = 0.0;  // chance of a random pick instead of IDK below theta
  std::uint64_t seed = 0;

  bool operator==(const WorkerProfile&) const = default;
};

// Profiles with theta ~ U[theta_min, theta_max] and a common guess rate.
std::vector<WorkerProfile> make_population(std::size_t count, std::uint64_t seed,
                                           double theta_min = 0.1, double theta_max = 0.9,
                                           double guess = 0.1);

// Correct label once coverage reaches theta; otherwise a uniform pick from
// the shown labels with probability guess, else "idk".
std::string simulate_worker_answer(const WorkerProfile& profile, double revealed_object_fraction,
                                   const ChoiceSet& choices, const std::string& correct_label,
                                   std::uint64_t step_seed);

// What a simulated worker perceives per pair: the label and the object
// coverage at every schedule step.
struct PairPerception {
  std::string label;
  std::vector<double> coverage;
};
using PerceptionTable = std::map<std::string, PairPerception>;

PerceptionTable build_perception(const CampaignState& state, const CampaignAssets& assets);

// The calls a worker makes. Implemented in-process and over HTTP.
struct WorkerView {
  std::string trial_id;
  std::string pair_id;
  int step = 0;
  ChoiceSet choices;
};

struct WorkerOutcome {
  TrialOutcome::Kind kind = TrialOutcome::Kind::advance;
  std::optional<WorkerView> next;
};

class GameTransport {
 public:
  virtual ~GameTransport() = default;
  virtual std::string register_worker() = 0;
  // Throws Error(campaign_closed) once no quota is left.
  virtual std::vector<std::string> assign(const std::string& worker) = 0;
  virtual std::optional<WorkerView> next_trial(const std::string& worker) = 0;
  virtual WorkerOutcome submit(const std::string& worker, const std::string& trial_id, int step,
                               const std::string& choice) = 0;
};

class InProcessTransport : public GameTransport {
 public:
  explicit InProcessTransport(Campaign& campaign) : campaign_(campaign) {}
  std::string register_worker() override;
  std::vector<std::string> assign(const std::string& worker) override;
  std::optional<WorkerView> next_trial(const std::string& worker) override;
  WorkerOutcome submit(const std::string& worker, const std::string& trial_id, int step,
                       const std::string& choice) override;

 private:
  Campaign& campaign_;
};

struct SimulationReport {
  std::size_t workers_used = 0;
  std::size_t trials_played = 0;
  std::size_t answers = 0;
};

// Each profile registers once, takes one assignment and plays every
// assigned pair in order. Stops when the campaign closes. Errors with
// no_data if the population runs out first.
SimulationReport run_simulated_campaign(GameTransport& transport,
                                        const PerceptionTable& perception,
                                        const std::vector<WorkerProfile>& population,
                                        std::uint64_t seed);

// Same protocol with `threads` workers playing at once against a shared,
// thread-safe transport.
SimulationReport run_simulated_campaign_concurrent(GameTransport& transport,
                                                   const PerceptionTable& perception,
                                                   const std::vector<WorkerProfile>& population,
                                                   std::uint64_t seed, std::size_t threads);

}  // namespace peekaboom
