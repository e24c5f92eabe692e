#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <memory>
#include <string>

#include "peekaboom/crowdgame.hpp"
#include "peekaboom/simcrowd.hpp"

namespace peekaboom::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pb") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small synthetic dataset with oracle and random maps for every image.
struct GameFixture {
  Dataset dataset;
  std::vector<SaliencyMap> maps;
};

inline GameFixture make_game_fixture(int classes = 4, int per_class = 3, std::uint64_t seed = 3) {
  SyntheticDatasetConfig cfg;
  cfg.width = 10;
  cfg.height = 10;
  cfg.class_count = classes;
  cfg.images_per_class = per_class;
  cfg.seed = seed;
  GameFixture fx;
  fx.dataset = generate_synthetic_dataset(cfg);
  std::uint64_t i = 0;
  for (const auto& item : fx.dataset.items) {
    fx.maps.push_back(oracle_saliency(item.object_mask, 10, 10, item.id));
    fx.maps.push_back(generate_random_saliency(10, 10, 1000 + i++, item.id));
  }
  return fx;
}

inline CampaignConfig small_config(const std::string& id = "camp") {
  CampaignConfig cfg;
  cfg.campaign_id = id;
  cfg.dataset_id = "synthetic";
  cfg.methods = {"oracle", "random"};
  cfg.quota = 3;
  cfg.pairs_per_worker = 5;
  cfg.wrong_choices = 2;
  cfg.seed = 11;
  return cfg;
}

inline std::unique_ptr<Campaign> make_campaign(const GameFixture& fx, const CampaignConfig& cfg,
                                               std::unique_ptr<EventLog> log) {
  return Campaign::create(cfg, make_campaign_assets(fx.dataset, fx.maps, cfg.methods),
                          std::move(log), logical_clock());
}

// Plays a campaign to completion with simulated workers.
inline SimulationReport play_out(Campaign& campaign, std::uint64_t seed = 5) {
  InProcessTransport transport(campaign);
  const auto perception = build_perception(campaign.snapshot(), campaign.assets());
  return run_simulated_campaign(transport, perception, make_population(500, seed), seed);
}

}  // namespace peekaboom::testing
