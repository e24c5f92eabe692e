#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace peekaboom {

// One finite score per spatial location, row-major.
struct SaliencyMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> scores;
  std::string method_id;
  std::string image_id;

  std::size_t pixel_count() const { return width * height; }
  void validate() const;

  bool operator==(const SaliencyMap&) const = default;
};

// Spatial indices, most important first.
struct PixelRanking {
  std::vector<std::uint32_t> order;

  std::size_t size() const { return order.size(); }
  bool operator==(const PixelRanking&) const = default;
};

// Collapses a per-channel grid (row-major, channel-interleaved) to one score
// per location: the mean of absolute channel values.
SaliencyMap reduce_to_spatial(std::span<const double> raw, std::size_t width,
                              std::size_t height, std::size_t channels,
                              std::string method_id = {}, std::string image_id = {});

// Descending score; equal scores keep ascending row-major order.
PixelRanking rank_pixels(const SaliencyMap& map);

// Scores i.i.d. uniform in [0,1) from a seeded mt19937_64 (24-bit floats).
SaliencyMap generate_random_saliency(std::size_t width, std::size_t height,
                                     std::uint64_t seed, std::string image_id = {});

inline constexpr const char* kRandomMethod = "random";

}  // namespace peekaboom
