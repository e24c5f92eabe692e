#include "peekaboom/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "peekaboom/error.hpp"
#include "peekaboom/random.hpp"

namespace peekaboom {

void SaliencyMap::validate() const {
  if (width == 0 || height == 0) fail(Errc::invalid_argument, "saliency map has zero size");
  if (scores.size() != pixel_count()) {
    fail(Errc::dimension_mismatch, "saliency score count " + std::to_string(scores.size()) +
                                       " != width*height " + std::to_string(pixel_count()));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      fail(Errc::non_finite, "non-finite saliency score at location " + std::to_string(i));
    }
  }
}

SaliencyMap reduce_to_spatial(std::span<const double> raw, std::size_t width,
                              std::size_t height, std::size_t channels,
                              std::string method_id, std::string image_id) {
  if (width == 0 || height == 0 || channels == 0) {
    fail(Errc::invalid_argument, "reduce_to_spatial: zero-size grid");
  }
  if (raw.size() != width * height * channels) {
    fail(Errc::dimension_mismatch, "reduce_to_spatial: expected " +
                                       std::to_string(width * height * channels) +
                                       " values, got " + std::to_string(raw.size()));
  }
  SaliencyMap map;
  map.width = width;
  map.height = height;
  map.method_id = std::move(method_id);
  map.image_id = std::move(image_id);
  map.scores.resize(width * height);
  for (std::size_t p = 0; p < width * height; ++p) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = raw[p * channels + c];
      if (!std::isfinite(v)) {
        fail(Errc::non_finite, "non-finite saliency value at location " + std::to_string(p) +
                                   " channel " + std::to_string(c));
      }
      sum += std::fabs(v);
    }
    map.scores[p] = static_cast<float>(sum / static_cast<double>(channels));
  }
  return map;
}

PixelRanking rank_pixels(const SaliencyMap& map) {
  map.validate();
  PixelRanking ranking;
  ranking.order.resize(map.scores.size());
  std::iota(ranking.order.begin(), ranking.order.end(), 0u);
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return map.scores[a] > map.scores[b]; });
  return ranking;
}

SaliencyMap generate_random_saliency(std::size_t width, std::size_t height,
                                     std::uint64_t seed, std::string image_id) {
  if (width == 0 || height == 0) fail(Errc::invalid_argument, "random saliency: zero-size grid");
  Rng rng(seed);
  SaliencyMap map;
  map.width = width;
  map.height = height;
  map.method_id = kRandomMethod;
  map.image_id = std::move(image_id);
  map.scores.resize(width * height);
  for (float& s : map.scores) {
    s = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
  }
  return map;
}

}  // namespace peekaboom
