#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "peekaboom/image.hpp"
#include "peekaboom/saliency.hpp"

namespace peekaboom {

// Strictly ascending rates in (0,1] ending at 1.0.
class ExposureSchedule {
 public:
  explicit ExposureSchedule(std::vector<double> rates);

  // 5%, 10%, 15%, 20%, 30%, 50%, 75%, 100%.
  static ExposureSchedule game_default();

  const std::vector<double>& rates() const { return rates_; }
  std::size_t size() const { return rates_.size(); }
  double operator[](std::size_t i) const { return rates_[i]; }

  // The metric grid: a leading 0.0 followed by the schedule.
  std::vector<double> with_origin() const;

  bool operator==(const ExposureSchedule&) const = default;

 private:
  std::vector<double> rates_;
};

// ceil(rate * n_pixels) evaluated on the exact value of the double `rate`,
// so 0.15 * 100 yields 15 rather than the 16 a rounded product would give.
std::size_t exposure_count(double rate, std::size_t n_pixels);

struct RevealSet {
  double rate = 0.0;
  std::vector<std::uint32_t> indices;  // ranking prefix, importance order
};

RevealSet reveal_set(const PixelRanking& ranking, double rate, std::size_t n_pixels);

struct FillStrategy {
  enum class Mode { constant_black, constant_gray, dataset_mean };

  Mode mode = Mode::constant_black;
  // constant_gray: one value; dataset_mean: one value per channel.
  std::vector<double> values;

  static FillStrategy black() { return {Mode::constant_black, {}}; }
  static FillStrategy gray(double level) { return {Mode::constant_gray, {level}}; }
  static FillStrategy dataset_mean(std::vector<double> per_channel) {
    return {Mode::dataset_mean, std::move(per_channel)};
  }

  void validate(std::size_t channels) const;
  double value_for(std::size_t channel) const;
};

// Keeps revealed locations, fills the rest.
ImageTensor apply_mask(const ImageTensor& image, const RevealSet& reveal,
                       const FillStrategy& fill);

// Fills the listed locations, keeps the rest. apply_removal(x, s, f) and
// apply_mask(x, s, f) partition the pixel set between them.
ImageTensor apply_removal(const ImageTensor& image, const RevealSet& removed,
                          const FillStrategy& fill);

std::vector<ImageTensor> render_series(const ImageTensor& image, const PixelRanking& ranking,
                                       const ExposureSchedule& schedule,
                                       const FillStrategy& fill);

// Per-channel mean over a set of same-shaped images.
std::vector<double> channel_means(std::span<const ImageTensor> images);

}  // namespace peekaboom
