#include "peekaboom/masking.hpp"

#include <cmath>
#include <string>

#include "peekaboom/error.hpp"

namespace peekaboom {
namespace {

std::vector<std::uint8_t> membership(const RevealSet& set, std::size_t n_pixels) {
  std::vector<std::uint8_t> in(n_pixels, 0);
  for (std::uint32_t idx : set.indices) {
    if (idx >= n_pixels) {
      fail(Errc::out_of_range, "reveal index " + std::to_string(idx) + " outside image of " +
                                   std::to_string(n_pixels) + " pixels");
    }
    in[idx] = 1;
  }
  return in;
}

ImageTensor fill_where(const ImageTensor& image, const std::vector<std::uint8_t>& keep,
                       const FillStrategy& fill) {
  fill.validate(image.channels);
  ImageTensor out = image;
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    if (keep[p]) continue;
    for (std::size_t c = 0; c < image.channels; ++c) out.at(p, c) = fill.value_for(c);
  }
  return out;
}

}  // namespace

ExposureSchedule::ExposureSchedule(std::vector<double> rates) : rates_(std::move(rates)) {
  if (rates_.empty()) fail(Errc::invalid_argument, "exposure schedule is empty");
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    const double r = rates_[i];
    if (!(r > 0.0 && r <= 1.0)) {
      fail(Errc::invalid_argument, "exposure rate " + std::to_string(r) + " outside (0,1]");
    }
    if (i > 0 && !(r > rates_[i - 1])) {
      fail(Errc::invalid_argument, "exposure schedule must be strictly ascending");
    }
  }
  if (rates_.back() != 1.0) fail(Errc::invalid_argument, "exposure schedule must end at 1.0");
}

ExposureSchedule ExposureSchedule::game_default() {
  return ExposureSchedule({0.05, 0.10, 0.15, 0.20, 0.30, 0.50, 0.75, 1.0});
}

std::vector<double> ExposureSchedule::with_origin() const {
  std::vector<double> grid;
  grid.reserve(rates_.size() + 1);
  grid.push_back(0.0);
  grid.insert(grid.end(), rates_.begin(), rates_.end());
  return grid;
}

std::size_t exposure_count(double rate, std::size_t n_pixels) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    fail(Errc::out_of_range, "exposure rate " + std::to_string(rate) + " outside [0,1]");
  }
  const double n = static_cast<double>(n_pixels);
  const double product = rate * n;
  // fma recovers the rounding error of the product exactly.
  const double residual = std::fma(rate, n, -product);
  const double up = std::ceil(product);
  if (up == product) {
    return static_cast<std::size_t>(residual > 0.0 ? product + 1.0 : product);
  }
  return static_cast<std::size_t>(up);
}

RevealSet reveal_set(const PixelRanking& ranking, double rate, std::size_t n_pixels) {
  if (ranking.size() != n_pixels) {
    fail(Errc::dimension_mismatch, "ranking covers " + std::to_string(ranking.size()) +
                                       " pixels, expected " + std::to_string(n_pixels));
  }
  const std::size_t k = exposure_count(rate, n_pixels);
  RevealSet set;
  set.rate = rate;
  set.indices.assign(ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(k));
  return set;
}

void FillStrategy::validate(std::size_t channels) const {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  switch (mode) {
    case Mode::constant_black:
      return;
    case Mode::constant_gray:
      if (values.size() != 1 || !in_unit(values[0])) {
        fail(Errc::invalid_argument, "constant-gray fill needs one value in [0,1]");
      }
      return;
    case Mode::dataset_mean:
      if (values.size() != channels) {
        fail(Errc::invalid_argument, "dataset-mean fill needs one value per channel");
      }
      for (double v : values) {
        if (!in_unit(v)) fail(Errc::invalid_argument, "dataset-mean fill value outside [0,1]");
      }
      return;
  }
}

double FillStrategy::value_for(std::size_t channel) const {
  switch (mode) {
    case Mode::constant_black: return 0.0;
    case Mode::constant_gray: return values[0];
    case Mode::dataset_mean: return values[channel];
  }
  return 0.0;
}

ImageTensor apply_mask(const ImageTensor& image, const RevealSet& reveal,
                       const FillStrategy& fill) {
  return fill_where(image, membership(reveal, image.pixel_count()), fill);
}

ImageTensor apply_removal(const ImageTensor& image, const RevealSet& removed,
                          const FillStrategy& fill) {
  auto keep = membership(removed, image.pixel_count());
  for (auto& k : keep) k = k ? 0 : 1;
  return fill_where(image, keep, fill);
}

std::vector<ImageTensor> render_series(const ImageTensor& image, const PixelRanking& ranking,
                                       const ExposureSchedule& schedule,
                                       const FillStrategy& fill) {
  std::vector<ImageTensor> series;
  series.reserve(schedule.size());
  for (double r : schedule.rates()) {
    series.push_back(apply_mask(image, reveal_set(ranking, r, image.pixel_count()), fill));
  }
  return series;
}

std::vector<double> channel_means(std::span<const ImageTensor> images) {
  if (images.empty()) fail(Errc::invalid_argument, "channel_means: no images");
  const std::size_t channels = images.front().channels;
  std::vector<double> sum(channels, 0.0);
  std::size_t count = 0;
  for (const auto& img : images) {
    if (img.channels != channels) fail(Errc::dimension_mismatch, "channel_means: mixed channels");
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      for (std::size_t c = 0; c < channels; ++c) sum[c] += img.at(p, c);
    }
    count += img.pixel_count();
  }
  for (double& s : sum) s /= static_cast<double>(count);
  return sum;
}

}  // namespace peekaboom
