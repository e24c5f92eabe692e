#pragma once

#include <cstddef>
#include <vector>

namespace peekaboom {

// Row-major, channel-interleaved intensities in [0,1].
struct ImageTensor {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  static ImageTensor filled(std::size_t width, std::size_t height,
                            std::size_t channels, double value);

  std::size_t pixel_count() const { return width * height; }
  std::size_t value_count() const { return width * height * channels; }

  double& at(std::size_t pixel, std::size_t channel) {
    return values[pixel * channels + channel];
  }
  double at(std::size_t pixel, std::size_t channel) const {
    return values[pixel * channels + channel];
  }

  // Throws Error on a size mismatch, bad channel count, or a value that is
  // non-finite or outside [0,1].
  void validate() const;

  bool operator==(const ImageTensor&) const = default;
};

}  // namespace peekaboom
