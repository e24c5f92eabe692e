#include "peekaboom/image.hpp"

#include <cmath>
#include <string>

#include "peekaboom/error.hpp"

namespace peekaboom {

ImageTensor ImageTensor::filled(std::size_t width, std::size_t height,
                                std::size_t channels, double value) {
  ImageTensor img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.values.assign(width * height * channels, value);
  return img;
}

void ImageTensor::validate() const {
  if (channels != 1 && channels != 3) {
    fail(Errc::invalid_argument,
         "image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  if (width == 0 || height == 0) {
    fail(Errc::invalid_argument, "image has zero size");
  }
  if (values.size() != value_count()) {
    fail(Errc::dimension_mismatch,
         "image value count " + std::to_string(values.size()) +
             " != width*height*channels " + std::to_string(value_count()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) {
      fail(Errc::non_finite, "image value at index " + std::to_string(i) + " is not finite");
    }
    if (v < 0.0 || v > 1.0) {
      fail(Errc::out_of_range,
           "image value at index " + std::to_string(i) + " outside [0,1]");
    }
  }
}

}  // namespace peekaboom
