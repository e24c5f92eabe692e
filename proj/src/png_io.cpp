#include "peekaboom/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "peekaboom/error.hpp"

namespace peekaboom {
namespace {

struct MemoryReader {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

void read_from_memory(png_structp png, png_bytep data, png_size_t length) {
  auto* in = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (in->offset + length > in->data.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(data, in->data.data() + in->offset, length);
  in->offset += length;
}

[[noreturn]] void on_png_error(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what != nullptr) *what = message;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// Writes packed rows with libpng's callback API. bit_depth 8 or 1.
std::vector<std::uint8_t> write_png(const std::vector<std::vector<std::uint8_t>>& rows,
                                    std::size_t width, std::size_t height,
                                    int color_type, int bit_depth) {
  std::string what;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &what,
                                            on_png_error, on_png_warning);
  if (png == nullptr) fail(Errc::png, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> row_ptrs(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::png, "PNG encode failed: " + what);
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (std::size_t y = 0; y < height; ++y) {
    row_ptrs[y] = const_cast<png_bytep>(rows[y].data());
  }
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

struct DecodedPng {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;  // 8-bit, interleaved
};

DecodedPng read_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    fail(Errc::png, "not a PNG stream");
  }
  std::string what;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what,
                                           on_png_error, on_png_warning);
  if (png == nullptr) fail(Errc::png, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  MemoryReader reader{bytes, 0};
  DecodedPng result;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::png, "PNG decode failed: " + what);
  }
  png_set_read_fn(png, &reader, read_from_memory);
  // Normalize everything to 8-bit gray or RGB.
  png_read_png(png, info,
               PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING |
                   PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA,
               nullptr);
  result.width = png_get_image_width(png, info);
  result.height = png_get_image_height(png, info);
  result.channels = png_get_channels(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  png_bytepp rows = png_get_rows(png, info);
  const bool ok = (result.channels == 1 || result.channels == 3) && bit_depth == 8;
  if (ok) {
    const std::size_t stride = result.width * result.channels;
    result.pixels.resize(stride * result.height);
    for (std::size_t y = 0; y < result.height; ++y) {
      std::memcpy(result.pixels.data() + y * stride, rows[y], stride);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) fail(Errc::png, "unsupported PNG layout");
  return result;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageTensor& image) {
  image.validate();
  const std::size_t stride = image.width * image.channels;
  std::vector<std::vector<std::uint8_t>> rows(image.height,
                                              std::vector<std::uint8_t>(stride));
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t i = 0; i < stride; ++i) {
      const double v = image.values[y * stride + i];
      rows[y][i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return write_png(rows, image.width, image.height,
                   image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, 8);
}

ImageTensor decode_png(std::span<const std::uint8_t> bytes) {
  DecodedPng decoded = read_png(bytes);
  ImageTensor image;
  image.width = decoded.width;
  image.height = decoded.height;
  image.channels = decoded.channels;
  image.values.resize(decoded.pixels.size());
  for (std::size_t i = 0; i < decoded.pixels.size(); ++i) {
    image.values[i] = decoded.pixels[i] / 255.0;
  }
  return image;
}

std::vector<std::uint8_t> encode_mask_png(std::span<const std::uint8_t> mask,
                                          std::size_t width, std::size_t height) {
  if (mask.size() != width * height || mask.empty()) {
    fail(Errc::dimension_mismatch, "mask size does not match width*height");
  }
  const std::size_t stride = (width + 7) / 8;
  std::vector<std::vector<std::uint8_t>> rows(height, std::vector<std::uint8_t>(stride, 0));
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (mask[y * width + x] != 0) {
        rows[y][x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
      }
    }
  }
  return write_png(rows, width, height, PNG_COLOR_TYPE_GRAY, 1);
}

std::vector<std::uint8_t> decode_mask_png(std::span<const std::uint8_t> bytes,
                                          std::size_t& width, std::size_t& height) {
  DecodedPng decoded = read_png(bytes);
  if (decoded.channels != 1) fail(Errc::png, "mask PNG must be grayscale");
  width = decoded.width;
  height = decoded.height;
  std::vector<std::uint8_t> mask(decoded.pixels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = decoded.pixels[i] >= 128 ? 1 : 0;
  }
  return mask;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

}  // namespace peekaboom
