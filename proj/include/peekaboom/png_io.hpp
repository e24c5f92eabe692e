#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "peekaboom/image.hpp"

namespace peekaboom {

// 8-bit gray or RGB PNG. Values are quantized as round(v * 255).
std::vector<std::uint8_t> encode_png(const ImageTensor& image);
ImageTensor decode_png(std::span<const std::uint8_t> bytes);

// Binary masks as 1-bit grayscale PNG; one byte (0 or 1) per pixel in memory.
std::vector<std::uint8_t> encode_mask_png(std::span<const std::uint8_t> mask,
                                          std::size_t width, std::size_t height);
std::vector<std::uint8_t> decode_mask_png(std::span<const std::uint8_t> bytes,
                                          std::size_t& width, std::size_t& height);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

}  // namespace peekaboom
