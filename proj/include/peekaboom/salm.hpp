#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "peekaboom/saliency.hpp"

namespace peekaboom {

// SALM container:
//   "SALM0001"                         8-byte magic
//   u32 little-endian header length N
//   N bytes UTF-8: "width=..\nheight=..\nmethod_id=..\nimage_id=..\n"
//   width*height little-endian IEEE-754 binary32 scores, row-major
inline constexpr char kSalmMagic[] = "SALM0001";

std::vector<std::uint8_t> encode_salm(const SaliencyMap& map);

// Errors: magic_mismatch, truncated_header, malformed_header,
// payload_length_mismatch.
SaliencyMap decode_salm(std::span<const std::uint8_t> bytes);

void write_salm(const std::filesystem::path& path, const SaliencyMap& map);
SaliencyMap read_salm(const std::filesystem::path& path);

}  // namespace peekaboom
