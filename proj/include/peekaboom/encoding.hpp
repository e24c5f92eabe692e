#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace peekaboom {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws Error(protocol) on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Hex string of `bytes` bytes from the OpenSSL CSPRNG.
std::string random_token(std::size_t bytes = 16);

// Shortest representation that round-trips; stable across runs.
std::string format_double(double value);

}  // namespace peekaboom
