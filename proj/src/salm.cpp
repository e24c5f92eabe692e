#include "peekaboom/salm.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <map>
#include <string>
#include <string_view>

#include "peekaboom/error.hpp"
#include "peekaboom/png_io.hpp"

namespace peekaboom {
namespace {

constexpr std::size_t kMagicSize = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::size_t parse_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) fail(Errc::malformed_header, "SALM header missing '" + key + "'");
  std::size_t value = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value == 0) {
    fail(Errc::malformed_header, "SALM header has invalid " + key + " '" + s + "'");
  }
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_salm(const SaliencyMap& map) {
  map.validate();
  for (const auto* id : {&map.method_id, &map.image_id}) {
    if (id->find('\n') != std::string::npos) {
      fail(Errc::invalid_argument, "SALM identifiers must not contain newlines");
    }
  }
  const std::string header = "width=" + std::to_string(map.width) +
                             "\nheight=" + std::to_string(map.height) +
                             "\nmethod_id=" + map.method_id +
                             "\nimage_id=" + map.image_id + "\n";
  std::vector<std::uint8_t> out(kSalmMagic, kSalmMagic + kMagicSize);
  out.reserve(kMagicSize + 4 + header.size() + 4 * map.scores.size());
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (float s : map.scores) put_u32(out, std::bit_cast<std::uint32_t>(s));
  return out;
}

SaliencyMap decode_salm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicSize || std::memcmp(bytes.data(), kSalmMagic, kMagicSize) != 0) {
    fail(Errc::magic_mismatch, "SALM magic mismatch");
  }
  if (bytes.size() < kMagicSize + 4) fail(Errc::truncated_header, "SALM header length missing");
  const std::uint32_t header_len = get_u32(bytes.data() + kMagicSize);
  const std::size_t payload_offset = kMagicSize + 4 + header_len;
  if (bytes.size() < payload_offset) fail(Errc::truncated_header, "SALM header truncated");

  std::string_view header(reinterpret_cast<const char*>(bytes.data() + kMagicSize + 4),
                          header_len);
  std::map<std::string, std::string> kv;
  while (!header.empty()) {
    const auto nl = header.find('\n');
    std::string_view line = header.substr(0, nl);
    header = nl == std::string_view::npos ? std::string_view{} : header.substr(nl + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(Errc::malformed_header, "SALM header line without '=': " + std::string(line));
    }
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }

  SaliencyMap map;
  map.width = parse_size(kv, "width");
  map.height = parse_size(kv, "height");
  map.method_id = kv["method_id"];
  map.image_id = kv["image_id"];
  const std::size_t payload = bytes.size() - payload_offset;
  if (payload != 4 * map.pixel_count()) {
    fail(Errc::payload_length_mismatch,
         "SALM payload length mismatch: " + std::to_string(payload) + " bytes for " +
             std::to_string(map.width) + "x" + std::to_string(map.height));
  }
  map.scores.resize(map.pixel_count());
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    map.scores[i] = std::bit_cast<float>(get_u32(bytes.data() + payload_offset + 4 * i));
  }
  map.validate();
  return map;
}

void write_salm(const std::filesystem::path& path, const SaliencyMap& map) {
  write_file_bytes(path, encode_salm(map));
}

SaliencyMap read_salm(const std::filesystem::path& path) {
  return decode_salm(read_file_bytes(path));
}

}  // namespace peekaboom
