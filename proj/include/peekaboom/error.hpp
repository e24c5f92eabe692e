#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace peekaboom {

enum class Errc {
  invalid_argument,
  non_finite,
  out_of_range,
  magic_mismatch,
  truncated_header,
  malformed_header,
  payload_length_mismatch,
  dimension_mismatch,
  io,
  png,
  transport,
  protocol,
  score_length_mismatch,
  unsupported_method,
  training_diverged,
  missing_saliency,
  not_found,
  conflict,
  campaign_closed,
  unknown_worker,
  sequence,
  schema,
  unauthorized,
  no_data,
};

std::string_view errc_name(Errc code);
// Inverse of errc_name; nullopt for unknown names.
std::optional<Errc> parse_errc(std::string_view name);

// Every failure surfaced by the library carries one of the codes above so
// callers (CLI exit status, HTTP status mapping) can branch without parsing
// messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace peekaboom
