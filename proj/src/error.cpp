#include "peekaboom/error.hpp"

namespace peekaboom {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::non_finite: return "non_finite";
    case Errc::out_of_range: return "out_of_range";
    case Errc::magic_mismatch: return "magic_mismatch";
    case Errc::truncated_header: return "truncated_header";
    case Errc::malformed_header: return "malformed_header";
    case Errc::payload_length_mismatch: return "payload_length_mismatch";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::io: return "io";
    case Errc::png: return "png";
    case Errc::transport: return "transport";
    case Errc::protocol: return "protocol";
    case Errc::score_length_mismatch: return "score_length_mismatch";
    case Errc::unsupported_method: return "unsupported_method";
    case Errc::training_diverged: return "training_diverged";
    case Errc::missing_saliency: return "missing_saliency";
    case Errc::not_found: return "not_found";
    case Errc::conflict: return "conflict";
    case Errc::campaign_closed: return "campaign_closed";
    case Errc::unknown_worker: return "unknown_worker";
    case Errc::sequence: return "sequence";
    case Errc::schema: return "schema";
    case Errc::unauthorized: return "unauthorized";
    case Errc::no_data: return "no_data";
  }
  return "unknown";
}

std::optional<Errc> parse_errc(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::no_data); ++i) {
    const auto code = static_cast<Errc>(i);
    if (errc_name(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace peekaboom
