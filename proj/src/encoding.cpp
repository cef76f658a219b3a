#include <cmath>
#include <stdexcept>
#include <string>

#include "nextpoi/model.hpp"

namespace nextpoi::model {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::self_only: return "self-only";
    case Variant::social_only: return "social-only";
    case Variant::long_only: return "long-only";
    case Variant::short_only: return "short-only";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) {
    if (ch == '_') ch = '-';
  }
  if (s == "full") return Variant::full;
  if (s == "self-only" || s == "self") return Variant::self_only;
  if (s == "social-only" || s == "social") return Variant::social_only;
  if (s == "long-only") return Variant::long_only;
  if (s == "short-only") return Variant::short_only;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

std::string_view to_string(ScaleMode m) {
  return m == ScaleMode::full_dim ? "full-dim" : "per-head";
}

ScaleMode parse_scale_mode(std::string_view name) {
  if (name == "full-dim" || name == "full_dim") return ScaleMode::full_dim;
  if (name == "per-head" || name == "per_head") return ScaleMode::per_head;
  throw std::invalid_argument("unknown scale mode '" + std::string(name) + "'");
}

bool uses_stc(Variant v) { return v != Variant::social_only && v != Variant::long_only; }
bool uses_ltsc(Variant v) { return v != Variant::short_only; }

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (d < 2) fail("d must be >= 2");
  if (heads == 0 || d % heads != 0) fail("d (" + std::to_string(d) + ") must be divisible by heads (" +
                                         std::to_string(heads) + ")");
  if (layers == 0) fail("layers must be >= 1");
  if (stc_len == 0) fail("stc_len must be >= 1");
  if (stc_len > ltsc_len) fail("stc_len must not exceed ltsc_len");
  if (time_buckets == 0) fail("time_buckets must be >= 1");
}

std::size_t time_bucket(double elapsed_hours, std::size_t buckets) {
  if (!std::isfinite(elapsed_hours) || elapsed_hours < 0.0) {
    throw std::invalid_argument("time_bucket: elapsed time must be finite and >= 0, got " +
                                std::to_string(elapsed_hours));
  }
  if (buckets == 0) throw std::invalid_argument("time_bucket: buckets must be >= 1");
  if (elapsed_hours < 1.0) return 0;
  // elapsed in [2^k, 2^(k+1)) -> k + 1
  std::size_t k = 0;
  while (k + 2 < buckets && std::ldexp(1.0, static_cast<int>(k + 1)) <= elapsed_hours) ++k;
  return std::min(k + 1, buckets - 1);
}

std::vector<double> position_encoding(double position, std::size_t d) {
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto two_i = static_cast<double>(j - j % 2);
    const double angle = position / std::pow(10000.0, two_i / static_cast<double>(d));
    out[j] = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
  }
  return out;
}

}  // namespace nextpoi::model
