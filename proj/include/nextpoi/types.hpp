#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace nextpoi {

/// Dense integer index tagged by what it indexes, so a user index cannot be
/// passed where a POI index is expected.
template <class Tag>
struct Index {
  std::uint32_t value = 0;

  constexpr Index() = default;
  constexpr explicit Index(std::uint32_t v) : value(v) {}
  constexpr explicit Index(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}
  constexpr explicit Index(int v) : value(static_cast<std::uint32_t>(v)) {}

  constexpr std::size_t get() const { return value; }
  constexpr auto operator<=>(const Index&) const = default;
};

using UserIdx = Index<struct UserTag>;
using PoiIdx = Index<struct PoiTag>;
using LocIdx = Index<struct LocTag>;

/// UTC instant at second precision.
using Timestamp = std::chrono::sys_seconds;

inline double hours_between(Timestamp earlier, Timestamp later) {
  return std::chrono::duration<double, std::ratio<3600>>(later - earlier).count();
}

/// Input data is malformed or exhausted (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced NaN/Inf or diverged (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nextpoi

template <class Tag>
struct std::hash<nextpoi::Index<Tag>> {
  std::size_t operator()(const nextpoi::Index<Tag>& i) const noexcept {
    return std::hash<std::uint32_t>{}(i.value);
  }
};
