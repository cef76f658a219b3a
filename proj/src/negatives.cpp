#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "nextpoi/train.hpp"

namespace nextpoi::train {

NegativeSampler::NegativeSampler(geo::CityIndex cities, std::vector<geo::GeoPoint> locations,
                                 std::vector<std::uint64_t> popularity, double popularity_exponent)
    : cities_(std::move(cities)), locations_(std::move(locations)) {
  if (popularity.size() != locations_.size()) {
    throw std::invalid_argument("NegativeSampler: popularity covers " + std::to_string(popularity.size()) +
                                " POIs but locations cover " + std::to_string(locations_.size()));
  }
  if (!(popularity_exponent >= 0.0)) throw std::invalid_argument("NegativeSampler: exponent must be >= 0");
  for (std::size_t i = 0; i < popularity.size(); ++i) {
    if (popularity[i] == 0) continue;
    observed_.push_back(PoiIdx{i});
    weights_.push_back(std::pow(static_cast<double>(popularity[i]), popularity_exponent));
  }
}

std::vector<PoiIdx> NegativeSampler::sample(PoiIdx positive, std::size_t n, Rng& rng) const {
  if (positive.get() >= locations_.size()) {
    throw std::out_of_range("NegativeSampler: unknown POI " + std::to_string(positive.get()));
  }
  std::vector<PoiIdx> out;
  if (n == 0) return out;

  const auto cell = geo::assign_city(locations_[positive.get()], cities_.cell_size_deg());
  std::vector<PoiIdx> pool;
  for (auto p : cities_.members(cell)) {
    if (p != positive) pool.push_back(p);
  }
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  const std::size_t in_cell = std::min(n, pool.size());
  for (std::size_t i = 0; i < in_cell; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  if (out.size() == n) return out;

  // Weighted sampling without replacement: keep the largest u^(1/w) keys.
  std::unordered_set<PoiIdx> taken(out.begin(), out.end());
  taken.insert(positive);
  std::vector<std::pair<double, PoiIdx>> keyed;
  for (std::size_t i = 0; i < observed_.size(); ++i) {
    const double u = uniform01(rng);
    if (taken.contains(observed_[i]) || weights_[i] <= 0.0) continue;
    keyed.emplace_back(std::log(std::max(u, 1e-300)) / weights_[i], observed_[i]);
  }
  const std::size_t fill = std::min(n - out.size(), keyed.size());
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(fill), keyed.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  for (std::size_t i = 0; i < fill; ++i) out.push_back(keyed[i].second);
  if (out.size() < n && shortfalls_.fetch_add(1) == 0) {
    spdlog::warn("negative sampling: only {} distinct POIs available besides POI {}, wanted {} (further shortfalls not logged)",
                 out.size(), positive.get(), n);
  }
  return out;
}

}  // namespace nextpoi::train
