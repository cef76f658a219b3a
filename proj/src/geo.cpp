#include "nextpoi/geo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace nextpoi::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.km < b.km || (a.km == b.km && a.poi < b.poi);
}

std::vector<Neighbor> brute_force_row(std::span<const GeoPoint> points, std::size_t i,
                                      std::size_t k) {
  std::vector<Neighbor> all;
  all.reserve(points.size() - 1);
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j != i) all.push_back({PoiIdx{j}, haversine_km(points[i], points[j])});
  }
  const auto take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), closer);
  all.resize(take);
  return all;
}

using Vec3 = std::array<double, 3>;

Vec3 to_unit(const GeoPoint& p) {
  const double lat = p.lat * kDegToRad;
  const double lon = p.lon * kDegToRad;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

double chord(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct CellKey {
  int x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& c) const noexcept {
    std::size_t h = static_cast<std::size_t>(c.x) * 73856093u;
    h ^= static_cast<std::size_t>(c.y) * 19349663u;
    h ^= static_cast<std::size_t>(c.z) * 83492791u;
    return h;
  }
};

std::vector<std::vector<Neighbor>> grid_knn(std::span<const GeoPoint> points, std::size_t k) {
  const std::size_t n = points.size();
  std::vector<Vec3> unit(n);
  for (std::size_t i = 0; i < n; ++i) unit[i] = to_unit(points[i]);

  // About k points per cell for a uniform spread over the sphere's surface.
  const double cell = std::clamp(std::sqrt(4.0 * std::numbers::pi * static_cast<double>(k) /
                                           static_cast<double>(n)),
                                 1e-6, 2.0);
  auto key_of = [cell](const Vec3& v) {
    return CellKey{static_cast<int>(std::floor(v[0] / cell)),
                   static_cast<int>(std::floor(v[1] / cell)),
                   static_cast<int>(std::floor(v[2] / cell))};
  };
  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
  for (std::size_t i = 0; i < n; ++i) grid[key_of(unit[i])].push_back(i);
  const int max_ring = static_cast<int>(std::ceil(2.0 / cell)) + 2;

  std::vector<std::vector<Neighbor>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto home = key_of(unit[i]);
    std::vector<std::size_t> seen;
    for (int r = 0; r <= max_ring; ++r) {
      for (int dx = -r; dx <= r; ++dx) {
        for (int dy = -r; dy <= r; ++dy) {
          for (int dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            const auto it = grid.find({home.x + dx, home.y + dy, home.z + dz});
            if (it == grid.end()) continue;
            for (auto j : it->second) {
              if (j != i) seen.push_back(j);
            }
          }
        }
      }
      if (seen.size() < k && r < max_ring) continue;
      std::vector<Neighbor> ranked;
      ranked.reserve(seen.size());
      for (auto j : seen) ranked.push_back({PoiIdx{j}, haversine_km(points[i], points[j])});
      const auto take = std::min(k, ranked.size());
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                        ranked.end(), closer);
      ranked.resize(take);
      // Unvisited points lie at chord distance >= r * cell.
      const bool complete =
          r == max_ring ||
          (take == k && chord(unit[i], unit[ranked.back().poi.get()]) + 1e-9 <
                            static_cast<double>(r) * cell);
      if (complete) {
        out[i] = std::move(ranked);
        break;
      }
    }
  }
  return out;
}

}  // namespace

bool valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double dlat = lat2 - lat1;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

std::size_t L2LGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& adj : adjacency) twice += adj.size();
  return twice / 2;
}

std::vector<std::vector<Neighbor>> knn(std::span<const GeoPoint> points, std::size_t k,
                                       std::size_t brute_force_limit) {
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  if (points.size() <= brute_force_limit) {
    std::vector<std::vector<Neighbor>> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = brute_force_row(points, i, k);
    return out;
  }
  return grid_knn(points, k);
}

L2LGraph build_l2l_graph(std::span<const GeoPoint> points, std::size_t k,
                         std::size_t brute_force_limit) {
  if (points.size() < 2) throw std::invalid_argument("build_l2l_graph: need at least 2 POIs");
  const auto directed = knn(points, k, brute_force_limit);
  L2LGraph g;
  g.adjacency.resize(points.size());
  for (std::size_t i = 0; i < directed.size(); ++i) {
    for (const auto& nb : directed[i]) {
      g.adjacency[i].push_back(nb);
      g.adjacency[nb.poi.get()].push_back({PoiIdx{i}, nb.km});
    }
  }
  for (auto& adj : g.adjacency) {
    std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) { return a.poi < b.poi; });
    adj.erase(std::unique(adj.begin(), adj.end(),
                          [](const Neighbor& a, const Neighbor& b) { return a.poi == b.poi; }),
              adj.end());
  }
  return g;
}

void write_edge_list(const L2LGraph& graph, std::ostream& out) {
  out.precision(17);
  for (std::size_t i = 0; i < graph.adjacency.size(); ++i) {
    for (const auto& nb : graph.adjacency[i]) {
      if (nb.poi.get() > i) out << i << '\t' << nb.poi.get() << '\t' << nb.km << '\n';
    }
  }
}

CellId assign_city(const GeoPoint& p, double cell_size_deg) {
  if (!(cell_size_deg > 0.0)) throw std::invalid_argument("cell size must be positive");
  return {static_cast<std::int32_t>(std::floor(p.lat / cell_size_deg)),
          static_cast<std::int32_t>(std::floor(p.lon / cell_size_deg))};
}

CityIndex CityIndex::build(std::span<const GeoPoint> pois, double cell_size_deg,
                           std::span<const std::uint8_t> include) {
  if (!include.empty() && include.size() != pois.size()) {
    throw std::invalid_argument("CityIndex::build: include mask size mismatch");
  }
  CityIndex idx;
  idx.cell_size_deg_ = cell_size_deg;
  idx.cell_of_.assign(pois.size(), std::nullopt);
  for (std::size_t i = 0; i < pois.size(); ++i) {
    if (!include.empty() && !include[i]) continue;
    const auto cell = assign_city(pois[i], cell_size_deg);
    idx.cells_[cell].push_back(PoiIdx{i});
    idx.cell_of_[i] = cell;
  }
  return idx;
}

CityIndex CityIndex::from_cells(double cell_size_deg, std::map<CellId, std::vector<PoiIdx>> cells,
                                std::size_t poi_universe) {
  CityIndex idx;
  idx.cell_size_deg_ = cell_size_deg;
  idx.cell_of_.assign(poi_universe, std::nullopt);
  for (auto& [cell, members] : cells) {
    std::sort(members.begin(), members.end());
    for (auto p : members) {
      if (p.get() >= poi_universe || idx.cell_of_[p.get()]) {
        throw std::invalid_argument("CityIndex: POI out of range or in two cells");
      }
      idx.cell_of_[p.get()] = cell;
    }
  }
  idx.cells_ = std::move(cells);
  return idx;
}

CellId CityIndex::cell_of(PoiIdx poi) const {
  if (poi.get() >= cell_of_.size() || !cell_of_[poi.get()]) {
    throw std::out_of_range("CityIndex: POI " + std::to_string(poi.value) + " not indexed");
  }
  return *cell_of_[poi.get()];
}

bool CityIndex::contains(PoiIdx poi) const {
  return poi.get() < cell_of_.size() && cell_of_[poi.get()].has_value();
}

std::span<const PoiIdx> CityIndex::members(CellId cell) const {
  const auto it = cells_.find(cell);
  if (it == cells_.end()) return {};
  return it->second;
}

std::size_t CityIndex::poi_count() const {
  std::size_t n = 0;
  for (const auto& [cell, members] : cells_) n += members.size();
  return n;
}

}  // namespace nextpoi::geo
