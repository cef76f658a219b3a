#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nextpoi/types.hpp"

namespace nextpoi::geo {

inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]
};

bool valid(const GeoPoint& p);

/// Great-circle distance in km on a sphere of radius kEarthRadiusKm.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

struct Neighbor {
  PoiIdx poi;
  double km = 0.0;
};

/// Weighted undirected proximity graph over POIs. Node i is PoiIdx{i}.
struct L2LGraph {
  std::vector<std::vector<Neighbor>> adjacency;  // sorted by neighbor index

  std::size_t node_count() const { return adjacency.size(); }
  std::size_t edge_count() const;  // undirected edges
};

/// Directed k-nearest neighbours of every point (ties by lower index), before
/// symmetrization. Exact for every input size; above `brute_force_limit`
/// points a 3-D grid over unit vectors prunes the candidate set.
std::vector<std::vector<Neighbor>> knn(std::span<const GeoPoint> points, std::size_t k,
                                       std::size_t brute_force_limit = 50000);

/// k-NN graph symmetrized by union, weights in km.
L2LGraph build_l2l_graph(std::span<const GeoPoint> points, std::size_t k = 20,
                         std::size_t brute_force_limit = 50000);

/// "src\tdst\tweight_km", one line per undirected edge with src < dst.
void write_edge_list(const L2LGraph& graph, std::ostream& out);

struct CellId {
  std::int32_t lat_cell = 0;
  std::int32_t lon_cell = 0;
  auto operator<=>(const CellId&) const = default;
};

CellId assign_city(const GeoPoint& p, double cell_size_deg = 0.5);

/// Grid partition approximating "same city" for the negative sampler.
class CityIndex {
 public:
  CityIndex() = default;

  /// Every POI goes into exactly one cell. If `include` is non-empty, only
  /// POIs with include[i] != 0 are indexed.
  static CityIndex build(std::span<const GeoPoint> pois, double cell_size_deg = 0.5,
                         std::span<const std::uint8_t> include = {});

  double cell_size_deg() const { return cell_size_deg_; }
  const std::map<CellId, std::vector<PoiIdx>>& cells() const { return cells_; }

  /// Cell of an indexed POI; throws std::out_of_range if not indexed.
  CellId cell_of(PoiIdx poi) const;
  bool contains(PoiIdx poi) const;
  std::span<const PoiIdx> members(CellId cell) const;
  std::size_t poi_count() const;

  /// Rebuild from an explicit cell map (archive loading).
  static CityIndex from_cells(double cell_size_deg, std::map<CellId, std::vector<PoiIdx>> cells,
                              std::size_t poi_universe);

 private:
  double cell_size_deg_ = 0.5;
  std::map<CellId, std::vector<PoiIdx>> cells_;
  std::vector<std::optional<CellId>> cell_of_;  // per POI
};

}  // namespace nextpoi::geo
