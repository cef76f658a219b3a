#pragma once

#include <iosfwd>

#include "nextpoi/geo.hpp"
#include "nextpoi/ingest.hpp"

namespace nextpoi {

/// Everything downstream stages need from preprocessing.
///
/// JSON layout:
///   format: "nextpoi-dataset", version: 1
///   users: [raw user id, ...]                      (UserIdx order)
///   pois: [{id, lat, lon}, ...]                    (PoiIdx order; LocIdx == PoiIdx)
///   friend_edges: [[user, user], ...]
///   train, test: [{user, checkins: [[poi, unix_seconds, position], ...]}, ...]
///   poi_popularity: [count, ...]                   (train only)
///   city_index: {cell_size_deg, cells: [{lat_cell, lon_cell, pois: [...]}, ...]}
struct DatasetArchive {
  ingest::Dataset dataset;
  geo::CityIndex cities;
};

void write_archive(const DatasetArchive& archive, std::ostream& out);
DatasetArchive read_archive(std::istream& in);

}  // namespace nextpoi
