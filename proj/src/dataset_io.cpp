#include "nextpoi/dataset_io.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

namespace nextpoi {

namespace {

using nlohmann::json;

json trajectories_to_json(std::span<const ingest::Trajectory> trajectories) {
  json arr = json::array();
  for (const auto& t : trajectories) {
    json checkins = json::array();
    for (const auto& c : t.checkins) {
      checkins.push_back({c.poi.value, c.time.time_since_epoch().count(), c.position});
    }
    arr.push_back({{"user", t.user.value}, {"checkins", std::move(checkins)}});
  }
  return arr;
}

std::vector<ingest::Trajectory> trajectories_from_json(const json& arr, std::size_t users,
                                                       std::size_t pois) {
  std::vector<ingest::Trajectory> out;
  for (const auto& jt : arr) {
    ingest::Trajectory t;
    t.user = UserIdx{jt.at("user").get<std::uint32_t>()};
    if (t.user.get() >= users) throw DataError("archive: trajectory user out of range");
    for (const auto& jc : jt.at("checkins")) {
      ingest::CheckIn c;
      c.user = t.user;
      c.poi = PoiIdx{jc.at(0).get<std::uint32_t>()};
      if (c.poi.get() >= pois) throw DataError("archive: check-in POI out of range");
      c.location = LocIdx{c.poi.value};
      c.time = Timestamp{std::chrono::seconds{jc.at(1).get<std::int64_t>()}};
      c.position = jc.at(2).get<std::uint32_t>();
      t.checkins.push_back(c);
    }
    if (t.checkins.empty()) throw DataError("archive: empty trajectory");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void write_archive(const DatasetArchive& archive, std::ostream& out) {
  const auto& ds = archive.dataset;
  json j;
  j["format"] = "nextpoi-dataset";
  j["version"] = 1;
  j["users"] = ds.user_ids;
  json pois = json::array();
  for (const auto& p : ds.pois) {
    pois.push_back({{"id", p.id}, {"lat", p.location.lat}, {"lon", p.location.lon}});
  }
  j["pois"] = std::move(pois);
  json edges = json::array();
  for (const auto& [a, b] : ds.friend_edges) edges.push_back({a.value, b.value});
  j["friend_edges"] = std::move(edges);
  j["train"] = trajectories_to_json(ds.train);
  j["test"] = trajectories_to_json(ds.test);
  j["poi_popularity"] = ds.poi_popularity;
  json cells = json::array();
  for (const auto& [cell, members] : archive.cities.cells()) {
    std::vector<std::uint32_t> ids;
    for (auto p : members) ids.push_back(p.value);
    cells.push_back({{"lat_cell", cell.lat_cell}, {"lon_cell", cell.lon_cell}, {"pois", ids}});
  }
  j["city_index"] = {{"cell_size_deg", archive.cities.cell_size_deg()}, {"cells", std::move(cells)}};
  out << j.dump(1) << '\n';
}

DatasetArchive read_archive(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset archive is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "nextpoi-dataset") throw DataError("not a dataset archive");
  DatasetArchive archive;
  auto& ds = archive.dataset;
  try {
    ds.user_ids = j.at("users").get<std::vector<std::string>>();
    for (const auto& jp : j.at("pois")) {
      ds.pois.push_back({jp.at("id").get<std::string>(),
                         {jp.at("lat").get<double>(), jp.at("lon").get<double>()}});
    }
    for (const auto& je : j.at("friend_edges")) {
      const UserIdx a{je.at(0).get<std::uint32_t>()}, b{je.at(1).get<std::uint32_t>()};
      if (a.get() >= ds.user_ids.size() || b.get() >= ds.user_ids.size()) {
        throw DataError("archive: friend edge endpoint out of range");
      }
      ds.friend_edges.emplace_back(a, b);
    }
    ds.train = trajectories_from_json(j.at("train"), ds.user_ids.size(), ds.pois.size());
    ds.test = trajectories_from_json(j.at("test"), ds.user_ids.size(), ds.pois.size());
    ds.poi_popularity = j.at("poi_popularity").get<std::vector<std::uint64_t>>();
    if (ds.poi_popularity.size() != ds.pois.size()) throw DataError("archive: popularity length mismatch");
    const auto& jc = j.at("city_index");
    std::map<geo::CellId, std::vector<PoiIdx>> cells;
    for (const auto& cell : jc.at("cells")) {
      std::vector<PoiIdx> members;
      for (auto p : cell.at("pois").get<std::vector<std::uint32_t>>()) members.push_back(PoiIdx{p});
      cells.emplace(geo::CellId{cell.at("lat_cell").get<std::int32_t>(),
                                cell.at("lon_cell").get<std::int32_t>()},
                    std::move(members));
    }
    archive.cities = geo::CityIndex::from_cells(jc.at("cell_size_deg").get<double>(),
                                                std::move(cells), ds.pois.size());
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset archive is malformed: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("dataset archive is inconsistent: ") + e.what());
  }
  return archive;
}

}  // namespace nextpoi
