#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nextpoi/geo.hpp"
#include "nextpoi/types.hpp"

namespace nextpoi::ingest {

/// One line of a Gowalla/Brightkite style check-in dump.
struct RawCheckIn {
  std::string user_id;
  Timestamp time;
  double lat = 0.0;
  double lon = 0.0;
  std::string poi_id;
};

struct RawEdge {
  std::string a;
  std::string b;
  bool operator==(const RawEdge&) const = default;
};

struct SkippedLine {
  std::size_t line_number = 0;  // 1-based
  std::string reason;
};

/// Lines rejected by a parser. Parsing only fails outright when more than
/// half of the non-blank lines are rejected.
struct SkipReport {
  std::string source;
  std::size_t lines_read = 0;
  std::vector<SkippedLine> skipped;

  std::string to_text() const;
};

/// Parses "YYYY-MM-DDTHH:MM:SSZ". Returns nullopt on any deviation.
std::optional<Timestamp> parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

/// Tab-separated: user, ISO-8601 timestamp, lat, lon, location id.
/// Throws DataError if more than 50% of the lines are malformed.
std::vector<RawCheckIn> parse_checkins(std::istream& in, SkipReport& report);

/// Tab-separated "userA\tuserB". Undirected dedup keeps the first-seen
/// orientation; self-loops are dropped silently.
std::vector<RawEdge> parse_edges(std::istream& in, SkipReport& report);

struct CheckIn {
  UserIdx user;
  PoiIdx poi;
  LocIdx location;  // same raw id as poi
  Timestamp time;
  std::uint32_t position = 1;  // 1-based within its trajectory
};

struct Trajectory {
  UserIdx user;
  std::vector<CheckIn> checkins;

  Timestamp start() const { return checkins.front().time; }
  std::size_t size() const { return checkins.size(); }
};

struct Poi {
  std::string id;
  geo::GeoPoint location;
};

struct FilterConfig {
  std::size_t min_user_checkins = 20;
  std::size_t min_poi_visits = 20;
  std::size_t min_trajectories = 5;
  double session_gap_hours = 6.0;

  void validate() const;
};

/// Filtered, indexed and split check-in data.
///
/// Trajectories are grouped by user in index order and chronological within
/// a user. Popularity counts come from `train` only.
struct Dataset {
  std::vector<std::string> user_ids;  // UserIdx -> raw id
  std::vector<Poi> pois;              // PoiIdx -> raw id + coordinates
  std::vector<std::pair<UserIdx, UserIdx>> friend_edges;
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
  std::vector<std::uint64_t> poi_popularity;

  std::size_t user_count() const { return user_ids.size(); }
  std::size_t poi_count() const { return pois.size(); }
  std::size_t checkin_count() const;
  std::vector<geo::GeoPoint> poi_locations() const;

  /// Friends of every user, sorted ascending.
  std::vector<std::vector<UserIdx>> adjacency() const;
};

/// Cuts a user's time-sorted check-ins into sessions wherever the gap is
/// strictly greater than `gap_hours`. Positions restart at 1 in each session.
/// Throws std::invalid_argument on unsorted input.
std::vector<Trajectory> split_trajectories(std::span<const CheckIn> checkins,
                                           double gap_hours = 6.0);

/// Per user: the first ceil(ratio * n) trajectories train, the rest test.
/// Input must be one user's trajectories sorted by start time.
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> chrono_split(
    std::span<const Trajectory> trajectories, double ratio = 0.8);

/// Applies the activity thresholds to a fixed point and indexes survivors.
/// The result holds every trajectory in `train`; `test` is empty until
/// split_dataset runs. Throws DataError when nothing survives.
Dataset filter_dataset(std::span<const RawCheckIn> raw, std::span<const RawEdge> edges,
                       const FilterConfig& config = {});

/// Chronological per-user split of a filtered dataset; recomputes popularity
/// from the train side.
Dataset split_dataset(Dataset filtered, double ratio = 0.8);

std::vector<std::uint64_t> count_popularity(std::span<const Trajectory> train,
                                            std::size_t poi_count);

/// Counts in the layout of the usual LBSN statistics table.
struct Summary {
  std::size_t users = 0;
  std::size_t checkins = 0;
  std::size_t pois = 0;
  std::size_t friendships = 0;
  std::size_t trajectories = 0;
  std::size_t train_trajectories = 0;
  std::size_t test_trajectories = 0;

  std::string to_text(std::string_view dataset_name) const;
};

Summary summarize(const Dataset& dataset);

}  // namespace nextpoi::ingest
