#include "nextpoi/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace nextpoi::ingest {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::optional<double> parse_double(std::string_view s) {
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

template <class T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

void check_malformed_ratio(const SkipReport& report, std::size_t considered) {
  if (considered > 0 && report.skipped.size() * 2 > considered) {
    std::ostringstream msg;
    msg << report.source << ": " << report.skipped.size() << " of " << considered
        << " lines are malformed; wrong file format?";
    throw DataError(msg.str());
  }
}

}  // namespace

std::string SkipReport::to_text() const {
  std::ostringstream out;
  out << "# " << (source.empty() ? "input" : source) << ": " << skipped.size()
      << " skipped of " << lines_read << " lines\n";
  for (const auto& s : skipped) out << s.line_number << '\t' << s.reason << '\n';
  return out.str();
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SSZ
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
    return std::nullopt;
  }
  int year = 0;
  unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
      !parse_int(text.substr(8, 2), day) || !parse_int(text.substr(11, 2), hour) ||
      !parse_int(text.substr(14, 2), minute) || !parse_int(text.substr(17, 2), second)) {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  return sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::vector<RawCheckIn> parse_checkins(std::istream& in, SkipReport& report) {
  std::vector<RawCheckIn> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t considered = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = strip_cr(line);
    if (is_blank(view)) continue;
    ++considered;
    const auto fields = split_tabs(view);
    auto skip = [&](std::string reason) { report.skipped.push_back({line_no, std::move(reason)}); };
    if (fields.size() != 5) {
      skip("expected 5 tab-separated fields, got " + std::to_string(fields.size()));
      continue;
    }
    if (std::any_of(fields.begin(), fields.end(), [](auto f) { return f.empty(); })) {
      skip("empty field");
      continue;
    }
    const auto time = parse_iso8601(fields[1]);
    if (!time) {
      skip("bad timestamp '" + std::string(fields[1]) + "'");
      continue;
    }
    const auto lat = parse_double(fields[2]);
    const auto lon = parse_double(fields[3]);
    if (!lat || !lon) {
      skip("non-numeric coordinate");
      continue;
    }
    if (!geo::valid({*lat, *lon})) {
      skip("coordinate out of range");
      continue;
    }
    out.push_back({std::string(fields[0]), *time, *lat, *lon, std::string(fields[4])});
  }
  report.lines_read += line_no;
  check_malformed_ratio(report, considered);
  return out;
}

std::vector<RawEdge> parse_edges(std::istream& in, SkipReport& report) {
  std::vector<RawEdge> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t considered = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = strip_cr(line);
    if (is_blank(view)) continue;
    ++considered;
    const auto fields = split_tabs(view);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      report.skipped.push_back({line_no, "expected 'userA<TAB>userB'"});
      continue;
    }
    if (fields[0] == fields[1]) continue;
    std::string a(fields[0]), b(fields[1]);
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (!seen.insert(std::move(key)).second) continue;
    out.push_back({std::move(a), std::move(b)});
  }
  report.lines_read += line_no;
  check_malformed_ratio(report, considered);
  return out;
}

void FilterConfig::validate() const {
  if (min_user_checkins < 1 || min_poi_visits < 1 || min_trajectories < 1) {
    throw std::invalid_argument("filter thresholds must be >= 1");
  }
  if (!(session_gap_hours > 0.0)) throw std::invalid_argument("session gap must be positive");
}

std::size_t Dataset::checkin_count() const {
  std::size_t n = 0;
  for (const auto& t : train) n += t.size();
  for (const auto& t : test) n += t.size();
  return n;
}

std::vector<geo::GeoPoint> Dataset::poi_locations() const {
  std::vector<geo::GeoPoint> out;
  out.reserve(pois.size());
  for (const auto& p : pois) out.push_back(p.location);
  return out;
}

std::vector<std::vector<UserIdx>> Dataset::adjacency() const {
  std::vector<std::vector<UserIdx>> adj(user_ids.size());
  for (const auto& [a, b] : friend_edges) {
    adj[a.get()].push_back(b);
    adj[b.get()].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<Trajectory> split_trajectories(std::span<const CheckIn> checkins, double gap_hours) {
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < checkins.size(); ++i) {
    const auto& c = checkins[i];
    if (i > 0) {
      if (c.time < checkins[i - 1].time) {
        throw std::invalid_argument("split_trajectories: check-ins not sorted by time");
      }
      if (c.user != checkins[i - 1].user) {
        throw std::invalid_argument("split_trajectories: check-ins from more than one user");
      }
    }
    if (i == 0 || hours_between(checkins[i - 1].time, c.time) > gap_hours) {
      out.push_back({c.user, {}});
    }
    auto& traj = out.back();
    CheckIn copy = c;
    copy.position = static_cast<std::uint32_t>(traj.checkins.size() + 1);
    traj.checkins.push_back(copy);
  }
  return out;
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> chrono_split(
    std::span<const Trajectory> trajectories, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must be in (0,1)");
  for (std::size_t i = 1; i < trajectories.size(); ++i) {
    if (trajectories[i].start() < trajectories[i - 1].start()) {
      throw std::invalid_argument("chrono_split: trajectories not sorted by start time");
    }
  }
  const auto n = trajectories.size();
  // The epsilon keeps products like 0.7 * 10 = 7.000000000000001 from rounding up.
  auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  n_train = std::min(n_train, n);
  std::pair<std::vector<Trajectory>, std::vector<Trajectory>> out;
  out.first.assign(trajectories.begin(), trajectories.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.second.assign(trajectories.begin() + static_cast<std::ptrdiff_t>(n_train), trajectories.end());
  return out;
}

namespace {

std::size_t count_sessions(std::span<const std::size_t> sorted_records,
                           std::span<const RawCheckIn> raw, double gap_hours) {
  std::size_t sessions = 0;
  for (std::size_t i = 0; i < sorted_records.size(); ++i) {
    if (i == 0 || hours_between(raw[sorted_records[i - 1]].time, raw[sorted_records[i]].time) >
                      gap_hours) {
      ++sessions;
    }
  }
  return sessions;
}

}  // namespace

Dataset filter_dataset(std::span<const RawCheckIn> raw, std::span<const RawEdge> edges,
                       const FilterConfig& config) {
  config.validate();

  // Provisional dense ids in first-appearance order.
  std::unordered_map<std::string, std::size_t> user_key, poi_key;
  std::vector<std::size_t> rec_user(raw.size()), rec_poi(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    rec_user[i] = user_key.try_emplace(raw[i].user_id, user_key.size()).first->second;
    rec_poi[i] = poi_key.try_emplace(raw[i].poi_id, poi_key.size()).first->second;
  }
  const std::size_t n_users = user_key.size();
  const std::size_t n_pois = poi_key.size();

  // Records of each user in (time, input order).
  std::vector<std::vector<std::size_t>> by_user(n_users);
  for (std::size_t i = 0; i < raw.size(); ++i) by_user[rec_user[i]].push_back(i);
  for (auto& recs : by_user) {
    std::stable_sort(recs.begin(), recs.end(),
                     [&](std::size_t a, std::size_t b) { return raw[a].time < raw[b].time; });
  }

  std::vector<bool> alive(raw.size(), true);
  std::vector<bool> user_alive(n_users, true), poi_alive(n_pois, true);

  auto kill_records = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (alive[i] && (!user_alive[rec_user[i]] || !poi_alive[rec_poi[i]])) {
        alive[i] = false;
        changed = true;
      }
    }
    return changed;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    // Users, then POIs, repeated until neither count rule removes anything.
    bool count_changed = true;
    while (count_changed) {
      count_changed = false;
      std::vector<std::size_t> user_count(n_users, 0), poi_count(n_pois, 0);
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (alive[i]) ++user_count[rec_user[i]];
      }
      for (std::size_t u = 0; u < n_users; ++u) {
        if (user_alive[u] && user_count[u] < config.min_user_checkins) user_alive[u] = false;
      }
      count_changed |= kill_records();
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (alive[i]) ++poi_count[rec_poi[i]];
      }
      for (std::size_t p = 0; p < n_pois; ++p) {
        if (poi_alive[p] && poi_count[p] < config.min_poi_visits) poi_alive[p] = false;
      }
      count_changed |= kill_records();
      changed |= count_changed;
    }
    // Trajectory-count rule on the surviving check-ins.
    for (std::size_t u = 0; u < n_users; ++u) {
      if (!user_alive[u]) continue;
      std::vector<std::size_t> live;
      for (auto r : by_user[u]) {
        if (alive[r]) live.push_back(r);
      }
      if (count_sessions(live, raw, config.session_gap_hours) < config.min_trajectories) {
        user_alive[u] = false;
      }
    }
    if (kill_records()) changed = true;
  }

  Dataset ds;
  std::vector<std::optional<UserIdx>> user_map(n_users);
  std::vector<std::optional<PoiIdx>> poi_map(n_pois);
  std::unordered_map<std::string, UserIdx> user_by_name;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!alive[i]) continue;
    auto& um = user_map[rec_user[i]];
    if (!um) {
      um = UserIdx{ds.user_ids.size()};
      ds.user_ids.push_back(raw[i].user_id);
      user_by_name.emplace(raw[i].user_id, *um);
    }
    auto& pm = poi_map[rec_poi[i]];
    if (!pm) {
      pm = PoiIdx{ds.pois.size()};
      ds.pois.push_back({raw[i].poi_id, {raw[i].lat, raw[i].lon}});
    }
  }
  if (ds.user_ids.empty()) throw DataError("dataset exhausted by filters");

  // Users in index order; each user's records are already (time, input order).
  std::vector<std::size_t> dense_to_key(ds.user_ids.size());
  for (std::size_t u = 0; u < n_users; ++u) {
    if (user_map[u]) dense_to_key[user_map[u]->get()] = u;
  }
  for (std::size_t dense = 0; dense < dense_to_key.size(); ++dense) {
    const auto key = dense_to_key[dense];
    std::vector<CheckIn> checkins;
    for (auto r : by_user[key]) {
      if (!alive[r]) continue;
      const auto poi = *poi_map[rec_poi[r]];
      checkins.push_back({UserIdx{dense}, poi, LocIdx{poi.value}, raw[r].time, 0});
    }
    for (auto& t : split_trajectories(checkins, config.session_gap_hours)) {
      ds.train.push_back(std::move(t));
    }
  }

  for (const auto& e : edges) {
    const auto a = user_by_name.find(e.a);
    const auto b = user_by_name.find(e.b);
    if (a == user_by_name.end() || b == user_by_name.end()) continue;
    ds.friend_edges.emplace_back(a->second, b->second);
  }
  ds.poi_popularity = count_popularity(ds.train, ds.pois.size());
  return ds;
}

std::vector<std::uint64_t> count_popularity(std::span<const Trajectory> train,
                                            std::size_t poi_count) {
  std::vector<std::uint64_t> pop(poi_count, 0);
  for (const auto& t : train) {
    for (const auto& c : t.checkins) ++pop.at(c.poi.get());
  }
  return pop;
}

Dataset split_dataset(Dataset filtered, double ratio) {
  std::vector<Trajectory> all = std::move(filtered.train);
  all.insert(all.end(), std::make_move_iterator(filtered.test.begin()),
             std::make_move_iterator(filtered.test.end()));
  std::stable_sort(all.begin(), all.end(), [](const Trajectory& a, const Trajectory& b) {
    return a.user < b.user;
  });
  filtered.train.clear();
  filtered.test.clear();
  std::size_t begin = 0;
  while (begin < all.size()) {
    std::size_t end = begin;
    while (end < all.size() && all[end].user == all[begin].user) ++end;
    auto [tr, te] = chrono_split(std::span(all).subspan(begin, end - begin), ratio);
    for (auto& t : tr) filtered.train.push_back(std::move(t));
    for (auto& t : te) filtered.test.push_back(std::move(t));
    begin = end;
  }
  filtered.poi_popularity = count_popularity(filtered.train, filtered.pois.size());
  return filtered;
}

Summary summarize(const Dataset& dataset) {
  Summary s;
  s.users = dataset.user_count();
  s.checkins = dataset.checkin_count();
  s.pois = dataset.poi_count();
  s.friendships = dataset.friend_edges.size();
  s.train_trajectories = dataset.train.size();
  s.test_trajectories = dataset.test.size();
  s.trajectories = s.train_trajectories + s.test_trajectories;
  return s;
}

std::string Summary::to_text(std::string_view dataset_name) const {
  std::ostringstream out;
  out << "Dataset\t#Users\t#Check-ins\t#POIs\t#Friendships\t#Trajectories\n"
      << dataset_name << '\t' << users << '\t' << checkins << '\t' << pois << '\t'
      << friendships << '\t' << trajectories << '\n'
      << "# train trajectories: " << train_trajectories
      << ", test trajectories: " << test_trajectories << '\n';
  return out.str();
}

}  // namespace nextpoi::ingest
