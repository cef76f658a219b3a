#include <map>
#include <stdexcept>

#include <json.hpp>

#include "nextpoi/model.hpp"

namespace nextpoi::model {

using nlohmann::json;

std::vector<OwnerWeights> group_by_owner(std::span<const TraceCheckIn> checkins,
                                         std::span<const double> weights, UserIdx user) {
  if (checkins.size() != weights.size()) {
    throw std::invalid_argument("group_by_owner: " + std::to_string(checkins.size()) +
                                " check-ins but " + std::to_string(weights.size()) + " weights");
  }
  std::map<UserIdx, OwnerWeights> groups;
  for (std::size_t i = 0; i < checkins.size(); ++i) {
    auto& g = groups[checkins[i].user];
    g.owner = checkins[i].user;
    g.is_friend = checkins[i].user != user;
    g.weights.push_back(weights[i]);
  }
  std::vector<OwnerWeights> out;
  for (auto& [owner, g] : groups) {
    double total = 0.0;
    for (double w : g.weights) total += w;
    g.mean = total / static_cast<double>(g.weights.size());
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

json checkins_json(const std::vector<TraceCheckIn>& cs) {
  json arr = json::array();
  for (const auto& c : cs) {
    arr.push_back({{"user", c.user.value},
                   {"poi", c.poi.value},
                   {"time", c.time.time_since_epoch().count()},
                   {"position", c.position}});
  }
  return arr;
}

std::vector<TraceCheckIn> checkins_from(const json& arr) {
  std::vector<TraceCheckIn> out;
  for (const auto& j : arr) {
    out.push_back({UserIdx{j.at("user").get<std::uint32_t>()}, PoiIdx{j.at("poi").get<std::uint32_t>()},
                   Timestamp{std::chrono::seconds{j.at("time").get<std::int64_t>()}},
                   j.at("position").get<std::uint32_t>()});
  }
  return out;
}

json matrix_json(const num::Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row_span(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

num::Tensor matrix_from(const json& rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.at(0).size();
  num::Tensor t(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    const auto v = rows[r].get<std::vector<double>>();
    if (v.size() != m) throw std::invalid_argument("trace: ragged attention matrix");
    std::copy(v.begin(), v.end(), t.row_span(r).begin());
  }
  return t;
}

}  // namespace

std::string export_trace(const AttentionTrace& trace) {
  json j;
  j["format"] = "nextpoi-trace";
  j["user"] = trace.user.value;
  j["candidate"] = trace.candidate.value;
  j["prediction_time"] = trace.prediction_time.time_since_epoch().count();
  j["score"] = trace.score;
  json layers = json::array();
  for (const auto& heads : trace.stc_self) {
    json hs = json::array();
    for (const auto& m : heads) hs.push_back(matrix_json(m));
    layers.push_back(std::move(hs));
  }
  j["stc"] = {{"checkins", checkins_json(trace.stc)},
              {"self_attention", std::move(layers)},
              {"vanilla", trace.stc_vanilla}};
  json owners = json::array();
  for (const auto& o : trace.owners) {
    owners.push_back({{"user", o.owner.value}, {"friend", o.is_friend}, {"weights", o.weights}, {"mean", o.mean}});
  }
  j["ltsc"] = {{"checkins", checkins_json(trace.ltsc)},
               {"vanilla", trace.ltsc_vanilla},
               {"owners", std::move(owners)}};
  return j.dump(2) + "\n";
}

AttentionTrace parse_trace(std::string_view text) {
  AttentionTrace t;
  try {
    const auto j = json::parse(text);
    if (j.value("format", "") != "nextpoi-trace") throw std::invalid_argument("not an attention trace");
    t.user = UserIdx{j.at("user").get<std::uint32_t>()};
    t.candidate = PoiIdx{j.at("candidate").get<std::uint32_t>()};
    t.prediction_time = Timestamp{std::chrono::seconds{j.at("prediction_time").get<std::int64_t>()}};
    t.score = j.at("score").get<double>();
    const auto& stc = j.at("stc");
    t.stc = checkins_from(stc.at("checkins"));
    for (const auto& heads : stc.at("self_attention")) {
      std::vector<num::Tensor> hs;
      for (const auto& m : heads) hs.push_back(matrix_from(m));
      t.stc_self.push_back(std::move(hs));
    }
    t.stc_vanilla = stc.at("vanilla").get<std::vector<double>>();
    const auto& ltsc = j.at("ltsc");
    t.ltsc = checkins_from(ltsc.at("checkins"));
    t.ltsc_vanilla = ltsc.at("vanilla").get<std::vector<double>>();
    for (const auto& o : ltsc.at("owners")) {
      t.owners.push_back({UserIdx{o.at("user").get<std::uint32_t>()}, o.at("friend").get<bool>(),
                          o.at("weights").get<std::vector<double>>(), o.at("mean").get<double>()});
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed attention trace: ") + e.what());
  }
  return t;
}

}  // namespace nextpoi::model
