#include "fixtures.hpp"

#include <algorithm>

namespace fixtures {

using namespace nextpoi;

std::filesystem::path fixture_dir() { return NEXTPOI_FIXTURE_DIR; }

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nextpoi_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

model::ModelConfig tiny_config(std::size_t layers) {
  model::ModelConfig c;
  c.d = 8;
  c.heads = 2;
  c.layers = layers;
  c.stc_len = 4;
  c.ltsc_len = 8;
  c.time_buckets = 6;
  return c;
}

model::ModelParams random_params(const model::ModelConfig& config, std::size_t users, std::size_t pois,
                                 std::size_t loc_dim, std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](num::Tensor& t, double lo, double hi) {
    for (auto& v : t.data()) v = lo + (hi - lo) * uniform01(rng);
  };
  num::Tensor user_table(users, config.d), loc_table(pois, loc_dim);
  fill(user_table, -1.0, 1.0);
  fill(loc_table, -1.0, 1.0);
  auto p = model::init_params(config, std::move(user_table), std::move(loc_table), seed + 1);
  for (auto* layers : {&p.trainable.stc_layers, &p.trainable.ltsc_layers}) {
    for (auto& l : *layers) {
      fill(l.ln1_gain, 0.8, 1.2);
      fill(l.ln2_gain, 0.8, 1.2);
      fill(l.ln1_bias, -0.1, 0.1);
      fill(l.ln2_bias, -0.1, 0.1);
    }
  }
  return p;
}

model::TrainingInstance random_instance(Rng& rng, std::size_t pois, UserIdx user,
                                        const std::vector<UserIdx>& friends, std::size_t stc_n,
                                        std::size_t ltsc_n) {
  using std::chrono::seconds;
  model::TrainingInstance inst;
  inst.user = user;
  inst.prediction_time = Timestamp{seconds{1'600'000'000}};
  auto poi = [&] { return PoiIdx{uniform_index(rng, pois)}; };
  // STC: consecutive check-ins up to a few hours before the target.
  const auto first_position = static_cast<std::uint32_t>(1 + uniform_index(rng, 3));
  auto t = inst.prediction_time;
  std::vector<ingest::CheckIn> stc;
  for (std::size_t i = 0; i < stc_n; ++i) {
    t -= seconds{600 + static_cast<long>(uniform_index(rng, 7200))};
    ingest::CheckIn c;
    c.user = user;
    c.poi = poi();
    c.location = LocIdx{c.poi.value};
    c.time = t;
    stc.push_back(c);
  }
  std::reverse(stc.begin(), stc.end());
  for (std::size_t i = 0; i < stc.size(); ++i) stc[i].position = first_position + static_cast<std::uint32_t>(i);
  inst.stc = stc;
  for (std::size_t i = 0; i < ltsc_n; ++i) {
    ingest::CheckIn c;
    // The first rows cover the user and one friend so every variant has context.
    std::size_t owner = uniform_index(rng, friends.size() + 1);
    if (i == 0) owner = 0;
    if (i == 1 && !friends.empty()) owner = 1;
    c.user = owner == 0 ? user : friends[owner - 1];
    c.poi = poi();
    c.location = LocIdx{c.poi.value};
    c.time = inst.prediction_time - seconds{60 + static_cast<long>(uniform_index(rng, 3'000'000))};
    c.position = static_cast<std::uint32_t>(1 + uniform_index(rng, 5));
    inst.ltsc.push_back(c);
  }
  inst.positive = poi();
  return inst;
}

PlantedFixture make_planted(std::uint64_t seed, std::size_t days) {
  constexpr std::size_t kGroups = 5, kGroupSize = 4, kPool = 6;
  PlantedFixture f;
  f.users = kGroups * kGroupSize;
  f.pois = f.users + kGroups * kPool;  // 20 homes + 30 event POIs
  Rng rng(seed);
  auto user_id = [](std::size_t u) { return "u" + std::to_string(u); };
  auto poi_id = [](std::size_t p) { return "p" + std::to_string(p); };
  // Each group lives in its own city cell; homes and events share it.
  auto location = [&](std::size_t p) {
    const std::size_t group = p < 20 ? p / kGroupSize : (p - 20) / kPool;
    const double lat = 10.0 + 2.0 * static_cast<double>(group) + 0.01 * static_cast<double>(p % 7);
    const double lon = 20.0 + 0.013 * static_cast<double>(p % 11);
    return std::pair{lat, lon};
  };
  auto add = [&](std::size_t u, std::size_t p, std::int64_t t) {
    const auto [lat, lon] = location(p);
    f.checkins.push_back({user_id(u), Timestamp{std::chrono::seconds{t}}, lat, lon, poi_id(p)});
  };
  for (std::size_t g = 0; g < kGroups; ++g) {
    for (std::size_t a = 0; a < kGroupSize; ++a) {
      for (std::size_t b = a + 1; b < kGroupSize; ++b) {
        f.edges.push_back({user_id(g * kGroupSize + a), user_id(g * kGroupSize + b)});
      }
    }
  }
  const std::int64_t t0 = 1'500'000'000;
  for (std::size_t day = 0; day < days; ++day) {
    for (std::size_t g = 0; g < kGroups; ++g) {
      const std::int64_t noon = t0 + static_cast<std::int64_t>(day) * 86400 + 12 * 3600 +
                                static_cast<std::int64_t>(g) * 600;
      const std::size_t event = 20 + g * kPool + uniform_index(rng, kPool);
      const std::size_t leader = (day + g) % kGroupSize;
      add(g * kGroupSize + leader, event, noon);
      std::size_t k = 0;
      for (std::size_t m = 0; m < kGroupSize; ++m) {
        if (m == leader) continue;
        ++k;
        const std::size_t u = g * kGroupSize + m;
        const std::int64_t arrive = noon + static_cast<std::int64_t>(k) * 1800;
        add(u, u, arrive - 3600 - static_cast<std::int64_t>(uniform_index(rng, 1800)));
        add(u, event, arrive);
      }
    }
  }
  return f;
}

std::vector<std::pair<graphembed::Node, graphembed::Node>> barbell_edges(std::size_t clique) {
  std::vector<std::pair<graphembed::Node, graphembed::Node>> edges;
  for (std::size_t side = 0; side < 2; ++side) {
    const auto base = static_cast<graphembed::Node>(side * clique);
    for (graphembed::Node a = 0; a < clique; ++a) {
      for (graphembed::Node b = a + 1; b < clique; ++b) edges.emplace_back(base + a, base + b);
    }
  }
  edges.emplace_back(static_cast<graphembed::Node>(clique - 1), static_cast<graphembed::Node>(clique));
  return edges;
}

}  // namespace fixtures
