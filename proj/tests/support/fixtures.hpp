#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nextpoi/graphembed.hpp"
#include "nextpoi/ingest.hpp"
#include "nextpoi/model.hpp"
#include "nextpoi/rng.hpp"

namespace fixtures {

using nextpoi::Rng;

/// Fixture directory (tests/fixtures).
std::filesystem::path fixture_dir();

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

/// Model with random frozen tables and perturbed layer-norm parameters.
nextpoi::model::ModelParams random_params(const nextpoi::model::ModelConfig& config, std::size_t users,
                                          std::size_t pois, std::size_t loc_dim, std::uint64_t seed);

/// Instance for `user` with `stc_n` trajectory check-ins and `ltsc_n` history
/// check-ins spread over the user and `friends`, all before the prediction time.
nextpoi::model::TrainingInstance random_instance(Rng& rng, std::size_t pois, nextpoi::UserIdx user,
                                                 const std::vector<nextpoi::UserIdx>& friends, std::size_t stc_n,
                                                 std::size_t ltsc_n);

nextpoi::model::ModelConfig tiny_config(std::size_t layers = 1);

/// Synthetic LBSN where a friend's visit shortly before a user's move
/// reveals the user's next POI.
///
/// Users form groups of four friends; each group owns a pool of event POIs
/// and every user has a home POI. On each day one group member (rotating)
/// goes to a random event POI of the pool as a lone trajectory; the other
/// three each leave home and then visit the same event POI 30, 60 and 90
/// minutes later. The event is unpredictable from a user's own history
/// beyond the pool.
struct PlantedFixture {
  std::vector<nextpoi::ingest::RawCheckIn> checkins;
  std::vector<nextpoi::ingest::RawEdge> edges;
  std::size_t users = 0;
  std::size_t pois = 0;
};
PlantedFixture make_planted(std::uint64_t seed, std::size_t days = 40);

/// Two `clique`-node cliques joined by one bridge edge.
std::vector<std::pair<nextpoi::graphembed::Node, nextpoi::graphembed::Node>> barbell_edges(std::size_t clique);

}  // namespace fixtures
