#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "nextpoi/eval.hpp"
#include "nextpoi/graphembed.hpp"
#include "nextpoi/ingest.hpp"
#include "nextpoi/model.hpp"
#include "nextpoi/train.hpp"

namespace nextpoi {

enum class LocationWeights { distance, proximity };

struct EmbedConfig {
  graphembed::WalkConfig walk;
  graphembed::SkipGramConfig skipgram;
};

/// Everything a pipeline run needs. Module seeds are derived from `seed`.
struct RunConfig {
  std::filesystem::path checkins;
  std::filesystem::path edges;
  std::filesystem::path workspace = "workspace";
  std::string dataset_name = "dataset";
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  ingest::FilterConfig filter;
  double train_ratio = 0.8;
  double city_cell_deg = 0.5;

  std::size_t l2l_k = 20;
  LocationWeights location_weights = LocationWeights::distance;
  EmbedConfig user_embedding;
  EmbedConfig location_embedding;

  model::ModelConfig model;
  train::TrainConfig train;
  eval::EvalConfig eval;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
  /// Copies the global seed and thread count into the module configs.
  void propagate();
};

/// Parses the documented JSON layout. Missing keys keep their defaults,
/// unknown keys are rejected, and embedding dims default to model.d.
/// Relative paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json run_config_to_json(const RunConfig& config);
/// Reads and parses a config file; throws std::invalid_argument on errors.
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const model::ModelConfig& config);
model::ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace nextpoi
