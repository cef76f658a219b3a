#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nextpoi/model.hpp"
#include "nextpoi/types.hpp"

namespace nextpoi::eval {

using model::TrainingInstance;

struct RankedResult {
  UserIdx user;
  std::size_t instance_id = 0;
  std::vector<PoiIdx> ranking;  // best first
  PoiIdx truth;

  /// 1-based rank of the true POI; throws std::logic_error if absent.
  std::size_t rank_of_truth() const;
};

/// Candidates by descending score, ties by ascending PoiIdx.
std::vector<PoiIdx> rank_candidates(std::span<const PoiIdx> candidates, std::span<const double> scores);

/// Mean of 1{rank <= k}. Throws std::invalid_argument on empty input or k == 0.
double recall_at_k(std::span<const RankedResult> results, std::size_t k);
/// Mean of 1 / log2(rank + 1) for rank <= k, else 0.
double ndcg_at_k(std::span<const RankedResult> results, std::size_t k);

/// Scores for the given candidates of an instance, one per candidate.
using ScoreFn = std::function<std::vector<double>(const TrainingInstance&, std::span<const PoiIdx>)>;

struct Scorer {
  std::string name;
  ScoreFn score;
};

Scorer model_scorer(const model::ModelParams& params);
/// Train visit count of the candidate, independent of the user.
Scorer popularity_baseline(std::vector<std::uint64_t> popularity);

enum class CandidatePolicy { sampled, full_catalog };
std::string_view to_string(CandidatePolicy p);
CandidatePolicy parse_candidate_policy(std::string_view name);

struct EvalConfig {
  std::vector<std::size_t> k_list{5, 10};
  CandidatePolicy policy = CandidatePolicy::sampled;
  /// Sampled negatives per instance under the sampled policy.
  std::size_t candidates = 500;
  std::size_t batch_size = 50;
  /// Evaluate only the first n instances; 0 means all.
  std::size_t max_instances = 0;
  std::uint64_t seed = 7;
  /// Workers scoring the instances of a batch; results do not depend on it.
  std::size_t threads = 1;
  bool write_rankings = false;

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

struct EvalReport {
  std::string scorer;
  std::map<std::size_t, double> recall;
  std::map<std::size_t, double> ndcg;
  std::size_t instances = 0;
  std::size_t batches = 0;
  /// Mean wall time of scoring one batch, in seconds.
  double seconds_per_batch = 0.0;
  std::size_t candidates_per_instance = 0;  // largest candidate set seen
  std::string config_json;                  // echo of the evaluation settings

  /// {"scorer", "instances", "batches", "seconds_per_batch",
  ///  "candidates_per_instance", "metrics": {"recall@k": x, "ndcg@k": y, ...},
  ///  "config": {...}}
  std::string to_json() const;
  /// Aligned columns: metric, value.
  std::string to_text() const;
};

struct Evaluation {
  EvalReport report;
  std::vector<RankedResult> results;
};

/// Scores each instance's candidates (positive + its negatives, or every POI
/// under full_catalog), ranks them and aggregates metrics. Timing covers the
/// scoring calls only. Throws DataError when there are no instances.
Evaluation evaluate(const Scorer& scorer, std::span<const TrainingInstance> instances,
                    std::size_t poi_count, const EvalConfig& config);

/// CSV header: instance,user,truth,rank,top (top = space-separated POI
/// indices of the first 10 ranked candidates).
void write_rankings_csv(std::span<const RankedResult> results, std::ostream& out);

}  // namespace nextpoi::eval
