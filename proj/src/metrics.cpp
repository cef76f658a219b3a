#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nextpoi/eval.hpp"

namespace nextpoi::eval {

std::size_t RankedResult::rank_of_truth() const {
  const auto it = std::find(ranking.begin(), ranking.end(), truth);
  if (it == ranking.end()) {
    throw std::logic_error("instance " + std::to_string(instance_id) + ": true POI missing from ranking");
  }
  return static_cast<std::size_t>(it - ranking.begin()) + 1;
}

std::vector<PoiIdx> rank_candidates(std::span<const PoiIdx> candidates, std::span<const double> scores) {
  if (candidates.size() != scores.size()) {
    throw std::invalid_argument("rank_candidates: " + std::to_string(candidates.size()) + " candidates but " +
                                std::to_string(scores.size()) + " scores");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::vector<PoiIdx> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(candidates[i]);
  return out;
}

namespace {

void check(std::span<const RankedResult> results, std::size_t k, const char* what) {
  if (results.empty()) throw std::invalid_argument(std::string(what) + ": no results");
  if (k == 0) throw std::invalid_argument(std::string(what) + ": k must be >= 1");
}

}  // namespace

double recall_at_k(std::span<const RankedResult> results, std::size_t k) {
  check(results, k, "recall_at_k");
  double hits = 0.0;
  for (const auto& r : results) {
    if (r.rank_of_truth() <= k) hits += 1.0;
  }
  return hits / static_cast<double>(results.size());
}

double ndcg_at_k(std::span<const RankedResult> results, std::size_t k) {
  check(results, k, "ndcg_at_k");
  double total = 0.0;
  for (const auto& r : results) {
    const std::size_t rank = r.rank_of_truth();
    if (rank <= k) total += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  }
  return total / static_cast<double>(results.size());
}

}  // namespace nextpoi::eval
