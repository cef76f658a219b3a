#include <algorithm>
#include <chrono>
#include <exception>
#include <thread>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nextpoi/eval.hpp"

namespace nextpoi::eval {

using nlohmann::json;

Scorer model_scorer(const model::ModelParams& params) {
  return {"model:" + std::string(model::to_string(params.config.variant)),
          [&params](const TrainingInstance& inst, std::span<const PoiIdx> candidates) {
            return model::score_candidates(params, inst, candidates);
          }};
}

Scorer popularity_baseline(std::vector<std::uint64_t> popularity) {
  return {"popularity", [pop = std::move(popularity)](const TrainingInstance&, std::span<const PoiIdx> candidates) {
            std::vector<double> out;
            out.reserve(candidates.size());
            for (auto c : candidates) {
              if (c.get() >= pop.size()) throw std::out_of_range("popularity: unknown POI " + std::to_string(c.get()));
              out.push_back(static_cast<double>(pop[c.get()]));
            }
            return out;
          }};
}

std::string_view to_string(CandidatePolicy p) {
  return p == CandidatePolicy::sampled ? "sampled" : "full-catalog";
}

CandidatePolicy parse_candidate_policy(std::string_view name) {
  if (name == "sampled") return CandidatePolicy::sampled;
  if (name == "full-catalog" || name == "full_catalog" || name == "full") return CandidatePolicy::full_catalog;
  throw std::invalid_argument("unknown candidate policy '" + std::string(name) + "'");
}

void EvalConfig::validate() const {
  if (k_list.empty()) throw std::invalid_argument("eval config: k_list is empty");
  for (auto k : k_list) {
    if (k == 0) throw std::invalid_argument("eval config: k must be >= 1");
  }
  if (batch_size == 0) throw std::invalid_argument("eval config: batch_size must be >= 1");
  if (threads == 0) throw std::invalid_argument("eval config: threads must be >= 1");
}

std::string EvalReport::to_json() const {
  json metrics = json::object();
  for (const auto& [k, v] : recall) metrics["recall@" + std::to_string(k)] = v;
  for (const auto& [k, v] : ndcg) metrics["ndcg@" + std::to_string(k)] = v;
  json j{{"scorer", scorer},
         {"instances", instances},
         {"batches", batches},
         {"seconds_per_batch", seconds_per_batch},
         {"candidates_per_instance", candidates_per_instance},
         {"metrics", std::move(metrics)},
         {"config", config_json.empty() ? json::object() : json::parse(config_json)}};
  return j.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-22s %s\n", "scorer", scorer.c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-22s %zu\n", "instances", instances);
  out << line;
  std::snprintf(line, sizeof line, "%-22s %zu\n", "candidates/instance", candidates_per_instance);
  out << line;
  for (const auto& [k, v] : recall) {
    std::snprintf(line, sizeof line, "%-22s %.4f\n", ("R@" + std::to_string(k)).c_str(), v);
    out << line;
  }
  for (const auto& [k, v] : ndcg) {
    std::snprintf(line, sizeof line, "%-22s %.4f\n", ("NDCG@" + std::to_string(k)).c_str(), v);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-22s %.6f\n", "seconds/batch", seconds_per_batch);
  out << line;
  return out.str();
}

Evaluation evaluate(const Scorer& scorer, std::span<const TrainingInstance> instances, std::size_t poi_count,
                    const EvalConfig& config) {
  config.validate();
  if (config.max_instances > 0 && instances.size() > config.max_instances) {
    instances = instances.first(config.max_instances);
  }
  if (instances.empty()) throw DataError("evaluation: no test instances");

  Evaluation ev;
  auto& report = ev.report;
  report.scorer = scorer.name;
  report.instances = instances.size();
  std::vector<PoiIdx> catalog;
  if (config.policy == CandidatePolicy::full_catalog) {
    for (std::size_t i = 0; i < poi_count; ++i) catalog.emplace_back(i);
  }

  using Clock = std::chrono::steady_clock;
  double total_seconds = 0.0;
  for (std::size_t lo = 0; lo < instances.size(); lo += config.batch_size) {
    const std::size_t hi = std::min(instances.size(), lo + config.batch_size);
    std::vector<std::vector<PoiIdx>> candidates(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      auto& c = candidates[i - lo];
      if (config.policy == CandidatePolicy::full_catalog) {
        c = catalog;
      } else {
        const auto& neg = instances[i].negatives;
        c.push_back(instances[i].positive);
        c.insert(c.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(std::min(config.candidates, neg.size())));
      }
      report.candidates_per_instance = std::max(report.candidates_per_instance, c.size());
    }
    std::vector<std::vector<double>> scores(hi - lo);
    const auto start = Clock::now();
    const std::size_t workers = std::min(config.threads, hi - lo);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
      try {
        for (std::size_t i = lo + w; i < hi; i += workers) scores[i - lo] = scorer.score(instances[i], candidates[i - lo]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    total_seconds += std::chrono::duration<double>(Clock::now() - start).count();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    ++report.batches;
    for (std::size_t i = lo; i < hi; ++i) {
      RankedResult r;
      r.user = instances[i].user;
      r.instance_id = instances[i].id;
      r.truth = instances[i].positive;
      r.ranking = rank_candidates(candidates[i - lo], scores[i - lo]);
      ev.results.push_back(std::move(r));
    }
  }
  report.seconds_per_batch = total_seconds / static_cast<double>(report.batches);
  for (auto k : config.k_list) {
    report.recall[k] = recall_at_k(ev.results, k);
    report.ndcg[k] = ndcg_at_k(ev.results, k);
  }
  report.config_json = json{{"k_list", config.k_list},
                            {"policy", to_string(config.policy)},
                            {"candidates", config.candidates},
                            {"batch_size", config.batch_size},
                            {"max_instances", config.max_instances},
                            {"seed", config.seed}}
                           .dump();
  return ev;
}

void write_rankings_csv(std::span<const RankedResult> results, std::ostream& out) {
  out << "instance,user,truth,rank,top\n";
  for (const auto& r : results) {
    out << r.instance_id << ',' << r.user.value << ',' << r.truth.value << ',' << r.rank_of_truth() << ',';
    const std::size_t n = std::min<std::size_t>(10, r.ranking.size());
    for (std::size_t i = 0; i < n; ++i) out << (i ? " " : "") << r.ranking[i].value;
    out << '\n';
  }
}

}  // namespace nextpoi::eval
