#include "nextpoi/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "nextpoi/dataset_io.hpp"
#include "nextpoi/geo.hpp"
#include "nextpoi/graphembed.hpp"
#include "nextpoi/model.hpp"

namespace nextpoi::pipeline {

namespace fs = std::filesystem;

fs::path Workspace::checkpoint(std::string_view variant) const {
  return root / ("model_" + std::string(variant) + ".ckpt.json");
}
fs::path Workspace::loss_csv(std::string_view variant) const {
  return root / ("loss_" + std::string(variant) + ".csv");
}
fs::path Workspace::report(std::string_view scorer, std::string_view ext) const {
  return root / ("eval_" + std::string(scorer) + "." + std::string(ext));
}
fs::path Workspace::rankings(std::string_view scorer) const {
  return root / ("rankings_" + std::string(scorer) + ".csv");
}
fs::path Workspace::trace(std::string_view variant, std::size_t instance) const {
  return root / ("trace_" + std::string(variant) + "_" + std::to_string(instance) + ".json");
}

namespace {

std::ifstream open_input(const fs::path& path, const char* what) {
  if (path.empty()) throw DataError(std::string("no ") + what + " file configured");
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot open ") + what + " file " + path.string());
  return in;
}

/// Writes through a temporary file so readers never see half a file.
template <class F>
void write_file(const fs::path& path, F&& body) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

DatasetArchive load_archive(const Workspace& ws) {
  auto in = open_input(ws.dataset(), "dataset archive (run preprocess first)");
  return read_archive(in);
}

graphembed::EmbeddingTable load_embedding(const fs::path& path) {
  auto in = open_input(path, "embedding (run embed first)");
  try {
    return graphembed::read_embedding(in);
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

train::NegativeSampler make_sampler(const DatasetArchive& archive, double exponent) {
  return train::NegativeSampler(archive.cities, archive.dataset.poi_locations(), archive.dataset.poi_popularity,
                                exponent);
}

model::ModelParams load_checkpoint(const Workspace& ws, const RunConfig& config,
                                   const std::optional<fs::path>& path) {
  const fs::path p = path ? *path : ws.checkpoint(model::to_string(config.model.variant));
  auto in = open_input(p, "checkpoint (run train first)");
  const auto ckpt = model::read_checkpoint(in);
  return model::load_model(ckpt, p.parent_path().string());
}

}  // namespace

void write_loss_csv(const std::vector<train::LossRecord>& history, std::ostream& out) {
  out << "step,lr,loss\n";
  char line[96];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%llu,%.17g,%.17g\n", static_cast<unsigned long long>(r.step), r.lr, r.loss);
    out << line;
  }
}

ingest::Summary cmd_preprocess(const RunConfig& config) {
  const Workspace ws{config.workspace};
  ingest::SkipReport checkin_report{config.checkins.string(), 0, {}};
  ingest::SkipReport edge_report{config.edges.string(), 0, {}};
  std::vector<ingest::RawCheckIn> raw;
  std::vector<ingest::RawEdge> edges;
  {
    auto in = open_input(config.checkins, "check-in");
    raw = ingest::parse_checkins(in, checkin_report);
  }
  {
    auto in = open_input(config.edges, "edge");
    edges = ingest::parse_edges(in, edge_report);
  }
  auto filtered = ingest::filter_dataset(raw, edges, config.filter);
  DatasetArchive archive;
  archive.dataset = ingest::split_dataset(std::move(filtered), config.train_ratio);
  const auto& ds = archive.dataset;
  std::vector<std::uint8_t> observed(ds.poi_count());
  for (std::size_t i = 0; i < observed.size(); ++i) observed[i] = ds.poi_popularity[i] > 0 ? 1 : 0;
  const auto locations = ds.poi_locations();
  archive.cities = geo::CityIndex::build(locations, config.city_cell_deg, observed);

  const auto summary = ingest::summarize(ds);
  write_file(ws.dataset(), [&](std::ostream& out) { write_archive(archive, out); });
  write_file(ws.summary(), [&](std::ostream& out) { out << summary.to_text(config.dataset_name); });
  write_file(ws.skipped(), [&](std::ostream& out) { out << checkin_report.to_text() << edge_report.to_text(); });
  spdlog::info("preprocess: {} users, {} POIs, {} check-ins", summary.users, summary.pois, summary.checkins);
  return summary;
}

EmbedOutcome cmd_embed(const RunConfig& config) {
  const Workspace ws{config.workspace};
  const auto archive = load_archive(ws);
  const auto& ds = archive.dataset;

  std::vector<std::pair<graphembed::Node, graphembed::Node>> friend_edges;
  for (const auto& [a, b] : ds.friend_edges) friend_edges.emplace_back(a.value, b.value);
  const auto user_graph = graphembed::WeightedGraph::from_edges(ds.user_count(), friend_edges);
  const auto user_walks = graphembed::random_walks(user_graph, config.user_embedding.walk);
  auto users = graphembed::train_skipgram(user_walks, ds.user_count(), config.user_embedding.skipgram);

  const auto l2l = geo::build_l2l_graph(ds.poi_locations(), config.l2l_k);
  const auto loc_graph = config.location_weights == LocationWeights::distance
                             ? graphembed::WeightedGraph::from_l2l(l2l)
                             : graphembed::WeightedGraph::from_l2l_proximity(l2l);
  const auto loc_walks = graphembed::random_walks(loc_graph, config.location_embedding.walk);
  auto locations = graphembed::train_skipgram(loc_walks, ds.poi_count(), config.location_embedding.skipgram);

  if (!users.table.all_finite() || !locations.table.all_finite()) {
    throw NumericalError("embedding training produced non-finite vectors");
  }
  write_file(ws.user_embedding(), [&](std::ostream& out) { graphembed::write_embedding(users.table, out); });
  write_file(ws.location_embedding(), [&](std::ostream& out) { graphembed::write_embedding(locations.table, out); });
  write_file(ws.l2l_edges(), [&](std::ostream& out) { geo::write_edge_list(l2l, out); });
  return {ds.user_count(), ds.poi_count(), l2l.edge_count()};
}

TrainOutcome cmd_train(const RunConfig& config) {
  const Workspace ws{config.workspace};
  const auto archive = load_archive(ws);
  auto users = load_embedding(ws.user_embedding());
  auto locations = load_embedding(ws.location_embedding());
  if (locations.count() != archive.dataset.poi_count() || users.count() != archive.dataset.user_count()) {
    throw DataError("embedding files do not match the dataset archive (rerun embed)");
  }
  const auto sampler = make_sampler(archive, config.train.popularity_exponent);
  auto instances = train::build_instances(
      archive.dataset, sampler, {config.train.negatives, config.model.ltsc_len, config.train.seed});
  if (instances.empty() && config.train.max_iters > 0) throw DataError("no training instances");

  auto params = model::init_params(config.model, std::move(users.matrix()), std::move(locations.matrix()),
                                   derive_seed(config.train.seed, {0x1a17}));
  const std::string variant(model::to_string(config.model.variant));
  const model::FrozenRefs refs{ws.user_embedding().filename().string(), ws.location_embedding().filename().string()};
  const auto ckpt_path = ws.checkpoint(variant);
  auto save = [&](const model::ModelParams& p, std::uint64_t step) {
    write_file(ckpt_path, [&](std::ostream& out) { model::write_checkpoint(p, refs, step, out); });
  };

  TrainOutcome outcome;
  outcome.instances = instances.size();
  const std::size_t count = instances.size();
  auto result = train::train(std::move(params), std::move(instances), config.train, &sampler, save);
  save(result.params, result.history.size());
  write_file(ws.loss_csv(variant), [&](std::ostream& out) { write_loss_csv(result.history, out); });
  outcome.history = std::move(result.history);
  outcome.checkpoint = ckpt_path;
  spdlog::info("train: {} instances, {} steps", count, outcome.history.size());
  return outcome;
}

EvaluateOutcome cmd_evaluate(const RunConfig& config, std::optional<fs::path> checkpoint) {
  const Workspace ws{config.workspace};
  const auto archive = load_archive(ws);
  const auto params = load_checkpoint(ws, config, checkpoint);
  const auto sampler = make_sampler(archive, config.train.popularity_exponent);
  const std::size_t negatives = config.eval.policy == eval::CandidatePolicy::sampled ? config.eval.candidates : 0;
  const auto instances =
      train::build_eval_instances(archive.dataset, sampler, {negatives, params.config.ltsc_len, config.eval.seed});

  EvaluateOutcome outcome;
  const auto model_scorer = eval::model_scorer(params);
  const auto model_eval = eval::evaluate(model_scorer, instances, archive.dataset.poi_count(), config.eval);
  const auto pop_eval = eval::evaluate(eval::popularity_baseline(archive.dataset.poi_popularity), instances,
                                       archive.dataset.poi_count(), config.eval);
  const std::string variant(model::to_string(params.config.variant));
  for (const auto* ev : {&model_eval, &pop_eval}) {
    const std::string name = ev == &model_eval ? variant : "popularity";
    write_file(ws.report(name, "json"), [&](std::ostream& out) { out << ev->report.to_json(); });
    write_file(ws.report(name, "txt"), [&](std::ostream& out) { out << ev->report.to_text(); });
    if (config.eval.write_rankings) {
      write_file(ws.rankings(name), [&](std::ostream& out) { eval::write_rankings_csv(ev->results, out); });
    }
  }
  outcome.model = model_eval.report;
  outcome.popularity = pop_eval.report;
  return outcome;
}

fs::path cmd_trace(const RunConfig& config, std::size_t instance, std::optional<std::uint32_t> candidate,
                   std::optional<fs::path> checkpoint) {
  const Workspace ws{config.workspace};
  const auto archive = load_archive(ws);
  const auto params = load_checkpoint(ws, config, checkpoint);
  const auto sampler = make_sampler(archive, config.train.popularity_exponent);
  const auto instances = train::build_eval_instances(archive.dataset, sampler, {0, params.config.ltsc_len, config.eval.seed});
  if (instance >= instances.size()) {
    throw DataError("instance " + std::to_string(instance) + " out of range; there are " +
                    std::to_string(instances.size()) + " test instances");
  }
  const auto& inst = instances[instance];
  const PoiIdx target = candidate ? PoiIdx{*candidate} : inst.positive;
  if (target.get() >= archive.dataset.poi_count()) throw DataError("candidate POI index out of range");
  const auto trace = model::trace_forward(params, inst, target);
  const auto path = ws.trace(model::to_string(params.config.variant), instance);
  write_file(path, [&](std::ostream& out) { out << model::export_trace(trace); });
  return path;
}

}  // namespace nextpoi::pipeline
