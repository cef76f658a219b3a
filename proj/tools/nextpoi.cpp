// nextpoi: preprocess, embed, train, evaluate and trace from one JSON config.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nextpoi/config.hpp"
#include "nextpoi/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Overrides {
  std::string workspace;
  std::string checkins;
  std::string edges;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> max_iters;
  std::string variant;
};

nextpoi::RunConfig resolve_config(const std::string& path, const Overrides& o) {
  nextpoi::RunConfig config;
  if (!path.empty()) {
    config = nextpoi::load_run_config(path);
  } else {
    config.propagate();
  }
  if (!o.workspace.empty()) config.workspace = o.workspace;
  if (!o.checkins.empty()) config.checkins = o.checkins;
  if (!o.edges.empty()) config.edges = o.edges;
  if (o.seed) config.seed = *o.seed;
  if (o.threads) config.threads = *o.threads;
  if (o.max_iters) config.train.max_iters = *o.max_iters;
  if (!o.variant.empty()) config.model.variant = nextpoi::model::parse_variant(o.variant);
  config.propagate();
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-POI recommendation pipeline with self-attention over trajectories and social history"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides o;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--workspace", o.workspace, "Directory for all artifacts");
  app.add_option("--checkins", o.checkins, "Check-in file (user, time, lat, lon, poi; tab separated)");
  app.add_option("--edges", o.edges, "Friendship edge file (user, user; tab separated)");
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("--threads", o.threads, "Worker threads for training and evaluation")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto* pre = app.add_subcommand("preprocess", "Filter, split and index the raw data");
  auto* emb = app.add_subcommand("embed", "Train user and location embeddings");
  auto* trn = app.add_subcommand("train", "Train the recommender");
  trn->add_option("--max-iters", o.max_iters, "Override train.max_iters");
  trn->add_option("--variant", o.variant, "full, self-only, social-only, long-only or short-only");

  std::string checkpoint;
  auto* evl = app.add_subcommand("evaluate", "Rank test instances and report Recall/NDCG");
  evl->add_option("--checkpoint", checkpoint, "Checkpoint file (default: workspace model of the variant)");
  evl->add_option("--variant", o.variant, "Variant whose checkpoint to evaluate");

  std::size_t instance = 0;
  std::optional<std::uint32_t> candidate;
  auto* trc = app.add_subcommand("trace", "Export attention weights of one test instance");
  trc->add_option("--instance", instance, "Test instance index")->required();
  trc->add_option("--candidate", candidate, "Candidate POI index (default: the true next POI)");
  trc->add_option("--checkpoint", checkpoint, "Checkpoint file");
  trc->add_option("--variant", o.variant, "Variant whose checkpoint to trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  // Logs go to stderr so stdout carries only command results.
  spdlog::set_default_logger(spdlog::stderr_color_mt("nextpoi"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  nextpoi::RunConfig config;
  try {
    config = resolve_config(config_path, o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }

  namespace pl = nextpoi::pipeline;
  const std::optional<std::filesystem::path> ckpt =
      checkpoint.empty() ? std::nullopt : std::optional<std::filesystem::path>(checkpoint);
  try {
    if (pre->parsed()) {
      std::cout << pl::cmd_preprocess(config).to_text(config.dataset_name);
    } else if (emb->parsed()) {
      const auto r = pl::cmd_embed(config);
      std::cout << "embedded " << r.users << " users and " << r.locations << " locations (" << r.l2l_edges
                << " L2L edges)\n";
    } else if (trn->parsed()) {
      const auto r = pl::cmd_train(config);
      std::cout << "trained on " << r.instances << " instances for " << r.history.size() << " steps; checkpoint "
                << r.checkpoint.string() << "\n";
    } else if (evl->parsed()) {
      const auto r = pl::cmd_evaluate(config, ckpt);
      std::cout << r.model.to_text() << "\n" << r.popularity.to_text();
    } else if (trc->parsed()) {
      std::cout << pl::cmd_trace(config, instance, candidate, ckpt).string() << "\n";
    }
  } catch (const nextpoi::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  }
  return kOk;
}
