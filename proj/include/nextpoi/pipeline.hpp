#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "nextpoi/config.hpp"
#include "nextpoi/eval.hpp"
#include "nextpoi/ingest.hpp"
#include "nextpoi/train.hpp"

namespace nextpoi::pipeline {

/// Workspace file names. Every artifact lives directly under the workspace.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path dataset() const { return root / "dataset.json"; }
  std::filesystem::path summary() const { return root / "summary.txt"; }
  std::filesystem::path skipped() const { return root / "skipped_lines.txt"; }
  std::filesystem::path user_embedding() const { return root / "user_embedding.json"; }
  std::filesystem::path location_embedding() const { return root / "location_embedding.json"; }
  std::filesystem::path l2l_edges() const { return root / "l2l_edges.tsv"; }
  std::filesystem::path checkpoint(std::string_view variant) const;
  std::filesystem::path loss_csv(std::string_view variant) const;
  std::filesystem::path report(std::string_view scorer, std::string_view ext) const;
  std::filesystem::path rankings(std::string_view scorer) const;
  std::filesystem::path trace(std::string_view variant, std::size_t instance) const;
};

/// Parse, filter, split; writes the dataset archive, the summary table and
/// the skipped-line report.
ingest::Summary cmd_preprocess(const RunConfig& config);

struct EmbedOutcome {
  std::size_t users = 0;
  std::size_t locations = 0;
  std::size_t l2l_edges = 0;
};
/// node2vec over the friend graph and the L2L graph.
EmbedOutcome cmd_embed(const RunConfig& config);

struct TrainOutcome {
  std::size_t instances = 0;
  std::vector<train::LossRecord> history;
  std::filesystem::path checkpoint;
};
/// Trains the configured variant; writes the checkpoint and the loss CSV.
TrainOutcome cmd_train(const RunConfig& config);

struct EvaluateOutcome {
  eval::EvalReport model;
  eval::EvalReport popularity;
};
/// Evaluates a checkpoint (default: the configured variant's) and the
/// popularity baseline on the test instances.
EvaluateOutcome cmd_evaluate(const RunConfig& config, std::optional<std::filesystem::path> checkpoint = {});

/// Attention trace of one test instance; candidate defaults to the true POI.
std::filesystem::path cmd_trace(const RunConfig& config, std::size_t instance,
                                std::optional<std::uint32_t> candidate = {},
                                std::optional<std::filesystem::path> checkpoint = {});

/// Loss history as CSV with header step,lr,loss.
void write_loss_csv(const std::vector<train::LossRecord>& history, std::ostream& out);

}  // namespace nextpoi::pipeline
