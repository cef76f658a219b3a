#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "nextpoi/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + NEXTPOI_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json small_config(const fs::path& workspace) {
  return {{"paths",
           {{"checkins", (fixtures::fixture_dir() / "sample_checkins.txt").string()},
            {"edges", (fixtures::fixture_dir() / "sample_edges.txt").string()},
            {"workspace", workspace.string()}}},
          {"dataset_name", "sample"},
          {"seed", 5},
          {"model", {{"d", 8}, {"heads", 2}, {"layers", 1}, {"stc_len", 5}, {"ltsc_len", 10}}},
          {"user_embedding", {{"walk_len", 10}, {"walks_per_node", 2}, {"window", 3}, {"epochs", 1}}},
          {"location_embedding", {{"walk_len", 10}, {"walks_per_node", 2}, {"window", 3}, {"epochs", 1}}},
          {"graph", {{"l2l_k", 4}}},
          {"train", {{"batch_size", 8}, {"negatives", 6}, {"max_iters", 12}, {"checkpoint_every", 5}}},
          {"eval", {{"k_list", {1, 5}}, {"candidates", 8}, {"write_rankings", true}}}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

// Runs the whole pipeline into `dir`/ws and returns the workspace.
fs::path full_pipeline(const fs::path& dir) {
  const fs::path ws = dir / "ws";
  const auto cfg = write_config(dir, small_config(ws)).string();
  for (const char* cmd : {"preprocess", "embed", "train", "evaluate"}) {
    const auto r = run_cli(dir, "-c " + cfg + " " + cmd);
    EXPECT_EQ(r.code, 0) << cmd << ": " << r.err;
  }
  const auto r = run_cli(dir, "-c " + cfg + " trace --instance 0");
  EXPECT_EQ(r.code, 0) << r.err;
  return ws;
}

const char* kArtifacts[] = {"dataset.json",        "summary.txt",          "skipped_lines.txt",
                            "user_embedding.json", "location_embedding.json", "l2l_edges.tsv",
                            "model_full.ckpt.json", "loss_full.csv",        "rankings_full.csv",
                            "rankings_popularity.csv", "trace_full_0.json"};

}  // namespace

TEST(Cli, PipelineIsDeterministic) {
  const auto a = full_pipeline(fixtures::temp_dir("cli_a"));
  const auto b = full_pipeline(fixtures::temp_dir("cli_b"));
  for (const char* name : kArtifacts) {
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  // Reports differ only in the measured time.
  for (const char* name : {"eval_full.json", "eval_popularity.json"}) {
    auto ja = json::parse(slurp(a / name));
    auto jb = json::parse(slurp(b / name));
    EXPECT_GT(ja.at("seconds_per_batch").get<double>(), 0.0);
    ja.erase("seconds_per_batch");
    jb.erase("seconds_per_batch");
    EXPECT_EQ(ja, jb) << name;
  }
}

TEST(Cli, PreprocessSummaryMatchesGolden) {
  const auto dir = fixtures::temp_dir("cli_pre");
  const auto cfg = write_config(dir, small_config(dir / "ws")).string();
  const auto r = run_cli(dir, "-c " + cfg + " preprocess");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto golden = json::parse(slurp(fixtures::fixture_dir() / "sample_golden.json"));
  const auto summary = slurp(dir / "ws" / "summary.txt");
  EXPECT_EQ(summary, r.out);
  for (const char* key : {"users", "pois", "checkins", "trajectories"}) {
    EXPECT_NE(summary.find(std::to_string(golden.at(key).get<int>())), std::string::npos) << key << "\n" << summary;
  }
}

TEST(Cli, ArtifactsHaveDocumentedShape) {
  const auto ws = full_pipeline(fixtures::temp_dir("cli_shape"));
  const auto loss = slurp(ws / "loss_full.csv");
  std::istringstream lines(loss);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "step,lr,loss");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u) << line;
  }
  EXPECT_EQ(rows, 12u);

  const auto report = json::parse(slurp(ws / "eval_full.json"));
  EXPECT_EQ(report.at("scorer"), "model:full");
  for (const char* key : {"recall@1", "recall@5", "ndcg@1", "ndcg@5"}) {
    const double v = report.at("metrics").at(key);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(report.at("candidates_per_instance"), 9);
  EXPECT_TRUE(fs::exists(ws / "eval_full.txt"));
  EXPECT_TRUE(fs::exists(ws / "eval_popularity.txt"));

  const auto trace = json::parse(slurp(ws / "trace_full_0.json"));
  EXPECT_TRUE(trace.is_object());

  const auto user_emb = json::parse(slurp(ws / "user_embedding.json"));
  EXPECT_EQ(user_emb.at("dim"), 8);
}

TEST(Cli, ZeroIterationsKeepsInitialParameters) {
  const auto dir = fixtures::temp_dir("cli_zero");
  auto j = small_config(dir / "ws");
  const auto cfg = write_config(dir, j).string();
  ASSERT_EQ(run_cli(dir, "-c " + cfg + " preprocess").code, 0);
  ASSERT_EQ(run_cli(dir, "-c " + cfg + " embed").code, 0);
  const auto r = run_cli(dir, "-c " + cfg + " train --max-iters 0");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "ws" / "loss_full.csv"), "step,lr,loss\n");
}

TEST(Cli, ExitCodes) {
  const auto dir = fixtures::temp_dir("cli_exit");
  EXPECT_EQ(run_cli(dir, "").code, 1);
  EXPECT_EQ(run_cli(dir, "frobnicate").code, 1);
  EXPECT_EQ(run_cli(dir, "--help").code, 0);

  auto j = small_config(dir / "ws");
  j["paths"]["checkins"] = (dir / "missing.txt").string();
  auto r = run_cli(dir, "-c " + write_config(dir, j).string() + " preprocess");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.txt"), std::string::npos) << r.err;

  // Later stages without earlier artifacts are data errors too.
  j = small_config(dir / "empty_ws");
  r = run_cli(dir, "-c " + write_config(dir, j).string() + " train");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("preprocess"), std::string::npos) << r.err;

  j = small_config(dir / "ws");
  j["model"]["dropout"] = 0.1;
  r = run_cli(dir, "-c " + write_config(dir, j).string() + " preprocess");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dropout"), std::string::npos) << r.err;

  j = small_config(dir / "ws");
  j["model"]["heads"] = 3;
  EXPECT_EQ(run_cli(dir, "-c " + write_config(dir, j).string() + " preprocess").code, 1);
}

TEST(Cli, DivergenceExitsWithNumericalCode) {
  const auto dir = fixtures::temp_dir("cli_diverge");
  auto j = small_config(dir / "ws");
  j["train"]["lr0"] = 1e200;
  j["train"]["lambda"] = 1.0;
  j["train"]["max_iters"] = 50;
  const auto cfg = write_config(dir, j).string();
  ASSERT_EQ(run_cli(dir, "-c " + cfg + " preprocess").code, 0);
  ASSERT_EQ(run_cli(dir, "-c " + cfg + " embed").code, 0);
  const auto r = run_cli(dir, "-c " + cfg + " train");
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Config, JsonRoundTrip) {
  auto j = small_config("/tmp/ws");
  j["model"]["variant"] = "social-only";
  j["eval"]["policy"] = "full-catalog";
  const auto c = nextpoi::run_config_from_json(j);
  const auto dumped = nextpoi::run_config_to_json(c);
  const auto again = nextpoi::run_config_from_json(dumped);
  EXPECT_EQ(nextpoi::run_config_to_json(again), dumped);
  EXPECT_EQ(c.model.variant, nextpoi::model::Variant::social_only);
  EXPECT_EQ(c.eval.policy, nextpoi::eval::CandidatePolicy::full_catalog);
  EXPECT_EQ(c.user_embedding.skipgram.dim, 8u);
}

TEST(Config, DefaultsAndSeedDerivation) {
  const auto c = nextpoi::run_config_from_json(json::object());
  EXPECT_EQ(c.model.d, 256u);
  EXPECT_EQ(c.model.heads, 8u);
  EXPECT_EQ(c.model.layers, 6u);
  EXPECT_EQ(c.model.stc_len, 50u);
  EXPECT_EQ(c.model.ltsc_len, 200u);
  EXPECT_EQ(c.train.negatives, 500u);
  EXPECT_EQ(c.eval.candidates, 500u);
  auto j = json::object();
  j["seed"] = 2;
  const auto other = nextpoi::run_config_from_json(j);
  EXPECT_NE(c.train.seed, other.train.seed);
  EXPECT_NE(c.train.seed, c.eval.seed);
  EXPECT_NE(c.user_embedding.walk.seed, c.location_embedding.walk.seed);
}

TEST(Config, RejectsUnknownAndBadKeys) {
  EXPECT_THROW(nextpoi::run_config_from_json(json{{"sead", 1}}), std::invalid_argument);
  EXPECT_THROW(nextpoi::run_config_from_json(json{{"train", {{"lr", 0.1}}}}), std::invalid_argument);
  EXPECT_THROW(nextpoi::run_config_from_json(json{{"graph", {{"location_weights", "euclid"}}}}),
               std::invalid_argument);
  EXPECT_THROW(nextpoi::run_config_from_json(json{{"model", {{"d", "big"}}}}), std::invalid_argument);
  EXPECT_THROW(nextpoi::run_config_from_json(json{{"filter", {{"train_ratio", 1.5}}}}), std::invalid_argument);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const auto dir = fixtures::temp_dir("cli_rel");
  json j{{"paths", {{"checkins", "data/c.txt"}, {"workspace", "ws"}}}};
  const auto p = dir / "run.json";
  std::ofstream(p) << j.dump();
  const auto c = nextpoi::load_run_config(p);
  EXPECT_EQ(c.checkins, dir / "data/c.txt");
  EXPECT_EQ(c.workspace, dir / "ws");
}
