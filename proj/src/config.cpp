#include "nextpoi/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace nextpoi {

using nlohmann::json;

namespace {

/// Reads optional keys of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw std::invalid_argument("config: '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& at(const std::string& key) const { return j_.at(key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) {
        throw std::invalid_argument("config: unknown key '" + name_ + "." + item.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

json embed_to_json(const EmbedConfig& e) {
  return {{"p", e.walk.p},
          {"q", e.walk.q},
          {"walk_len", e.walk.walk_len},
          {"walks_per_node", e.walk.walks_per_node},
          {"dim", e.skipgram.dim},
          {"window", e.skipgram.window},
          {"negatives", e.skipgram.negatives},
          {"epochs", e.skipgram.epochs},
          {"lr", e.skipgram.lr}};
}

bool embed_from_json(const json& j, const std::string& name, EmbedConfig& e) {
  Section s(j, name);
  s.get("p", e.walk.p);
  s.get("q", e.walk.q);
  s.get("walk_len", e.walk.walk_len);
  s.get("walks_per_node", e.walk.walks_per_node);
  const bool has_dim = s.has("dim");
  s.get("dim", e.skipgram.dim);
  s.get("window", e.skipgram.window);
  s.get("negatives", e.skipgram.negatives);
  s.get("epochs", e.skipgram.epochs);
  s.get("lr", e.skipgram.lr);
  s.finish();
  return has_dim;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

json model_config_to_json(const model::ModelConfig& c) {
  return {{"d", c.d},
          {"heads", c.heads},
          {"layers", c.layers},
          {"stc_len", c.stc_len},
          {"ltsc_len", c.ltsc_len},
          {"time_buckets", c.time_buckets},
          {"variant", model::to_string(c.variant)},
          {"scale", model::to_string(c.scale)},
          {"mean_after_softmax", c.mean_after_softmax},
          {"pad_sequences", c.pad_sequences}};
}

model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig c;
  Section s(j, "model");
  s.get("d", c.d);
  s.get("heads", c.heads);
  s.get("layers", c.layers);
  s.get("stc_len", c.stc_len);
  s.get("ltsc_len", c.ltsc_len);
  s.get("time_buckets", c.time_buckets);
  std::string variant(model::to_string(c.variant)), scale(model::to_string(c.scale));
  s.get("variant", variant);
  s.get("scale", scale);
  c.variant = model::parse_variant(variant);
  c.scale = model::parse_scale_mode(scale);
  s.get("mean_after_softmax", c.mean_after_softmax);
  s.get("pad_sequences", c.pad_sequences);
  s.finish();
  return c;
}

void RunConfig::validate() const {
  filter.validate();
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("config: train_ratio must be in (0, 1)");
  if (!(city_cell_deg > 0.0)) throw std::invalid_argument("config: city_cell_deg must be > 0");
  if (l2l_k == 0) throw std::invalid_argument("config: l2l_k must be >= 1");
  user_embedding.walk.validate();
  location_embedding.walk.validate();
  if (user_embedding.skipgram.dim != model.d) {
    throw std::invalid_argument("config: user embedding dim " + std::to_string(user_embedding.skipgram.dim) +
                                " must equal model.d " + std::to_string(model.d));
  }
  if (location_embedding.skipgram.dim == 0) throw std::invalid_argument("config: location embedding dim must be >= 1");
  model.validate();
  train.validate();
  eval.validate();
  if (threads == 0) throw std::invalid_argument("config: threads must be >= 1");
}

void RunConfig::propagate() {
  user_embedding.walk.seed = derive_seed(seed, {0x11});
  user_embedding.skipgram.seed = derive_seed(seed, {0x12});
  location_embedding.walk.seed = derive_seed(seed, {0x21});
  location_embedding.skipgram.seed = derive_seed(seed, {0x22});
  train.seed = derive_seed(seed, {0x31});
  eval.seed = derive_seed(seed, {0x41});
  train.threads = threads;
  eval.threads = threads;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  Section top(j, "config");
  if (top.has("paths")) {
    Section p(top.at("paths"), "paths");
    std::string checkins, edges, workspace = c.workspace.string();
    p.get("checkins", checkins);
    p.get("edges", edges);
    p.get("workspace", workspace);
    p.finish();
    c.checkins = resolve(checkins, base_dir);
    c.edges = resolve(edges, base_dir);
    c.workspace = resolve(workspace, base_dir);
  }
  top.get("dataset_name", c.dataset_name);
  top.get("seed", c.seed);
  top.get("threads", c.threads);
  if (top.has("filter")) {
    Section f(top.at("filter"), "filter");
    f.get("min_user_checkins", c.filter.min_user_checkins);
    f.get("min_poi_visits", c.filter.min_poi_visits);
    f.get("min_trajectories", c.filter.min_trajectories);
    f.get("session_gap_hours", c.filter.session_gap_hours);
    f.get("train_ratio", c.train_ratio);
    f.get("city_cell_deg", c.city_cell_deg);
    f.finish();
  }
  if (top.has("graph")) {
    Section g(top.at("graph"), "graph");
    g.get("l2l_k", c.l2l_k);
    std::string weights = "distance";
    g.get("location_weights", weights);
    if (weights == "distance") {
      c.location_weights = LocationWeights::distance;
    } else if (weights == "proximity") {
      c.location_weights = LocationWeights::proximity;
    } else {
      throw std::invalid_argument("config: graph.location_weights must be 'distance' or 'proximity'");
    }
    g.finish();
  }
  if (top.has("model")) c.model = model_config_from_json(top.at("model"));
  c.user_embedding.skipgram.dim = c.model.d;
  c.location_embedding.skipgram.dim = c.model.d;
  if (top.has("user_embedding")) embed_from_json(top.at("user_embedding"), "user_embedding", c.user_embedding);
  if (top.has("location_embedding")) {
    embed_from_json(top.at("location_embedding"), "location_embedding", c.location_embedding);
  }
  if (top.has("train")) {
    Section t(top.at("train"), "train");
    t.get("batch_size", c.train.batch_size);
    t.get("negatives", c.train.negatives);
    t.get("lr0", c.train.lr0);
    t.get("decay", c.train.decay);
    t.get("decay_steps", c.train.decay_steps);
    t.get("lambda", c.train.lambda);
    t.get("max_iters", c.train.max_iters);
    t.get("resample_each_epoch", c.train.resample_each_epoch);
    t.get("popularity_exponent", c.train.popularity_exponent);
    t.get("pairs_per_instance", c.train.pairs_per_instance);
    t.get("checkpoint_every", c.train.checkpoint_every);
    t.finish();
  }
  if (top.has("eval")) {
    Section e(top.at("eval"), "eval");
    e.get("k_list", c.eval.k_list);
    std::string policy(eval::to_string(c.eval.policy));
    e.get("policy", policy);
    c.eval.policy = eval::parse_candidate_policy(policy);
    e.get("candidates", c.eval.candidates);
    e.get("batch_size", c.eval.batch_size);
    e.get("max_instances", c.eval.max_instances);
    e.get("write_rankings", c.eval.write_rankings);
    e.finish();
  }
  top.finish();
  c.propagate();
  c.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  return {{"paths", {{"checkins", c.checkins.string()}, {"edges", c.edges.string()}, {"workspace", c.workspace.string()}}},
          {"dataset_name", c.dataset_name},
          {"seed", c.seed},
          {"threads", c.threads},
          {"filter",
           {{"min_user_checkins", c.filter.min_user_checkins},
            {"min_poi_visits", c.filter.min_poi_visits},
            {"min_trajectories", c.filter.min_trajectories},
            {"session_gap_hours", c.filter.session_gap_hours},
            {"train_ratio", c.train_ratio},
            {"city_cell_deg", c.city_cell_deg}}},
          {"graph",
           {{"l2l_k", c.l2l_k},
            {"location_weights", c.location_weights == LocationWeights::distance ? "distance" : "proximity"}}},
          {"user_embedding", embed_to_json(c.user_embedding)},
          {"location_embedding", embed_to_json(c.location_embedding)},
          {"model", model_config_to_json(c.model)},
          {"train",
           {{"batch_size", c.train.batch_size},
            {"negatives", c.train.negatives},
            {"lr0", c.train.lr0},
            {"decay", c.train.decay},
            {"decay_steps", c.train.decay_steps},
            {"lambda", c.train.lambda},
            {"max_iters", c.train.max_iters},
            {"resample_each_epoch", c.train.resample_each_epoch},
            {"popularity_exponent", c.train.popularity_exponent},
            {"pairs_per_instance", c.train.pairs_per_instance},
            {"checkpoint_every", c.train.checkpoint_every}}},
          {"eval",
           {{"k_list", c.eval.k_list},
            {"policy", eval::to_string(c.eval.policy)},
            {"candidates", c.eval.candidates},
            {"batch_size", c.eval.batch_size},
            {"max_instances", c.eval.max_instances},
            {"write_rankings", c.eval.write_rankings}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace nextpoi
