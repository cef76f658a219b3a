#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "nextpoi/config.hpp"
#include "nextpoi/graphembed.hpp"
#include "nextpoi/model.hpp"

namespace nextpoi::model {

using nlohmann::json;

void write_checkpoint(const ModelParams& params, const FrozenRefs& refs, std::uint64_t step, std::ostream& out) {
  json tensors = json::object();
  for (const auto& [name, t] : params.trainable.named()) {
    tensors[name] = {{"rows", t->rows()}, {"cols", t->cols()},
                     {"data", std::vector<double>(t->data().begin(), t->data().end())}};
  }
  json j{{"format", "nextpoi-checkpoint"},
         {"version", 1},
         {"config", model_config_to_json(params.config)},
         {"step", step},
         {"frozen", {{"user_embedding", refs.user_embedding}, {"location_embedding", refs.location_embedding}}},
         {"tensors", std::move(tensors)}};
  out << j.dump() << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint c;
  try {
    const auto j = json::parse(in);
    if (j.value("format", "") != "nextpoi-checkpoint") throw DataError("not a model checkpoint");
    c.config = model_config_from_json(j.at("config"));
    c.config.validate();
    c.step = j.at("step").get<std::uint64_t>();
    c.refs.user_embedding = j.at("frozen").at("user_embedding").get<std::string>();
    c.refs.location_embedding = j.at("frozen").at("location_embedding").get<std::string>();
    c.trainable.stc_layers.resize(c.config.layers);
    c.trainable.ltsc_layers.resize(c.config.layers);
    const auto& tensors = j.at("tensors");
    for (auto& [name, t] : c.trainable.named()) {
      if (!tensors.contains(name)) throw DataError("checkpoint is missing tensor " + name);
      const auto& jt = tensors.at(name);
      auto data = jt.at("data").get<std::vector<double>>();
      const auto rows = jt.at("rows").get<std::size_t>();
      const auto cols = jt.at("cols").get<std::size_t>();
      if (data.size() != rows * cols) throw DataError("checkpoint tensor " + name + " has wrong element count");
      *t = num::Tensor(rows, cols, std::move(data));
    }
    if (tensors.size() != c.trainable.named().size()) throw DataError("checkpoint has unexpected tensors");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid checkpoint: ") + e.what());
  }
  return c;
}

ModelParams load_model(const Checkpoint& checkpoint, const std::string& base_dir) {
  auto load_table = [&](const std::string& ref) {
    std::filesystem::path p(ref);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    std::ifstream in(p);
    if (!in) throw DataError("cannot open embedding file " + p.string() + " referenced by checkpoint");
    try {
      return graphembed::read_embedding(in).matrix();
    } catch (const std::exception& e) {
      throw DataError("embedding file " + p.string() + ": " + e.what());
    }
  };
  ModelParams params;
  params.config = checkpoint.config;
  params.trainable = checkpoint.trainable;
  params.user_table = load_table(checkpoint.refs.user_embedding);
  params.location_table = load_table(checkpoint.refs.location_embedding);

  const std::size_t d = params.config.d;
  const auto& t = params.trainable;
  auto expect = [](const num::Tensor& x, std::size_t r, std::size_t c, const std::string& name) {
    if (x.rows() != r || x.cols() != c) {
      throw DataError("checkpoint tensor " + name + " has shape " + x.shape().to_string() + ", expected (" +
                      std::to_string(r) + " x " + std::to_string(c) + ")");
    }
  };
  expect(params.user_table, params.user_table.rows(), d, "user table");
  expect(t.w_user, d, d, "w_user");
  expect(t.w_poi, d, d, "w_poi");
  expect(t.w_loc, params.location_table.cols(), d, "w_loc");
  expect(t.w_time, d, d, "w_time");
  expect(t.w_pos, d, d, "w_pos");
  expect(t.poi_table, params.location_table.rows(), d, "poi_table");
  expect(t.time_table, params.config.time_buckets, d, "time_table");
  for (const auto* layers : {&t.stc_layers, &t.ltsc_layers}) {
    for (const auto& l : *layers) {
      expect(l.attn, d, d, "attn");
      expect(l.ff1, d, d, "ff1");
      expect(l.ff2, d, d, "ff2");
      for (const auto* v : {&l.ln1_gain, &l.ln1_bias, &l.ln2_gain, &l.ln2_bias}) expect(*v, 1, d, "layer norm");
    }
  }
  if (!t.all_finite()) throw NumericalError("checkpoint contains non-finite parameters");
  return params;
}

}  // namespace nextpoi::model
