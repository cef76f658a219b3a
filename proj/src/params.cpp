#include <cmath>
#include <stdexcept>
#include <string>

#include "nextpoi/model.hpp"
#include "nextpoi/rng.hpp"

namespace nextpoi::model {

namespace {

template <class Self, class Ptr>
std::vector<std::pair<std::string, Ptr>> list_tensors(Self& self) {
  std::vector<std::pair<std::string, Ptr>> out{
      {"w_user", &self.w_user},         {"w_poi", &self.w_poi},
      {"w_loc", &self.w_loc},           {"w_time", &self.w_time},
      {"w_pos", &self.w_pos},           {"poi_table", &self.poi_table},
      {"time_table", &self.time_table},
  };
  auto add_layers = [&](auto& layers, const std::string& prefix) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const std::string p = prefix + "." + std::to_string(k) + ".";
      auto& l = layers[k];
      out.emplace_back(p + "attn", &l.attn);
      out.emplace_back(p + "ff1", &l.ff1);
      out.emplace_back(p + "ff2", &l.ff2);
      out.emplace_back(p + "ln1_gain", &l.ln1_gain);
      out.emplace_back(p + "ln1_bias", &l.ln1_bias);
      out.emplace_back(p + "ln2_gain", &l.ln2_gain);
      out.emplace_back(p + "ln2_bias", &l.ln2_bias);
    }
  };
  add_layers(self.stc_layers, "stc");
  add_layers(self.ltsc_layers, "ltsc");
  return out;
}

num::Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  num::Tensor t(rows, cols);
  for (auto& v : t.data()) v = (2.0 * uniform01(rng) - 1.0) * bound;
  return t;
}

LayerParams init_layer(std::size_t d, Rng& rng) {
  LayerParams l;
  l.attn = xavier(d, d, rng);
  l.ff1 = xavier(d, d, rng);
  l.ff2 = xavier(d, d, rng);
  l.ln1_gain = num::Tensor(1, d, 1.0);
  l.ln1_bias = num::Tensor(1, d, 0.0);
  l.ln2_gain = num::Tensor(1, d, 1.0);
  l.ln2_bias = num::Tensor(1, d, 0.0);
  return l;
}

}  // namespace

std::vector<std::pair<std::string, num::Tensor*>> Trainable::named() {
  return list_tensors<Trainable, num::Tensor*>(*this);
}

std::vector<std::pair<std::string, const num::Tensor*>> Trainable::named() const {
  return list_tensors<const Trainable, const num::Tensor*>(*this);
}

Trainable Trainable::zeros_like() const {
  Trainable z = *this;
  for (auto& [name, t] : z.named()) t->fill(0.0);
  return z;
}

double Trainable::squared_norm() const {
  double s = 0.0;
  for (const auto& [name, t] : named()) s += t->squared_norm();
  return s;
}

bool Trainable::all_finite() const {
  for (const auto& [name, t] : named()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

std::size_t Trainable::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

void Trainable::add_scaled(const Trainable& other, double s) {
  auto mine = named();
  const auto theirs = other.named();
  if (mine.size() != theirs.size()) throw std::invalid_argument("add_scaled: layer count mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    auto& a = *mine[i].second;
    const auto& b = *theirs[i].second;
    if (a.shape() != b.shape()) {
      throw std::invalid_argument("add_scaled: " + mine[i].first + " shape " + a.shape().to_string() +
                                  " vs " + b.shape().to_string());
    }
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += s * b[j];
  }
}

ModelParams init_params(const ModelConfig& config, num::Tensor user_table,
                        num::Tensor location_table, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.d;
  if (user_table.cols() != d) {
    throw std::invalid_argument("user embedding width " + std::to_string(user_table.cols()) +
                                " must equal model d " + std::to_string(d));
  }
  if (location_table.rows() == 0 || location_table.cols() == 0) {
    throw std::invalid_argument("location embedding table is empty");
  }
  ModelParams p;
  p.config = config;
  Rng rng(derive_seed(seed, {0x9a7a}));
  auto& t = p.trainable;
  t.w_user = xavier(d, d, rng);
  t.w_poi = xavier(d, d, rng);
  t.w_loc = xavier(location_table.cols(), d, rng);
  t.w_time = xavier(d, d, rng);
  t.w_pos = xavier(d, d, rng);
  t.poi_table = xavier(location_table.rows(), d, rng);
  t.time_table = xavier(config.time_buckets, d, rng);
  for (std::size_t k = 0; k < config.layers; ++k) t.stc_layers.push_back(init_layer(d, rng));
  for (std::size_t k = 0; k < config.layers; ++k) t.ltsc_layers.push_back(init_layer(d, rng));
  p.user_table = std::move(user_table);
  p.location_table = std::move(location_table);
  return p;
}

}  // namespace nextpoi::model
