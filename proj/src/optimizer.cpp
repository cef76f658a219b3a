#include <cmath>
#include <stdexcept>
#include <string>

#include "nextpoi/ops.hpp"
#include "nextpoi/train.hpp"

namespace nextpoi::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (negatives == 0) fail("negatives must be >= 1");
  if (!(lr0 > 0.0)) fail("lr0 must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) fail("decay must be in (0, 1]");
  if (decay_steps == 0) fail("decay_steps must be >= 1");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(popularity_exponent >= 0.0)) fail("popularity_exponent must be >= 0");
  if (threads == 0) fail("threads must be >= 1");
}

double learning_rate(const TrainConfig& config, std::uint64_t step) {
  const auto periods = static_cast<double>(step / config.decay_steps);
  return config.lr0 * std::pow(config.decay, periods);
}

double bpr_pair_loss(double o_pos, double o_neg) { return num::softplus(o_neg - o_pos); }

double bpr_pair_grad(double margin) { return -num::sigmoid(-margin); }

Adam::Adam(const Trainable& like) : m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(Trainable& params, const Trainable& grads, double lr) {
  auto p = params.named();
  const auto g = grads.named();
  auto m = m_.named();
  auto v = v_.named();
  if (p.size() != g.size() || p.size() != m.size()) {
    throw std::invalid_argument("Adam::step: parameter structure mismatch");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p[i].second->shape() != g[i].second->shape()) {
      throw std::invalid_argument("Adam::step: " + p[i].first + " shape " + p[i].second->shape().to_string() +
                                  " vs gradient " + g[i].second->shape().to_string());
    }
    if (!g[i].second->all_finite()) {
      throw NumericalError("non-finite gradient in " + g[i].first + " at step " + std::to_string(t_ + 1));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& pt = *p[i].second;
    const auto& gt = *g[i].second;
    auto& mt = *m[i].second;
    auto& vt = *v[i].second;
    for (std::size_t j = 0; j < pt.size(); ++j) {
      mt[j] = kBeta1 * mt[j] + (1.0 - kBeta1) * gt[j];
      vt[j] = kBeta2 * vt[j] + (1.0 - kBeta2) * gt[j] * gt[j];
      pt[j] -= lr * (mt[j] / c1) / (std::sqrt(vt[j] / c2) + kEps);
    }
  }
}

}  // namespace nextpoi::train
