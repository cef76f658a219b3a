#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "nextpoi/graphembed.hpp"
#include "nextpoi/ops.hpp"
#include "nextpoi/rng.hpp"

namespace nextpoi::graphembed {

std::vector<std::pair<Node, Node>> context_pairs(std::span<const Node> walk, std::size_t window) {
  std::vector<std::pair<Node, Node>> pairs;
  for (std::size_t i = 0; i < walk.size(); ++i) {
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(walk.size() - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i) pairs.emplace_back(walk[i], walk[j]);
    }
  }
  return pairs;
}

EmbeddingTable initial_embedding(std::size_t node_count, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be >= 1");
  EmbeddingTable table(node_count, dim);
  Rng rng(derive_seed(seed, {0x1417}));
  const double half = 0.5 / static_cast<double>(dim);
  for (auto& v : table.matrix().data()) v = (2.0 * uniform01(rng) - 1.0) * half;
  return table;
}

SkipGramResult train_skipgram(std::span<const Walk> walks, std::size_t node_count,
                              const SkipGramConfig& config) {
  if (walks.empty()) throw std::invalid_argument("train_skipgram: no walks");
  if (config.window < 1) throw std::invalid_argument("train_skipgram: window must be >= 1");

  SkipGramResult result;
  result.table = initial_embedding(node_count, config.dim, config.seed);
  const std::size_t dim = config.dim;

  std::vector<std::uint64_t> freq(node_count, 0);
  for (const auto& w : walks) {
    for (auto n : w) {
      if (n >= node_count) throw std::out_of_range("train_skipgram: walk node out of range");
      ++freq[n];
    }
  }
  std::vector<double> cumulative(node_count);
  double total_weight = 0.0;
  for (std::size_t i = 0; i < node_count; ++i) {
    total_weight += std::pow(static_cast<double>(freq[i]), 0.75);
    cumulative[i] = total_weight;
  }

  std::size_t pairs_per_epoch = 0;
  for (const auto& w : walks) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::size_t lo = i >= config.window ? i - config.window : 0;
      const std::size_t hi = std::min(w.size() - 1, i + config.window);
      pairs_per_epoch += hi - lo;
    }
  }
  const std::size_t total_steps = pairs_per_epoch * config.epochs;
  const std::size_t chunk = std::max<std::size_t>(1, (total_steps + 999) / 1000);

  auto& center = result.table.matrix();
  num::Tensor context(node_count, dim);
  std::vector<double> grad_h(dim);
  Rng rng(derive_seed(config.seed, {0x5e9}));

  auto sample_negative = [&]() -> Node {
    const double target = uniform01(rng) * total_weight;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    return static_cast<Node>(std::min<std::size_t>(it - cumulative.begin(), node_count - 1));
  };

  std::size_t step = 0;
  double chunk_loss = 0.0;
  std::size_t chunk_count = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && total_weight > 0.0; ++epoch) {
    for (const auto& w : walks) {
      for (const auto& [c, ctx] : context_pairs(w, config.window)) {
        const double lr = config.lr * std::max(1e-4, 1.0 - static_cast<double>(step) /
                                                              static_cast<double>(total_steps));
        auto h = center.row_span(c);
        std::fill(grad_h.begin(), grad_h.end(), 0.0);
        double loss = 0.0;
        for (std::size_t s = 0; s <= config.negatives; ++s) {
          Node target = ctx;
          double label = 1.0;
          if (s > 0) {
            target = sample_negative();
            if (target == ctx) continue;
            label = 0.0;
          }
          auto out = context.row_span(target);
          double score = 0.0;
          for (std::size_t k = 0; k < dim; ++k) score += h[k] * out[k];
          loss += label > 0.0 ? num::softplus(-score) : num::softplus(score);
          const double g = (label - num::sigmoid(score)) * lr;
          for (std::size_t k = 0; k < dim; ++k) {
            grad_h[k] += g * out[k];
            out[k] += g * h[k];
          }
        }
        for (std::size_t k = 0; k < dim; ++k) h[k] += grad_h[k];
        chunk_loss += loss;
        ++chunk_count;
        ++step;
        if (chunk_count == chunk) {
          result.loss_history.push_back(chunk_loss / static_cast<double>(chunk_count));
          chunk_loss = 0.0;
          chunk_count = 0;
        }
      }
    }
  }
  if (chunk_count > 0) result.loss_history.push_back(chunk_loss / static_cast<double>(chunk_count));

  for (std::size_t i = 0; i < node_count; ++i) {
    if (freq[i] == 0) {
      auto row = center.row_span(i);
      std::fill(row.begin(), row.end(), 0.0);
      result.unseen_nodes.push_back(static_cast<Node>(i));
    }
  }
  if (!result.unseen_nodes.empty()) {
    spdlog::warn("skip-gram: {} node(s) never appear in any walk; using zero vectors",
                 result.unseen_nodes.size());
  }
  return result;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace nextpoi::graphembed
