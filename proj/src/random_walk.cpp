#include <algorithm>
#include <stdexcept>

#include "nextpoi/graphembed.hpp"
#include "nextpoi/rng.hpp"

namespace nextpoi::graphembed {

namespace {

std::size_t pick_weighted(std::span<const double> weights, double total, Rng& rng) {
  if (!(total > 0.0)) return uniform_index(rng, weights.size());
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  // Rounding left target >= acc; take the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace

bool WeightedGraph::has_edge(Node a, Node b) const {
  const auto& adj = adjacency.at(a);
  const auto it = std::lower_bound(adj.begin(), adj.end(), b,
                                   [](const auto& e, Node n) { return e.first < n; });
  return it != adj.end() && it->first == b;
}

WeightedGraph WeightedGraph::from_edges(std::size_t nodes,
                                        std::span<const std::pair<Node, Node>> edges) {
  WeightedGraph g;
  g.adjacency.resize(nodes);
  for (const auto& [a, b] : edges) {
    if (a >= nodes || b >= nodes) throw std::out_of_range("WeightedGraph: edge endpoint out of range");
    if (a == b) continue;
    g.adjacency[a].emplace_back(b, 1.0);
    g.adjacency[b].emplace_back(a, 1.0);
  }
  for (auto& adj : g.adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end(),
                          [](const auto& x, const auto& y) { return x.first == y.first; }),
              adj.end());
  }
  return g;
}

WeightedGraph WeightedGraph::from_l2l(const geo::L2LGraph& graph) {
  WeightedGraph g;
  g.adjacency.resize(graph.node_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    for (const auto& nb : graph.adjacency[i]) g.adjacency[i].emplace_back(nb.poi.value, nb.km);
  }
  return g;
}

WeightedGraph WeightedGraph::from_l2l_proximity(const geo::L2LGraph& graph) {
  auto g = from_l2l(graph);
  for (auto& adj : g.adjacency) {
    for (auto& [n, w] : adj) w = 1.0 / (1.0 + w);
  }
  return g;
}

void WalkConfig::validate() const {
  if (!(p > 0.0) || !(q > 0.0)) throw std::invalid_argument("node2vec p and q must be > 0");
  if (walk_len < 1 || walks_per_node < 1) {
    throw std::invalid_argument("walk_len and walks_per_node must be >= 1");
  }
}

std::vector<Walk> random_walks(const WeightedGraph& graph, const WalkConfig& config) {
  config.validate();
  const std::size_t n = graph.node_count();
  if (n == 0) throw std::invalid_argument("random_walks: empty graph");
  std::vector<Walk> walks(n * config.walks_per_node);
  std::vector<double> weights;
  for (std::size_t round = 0; round < config.walks_per_node; ++round) {
    for (std::size_t start = 0; start < n; ++start) {
      Rng rng(derive_seed(config.seed, {start, round}));
      Walk& walk = walks[round * n + start];
      walk.reserve(config.walk_len);
      walk.push_back(static_cast<Node>(start));
      while (walk.size() < config.walk_len) {
        const Node cur = walk.back();
        const auto& adj = graph.adjacency[cur];
        if (adj.empty()) break;
        weights.resize(adj.size());
        double total = 0.0;
        for (std::size_t i = 0; i < adj.size(); ++i) {
          const auto [x, w] = adj[i];
          double bias = 1.0;
          if (walk.size() >= 2) {
            const Node prev = walk[walk.size() - 2];
            if (x == prev) {
              bias = 1.0 / config.p;
            } else if (!graph.has_edge(prev, x)) {
              bias = 1.0 / config.q;
            }
          }
          weights[i] = w * bias;
          total += weights[i];
        }
        walk.push_back(adj[pick_weighted(weights, total, rng)].first);
      }
    }
  }
  return walks;
}

}  // namespace nextpoi::graphembed
