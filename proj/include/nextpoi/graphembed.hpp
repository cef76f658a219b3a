#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nextpoi/geo.hpp"
#include "nextpoi/tensor.hpp"
#include "nextpoi/types.hpp"

namespace nextpoi::graphembed {

using Node = std::uint32_t;
using Walk = std::vector<Node>;

/// Undirected weighted adjacency; each list sorted by neighbour.
struct WeightedGraph {
  std::vector<std::vector<std::pair<Node, double>>> adjacency;

  std::size_t node_count() const { return adjacency.size(); }
  bool has_edge(Node a, Node b) const;

  /// Unit-weight graph from an undirected edge list.
  static WeightedGraph from_edges(std::size_t nodes, std::span<const std::pair<Node, Node>> edges);
  /// Walk weight = edge weight in km.
  static WeightedGraph from_l2l(const geo::L2LGraph& graph);
  /// Walk weight = 1 / (1 + km), so nearer POIs are visited more often.
  static WeightedGraph from_l2l_proximity(const geo::L2LGraph& graph);
};

struct WalkConfig {
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::size_t walk_len = 80;  // nodes per walk, start included
  std::size_t walks_per_node = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

/// node2vec second-order biased walks. Walk i*|V| + v starts at node v for
/// round i. The step from (prev, cur) to x is weighted by w(cur, x) times
/// 1/p if x == prev, 1 if x is adjacent to prev, 1/q otherwise. A walk stops
/// early at a node without neighbours.
std::vector<Walk> random_walks(const WeightedGraph& graph, const WalkConfig& config);

/// A dense node -> vector table. Used for user, location and time embeddings.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t count, std::size_t dim) : vectors_(count, dim) {}
  explicit EmbeddingTable(num::Tensor vectors) : vectors_(std::move(vectors)) {}

  std::size_t dim() const { return vectors_.cols(); }
  std::size_t count() const { return vectors_.rows(); }

  /// Throws std::out_of_range for an unknown node.
  std::span<const double> lookup(std::size_t node) const;
  std::span<double> mutable_row(std::size_t node);

  const num::Tensor& matrix() const { return vectors_; }
  num::Tensor& matrix() { return vectors_; }

  bool all_finite() const { return vectors_.all_finite(); }
  bool operator==(const EmbeddingTable&) const = default;

 private:
  num::Tensor vectors_;
};

/// JSON: {"format":"nextpoi-embedding","dim":d,"count":n,"vectors":[[...],...]}
/// with row i holding node i. Doubles round-trip exactly.
void write_embedding(const EmbeddingTable& table, std::ostream& out);
EmbeddingTable read_embedding(std::istream& in);

struct SkipGramConfig {
  std::size_t dim = 256;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 1;
  double lr = 0.025;  // decays linearly to lr * 1e-4
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable table;
  /// Mean pair loss over consecutive chunks of updates (at most 1000 chunks).
  std::vector<double> loss_history;
  std::vector<Node> unseen_nodes;    // zero vectors, reported as warnings
};

/// (center, context) pairs with |i - j| <= window, j != i, in walk order.
std::vector<std::pair<Node, Node>> context_pairs(std::span<const Node> walk, std::size_t window);

/// Skip-gram with negative sampling over the walks' context pairs. Negatives
/// come from the unigram^0.75 distribution of node frequencies in the walks.
/// Returns center vectors.
SkipGramResult train_skipgram(std::span<const Walk> walks, std::size_t node_count,
                              const SkipGramConfig& config);

/// Initial center vectors: uniform in [-0.5/dim, 0.5/dim] from the seed.
EmbeddingTable initial_embedding(std::size_t node_count, std::size_t dim, std::uint64_t seed);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace nextpoi::graphembed
