#pragma once
// Undirected attributed graph with node labels and train/val/test masks.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tcgu/numerics/sparse.hpp"
#include "tcgu/numerics/tensor.hpp"

namespace tcgu {

/// Malformed input file; the message carries file and line context.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Mask = std::vector<std::uint8_t>;
using Edge = std::pair<std::uint32_t, std::uint32_t>;

struct AttributedGraph {
  /// Symmetric, zero diagonal, non-negative.
  std::shared_ptr<const CsrMatrix> adjacency;
  Tensor features;
  std::vector<int> labels;
  int num_classes = 0;
  Mask train, val, test;
  /// original_ids[i] is the id node i had in the graph this one was derived
  /// from by node deletion (identity for loaded graphs).
  std::vector<std::uint32_t> original_ids;
  /// Hash of the source graph and split; survives deletions so derived
  /// graphs can be matched against checkpoints built from their source.
  std::uint64_t lineage = 0;

  std::size_t num_nodes() const noexcept { return labels.size(); }
  std::size_t num_features() const noexcept { return features.cols(); }
  /// Undirected edge count.
  std::size_t num_edges() const;

  std::vector<std::size_t> train_nodes() const { return nodes_in(train); }
  std::vector<std::size_t> val_nodes() const { return nodes_in(val); }
  std::vector<std::size_t> test_nodes() const { return nodes_in(test); }
  std::vector<std::size_t> nodes_in(const Mask& m) const;

  /// Labels of the given nodes.
  std::vector<int> labels_of(std::span<const std::size_t> nodes) const;
  /// Undirected edges (u < v).
  std::vector<Edge> edges() const;
  bool has_edge(std::uint32_t u, std::uint32_t v) const;

  /// Throws ValidationError when any structural invariant is broken. Class
  /// coverage of the train mask is only checked when `require_train_classes`.
  void validate(bool require_train_classes = false) const;
};

/// Builds a graph from an undirected edge list; edges may be given in either
/// or both directions. Masks start empty.
AttributedGraph make_graph(std::size_t n, std::span<const Edge> edges, Tensor features,
                           std::vector<int> labels, int num_classes = -1);

/// Symmetric CSR adjacency with unit weights.
std::shared_ptr<const CsrMatrix> adjacency_from_edges(std::size_t n, std::span<const Edge> edges);

/// FNV-1a over structure, features, labels and masks.
std::uint64_t content_hash(const AttributedGraph& g);

}  // namespace tcgu
