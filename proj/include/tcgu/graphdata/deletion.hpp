#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "tcgu/graphdata/graph.hpp"

namespace tcgu {

enum class DeletionKind { kNode, kEdge, kFeature };

DeletionKind parse_deletion_kind(std::string_view name);
std::string_view to_string(DeletionKind kind);

struct DeletionRequest {
  DeletionKind kind = DeletionKind::kNode;
  /// Target nodes for node and feature requests, sorted.
  std::vector<std::uint32_t> nodes;
  /// Target edges (u < v) for edge requests, sorted.
  std::vector<Edge> edges;
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

/// Node and feature kinds draw floor(ratio * |train|) train nodes. The edge
/// kind draws floor(ratio * M) edges among those with a train endpoint.
DeletionRequest sample_deletion(const AttributedGraph& graph, DeletionKind kind, double ratio,
                                std::uint64_t seed);

/// Same as sample_deletion but with an explicit target count.
DeletionRequest sample_deletion_count(const AttributedGraph& graph, DeletionKind kind,
                                      std::size_t count, std::uint64_t seed);

/// Returns the remaining graph; `graph` is not modified. Node deletion drops
/// incident edges and compacts ids (original_ids tracks the mapping). Edge
/// and feature deletion are idempotent.
AttributedGraph apply_deletion(const AttributedGraph& graph, const DeletionRequest& request);

struct EdgeInjection {
  AttributedGraph corrupted;
  /// Injected edges (u < v), sorted; every one joins two different classes.
  std::vector<Edge> edges;
};

/// Adds floor(ratio * M) new cross-class edges, ratio in (0, 1].
EdgeInjection inject_adversarial_edges(const AttributedGraph& graph, double ratio,
                                       std::uint64_t seed);

}  // namespace tcgu
