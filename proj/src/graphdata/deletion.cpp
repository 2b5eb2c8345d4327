#include "tcgu/graphdata/deletion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <unordered_set>

namespace tcgu {
namespace {

std::uint64_t edge_key(std::uint32_t u, std::uint32_t v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

template <typename T>
std::vector<T> draw(std::vector<T> pool, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void check_node(const AttributedGraph& g, std::uint32_t v) {
  if (v >= g.num_nodes()) {
    throw ValidationError("deletion target node " + std::to_string(v) + " does not exist (N=" +
                          std::to_string(g.num_nodes()) + ")");
  }
}

}  // namespace

DeletionKind parse_deletion_kind(std::string_view name) {
  if (name == "node") return DeletionKind::kNode;
  if (name == "edge") return DeletionKind::kEdge;
  if (name == "feature") return DeletionKind::kFeature;
  throw ValidationError("unknown deletion kind '" + std::string(name) + "' (node|edge|feature)");
}

std::string_view to_string(DeletionKind kind) {
  switch (kind) {
    case DeletionKind::kNode: return "node";
    case DeletionKind::kEdge: return "edge";
    case DeletionKind::kFeature: return "feature";
  }
  return "?";
}

DeletionRequest sample_deletion_count(const AttributedGraph& graph, DeletionKind kind,
                                      std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("deletion request has no targets");
  DeletionRequest req;
  req.kind = kind;
  req.seed = seed;
  if (kind == DeletionKind::kEdge) {
    std::vector<Edge> pool;
    for (const Edge& e : graph.edges()) {
      if (graph.train[e.first] || graph.train[e.second]) pool.push_back(e);
    }
    if (count > pool.size()) {
      throw ValidationError("requested " + std::to_string(count) + " edge targets but only " +
                            std::to_string(pool.size()) + " edges touch the train set");
    }
    req.edges = draw(std::move(pool), count, seed);
  } else {
    std::vector<std::uint32_t> pool;
    for (std::size_t i : graph.train_nodes()) pool.push_back(static_cast<std::uint32_t>(i));
    if (count > pool.size()) {
      throw ValidationError("requested " + std::to_string(count) + " node targets but the train set has " +
                            std::to_string(pool.size()));
    }
    req.nodes = draw(std::move(pool), count, seed);
  }
  return req;
}

DeletionRequest sample_deletion(const AttributedGraph& graph, DeletionKind kind, double ratio,
                                std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("deletion ratio must lie in (0, 1)");
  const double base = kind == DeletionKind::kEdge ? static_cast<double>(graph.num_edges())
                                                  : static_cast<double>(graph.train_nodes().size());
  const auto count = static_cast<std::size_t>(std::floor(ratio * base));
  if (count == 0) throw ValidationError("deletion ratio yields zero targets");
  DeletionRequest req = sample_deletion_count(graph, kind, count, seed);
  req.ratio = ratio;
  return req;
}

AttributedGraph apply_deletion(const AttributedGraph& graph, const DeletionRequest& request) {
  AttributedGraph out;
  switch (request.kind) {
    case DeletionKind::kFeature: {
      out = graph;
      for (std::uint32_t v : request.nodes) {
        check_node(graph, v);
        for (double& x : out.features.row(v)) x = 0.0;
      }
      break;
    }
    case DeletionKind::kEdge: {
      std::unordered_set<std::uint64_t> drop;
      for (auto [u, v] : request.edges) {
        check_node(graph, u);
        check_node(graph, v);
        drop.insert(edge_key(u, v));
      }
      const CsrMatrix& a = *graph.adjacency;
      std::vector<Triplet> kept;
      for (std::uint32_t r = 0; r < a.rows(); ++r) {
        for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) {
          if (!drop.count(edge_key(r, a.col_idx()[p]))) kept.push_back({r, a.col_idx()[p], a.values()[p]});
        }
      }
      out = graph;
      out.adjacency = std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(a.rows(), a.cols(), std::move(kept)));
      break;
    }
    case DeletionKind::kNode: {
      const std::size_t n = graph.num_nodes();
      std::vector<char> removed(n, 0);
      for (std::uint32_t v : request.nodes) {
        check_node(graph, v);
        removed[v] = 1;
      }
      constexpr auto kGone = static_cast<std::uint32_t>(-1);
      std::vector<std::uint32_t> remap(n, kGone);
      std::uint32_t next = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!removed[i]) remap[i] = next++;
      }
      const CsrMatrix& a = *graph.adjacency;
      std::vector<Triplet> kept;
      for (std::uint32_t r = 0; r < n; ++r) {
        if (removed[r]) continue;
        for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) {
          const std::uint32_t c = a.col_idx()[p];
          if (!removed[c]) kept.push_back({remap[r], remap[c], a.values()[p]});
        }
      }
      out.adjacency = std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(next, next, std::move(kept)));
      out.features = Tensor(next, graph.num_features());
      out.num_classes = graph.num_classes;
      out.lineage = graph.lineage;
      auto keep_mask = [&](const Mask& m) {
        Mask r;
        if (m.empty()) return r;
        for (std::size_t i = 0; i < n; ++i) {
          if (!removed[i]) r.push_back(m[i]);
        }
        return r;
      };
      out.train = keep_mask(graph.train);
      out.val = keep_mask(graph.val);
      out.test = keep_mask(graph.test);
      for (std::size_t i = 0; i < n; ++i) {
        if (removed[i]) continue;
        const auto src = graph.features.row(i);
        std::copy(src.begin(), src.end(), out.features.row(remap[i]).begin());
        out.labels.push_back(graph.labels[i]);
        out.original_ids.push_back(graph.original_ids.empty() ? static_cast<std::uint32_t>(i)
                                                              : graph.original_ids[i]);
      }
      break;
    }
  }
  return out;
}

EdgeInjection inject_adversarial_edges(const AttributedGraph& graph, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("attack ratio must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(graph.num_edges())));
  if (count == 0) throw ValidationError("attack ratio yields zero injected edges");
  const std::size_t n = graph.num_nodes();

  std::vector<double> per_class(static_cast<std::size_t>(graph.num_classes), 0.0);
  for (int y : graph.labels) per_class[static_cast<std::size_t>(y)] += 1.0;
  double cross_pairs = static_cast<double>(n) * static_cast<double>(n);
  for (double c : per_class) cross_pairs -= c * c;
  cross_pairs /= 2.0;
  for (const Edge& e : graph.edges()) {
    if (graph.labels[e.first] != graph.labels[e.second]) cross_pairs -= 1.0;
  }
  if (static_cast<double>(count) > cross_pairs) {
    throw ValidationError("only " + std::to_string(static_cast<long long>(cross_pairs)) +
                          " cross-class non-edges available, " + std::to_string(count) + " requested");
  }

  std::mt19937_64 rng(seed);
  std::set<Edge> chosen;
  const bool dense_regime = static_cast<double>(count) * 4.0 > cross_pairs;
  if (!dense_regime) {
    std::uniform_int_distribution<std::uint32_t> node(0, static_cast<std::uint32_t>(n - 1));
    while (chosen.size() < count) {
      std::uint32_t u = node(rng), v = node(rng);
      if (graph.labels[u] == graph.labels[v] || graph.has_edge(u, v)) continue;
      chosen.emplace(std::min(u, v), std::max(u, v));
    }
  } else {
    std::vector<Edge> pool;
    for (std::uint32_t u = 0; u < n; ++u) {
      for (std::uint32_t v = u + 1; v < n; ++v) {
        if (graph.labels[u] != graph.labels[v] && !graph.has_edge(u, v)) pool.emplace_back(u, v);
      }
    }
    for (const Edge& e : draw(std::move(pool), count, seed)) chosen.insert(e);
  }

  EdgeInjection out{graph, {chosen.begin(), chosen.end()}};
  const CsrMatrix& a = *graph.adjacency;
  std::vector<Triplet> t;
  for (std::uint32_t r = 0; r < a.rows(); ++r) {
    for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) t.push_back({r, a.col_idx()[p], a.values()[p]});
  }
  for (auto [u, v] : out.edges) {
    t.push_back({u, v, 1.0});
    t.push_back({v, u, 1.0});
  }
  out.corrupted.adjacency = std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(n, n, std::move(t)));
  return out;
}

}  // namespace tcgu
