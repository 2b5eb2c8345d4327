#include "tcgu/graphdata/graph.hpp"

#include <algorithm>
#include <string>

#include "tcgu/graphdata/hash.hpp"

namespace tcgu {

std::size_t AttributedGraph::num_edges() const {
  if (!adjacency) return 0;
  std::size_t diag = 0;
  for (std::size_t r = 0; r < adjacency->rows(); ++r) {
    for (std::size_t p = adjacency->row_ptr()[r]; p < adjacency->row_ptr()[r + 1]; ++p) {
      if (adjacency->col_idx()[p] == r) ++diag;
    }
  }
  return (adjacency->nnz() - diag) / 2;
}

std::vector<std::size_t> AttributedGraph::nodes_in(const Mask& m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) out.push_back(i);
  }
  return out;
}

std::vector<int> AttributedGraph::labels_of(std::span<const std::size_t> nodes) const {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (std::size_t i : nodes) out.push_back(labels.at(i));
  return out;
}

std::vector<Edge> AttributedGraph::edges() const {
  std::vector<Edge> out;
  const auto& rp = adjacency->row_ptr();
  const auto& ci = adjacency->col_idx();
  for (std::uint32_t u = 0; u < adjacency->rows(); ++u) {
    for (std::size_t p = rp[u]; p < rp[u + 1]; ++p) {
      if (ci[p] > u) out.emplace_back(u, ci[p]);
    }
  }
  return out;
}

bool AttributedGraph::has_edge(std::uint32_t u, std::uint32_t v) const {
  const auto& rp = adjacency->row_ptr();
  const auto first = adjacency->col_idx().begin() + static_cast<std::ptrdiff_t>(rp[u]);
  const auto last = adjacency->col_idx().begin() + static_cast<std::ptrdiff_t>(rp[u + 1]);
  return std::binary_search(first, last, v);
}

void AttributedGraph::validate(bool require_train_classes) const {
  const std::size_t n = num_nodes();
  auto fail = [](const std::string& what) { throw ValidationError("invalid graph: " + what); };
  if (!adjacency) fail("missing adjacency");
  if (adjacency->rows() != n || adjacency->cols() != n) fail("adjacency is not N x N");
  if (features.rows() != n) fail("feature row count differs from node count");
  if (!features.all_finite()) fail("non-finite feature value");
  if (num_classes <= 0) fail("no classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) fail("label " + std::to_string(y) + " outside 0..C-1");
  }
  if (!adjacency->is_symmetric()) fail("adjacency is not symmetric");
  const auto& rp = adjacency->row_ptr();
  const auto& ci = adjacency->col_idx();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t p = rp[r]; p < rp[r + 1]; ++p) {
      if (ci[p] == r && adjacency->values()[p] != 0.0) fail("self-loop at node " + std::to_string(r));
      if (adjacency->values()[p] < 0.0) fail("negative edge weight");
    }
  }
  for (const Mask* m : {&train, &val, &test}) {
    if (!m->empty() && m->size() != n) fail("mask length differs from node count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int hits = (!train.empty() && train[i]) + (!val.empty() && val[i]) + (!test.empty() && test[i]);
    if (hits > 1) fail("masks overlap at node " + std::to_string(i));
  }
  if (!original_ids.empty() && original_ids.size() != n) fail("original_ids length mismatch");
  if (require_train_classes) {
    std::vector<char> seen(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t i : train_nodes()) seen[static_cast<std::size_t>(labels[i])] = 1;
    for (int c = 0; c < num_classes; ++c) {
      if (!seen[static_cast<std::size_t>(c)]) fail("class " + std::to_string(c) + " absent from train mask");
    }
  }
}

std::shared_ptr<const CsrMatrix> adjacency_from_edges(std::size_t n, std::span<const Edge> edges) {
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) {
      throw ValidationError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ") references a node outside 0.." + std::to_string(n - 1));
    }
    if (u == v) continue;
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
  std::vector<Triplet> t;
  t.reserve(canon.size() * 2);
  for (auto [u, v] : canon) {
    t.push_back({u, v, 1.0});
    t.push_back({v, u, 1.0});
  }
  return std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(n, n, std::move(t)));
}

AttributedGraph make_graph(std::size_t n, std::span<const Edge> edges, Tensor features,
                           std::vector<int> labels, int num_classes) {
  if (labels.size() != n) throw ValidationError("label count differs from node count");
  AttributedGraph g;
  g.adjacency = adjacency_from_edges(n, edges);
  g.features = std::move(features);
  if (num_classes < 0) {
    num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }
  g.labels = std::move(labels);
  g.num_classes = num_classes;
  g.original_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.original_ids[i] = static_cast<std::uint32_t>(i);
  g.validate();
  return g;
}

std::uint64_t content_hash(const AttributedGraph& g) {
  Fnv1a h;
  h.add<std::uint64_t>(g.num_nodes());
  h.add(std::span<const std::size_t>(g.adjacency->row_ptr()));
  h.add(std::span<const std::uint32_t>(g.adjacency->col_idx()));
  h.add(std::span<const double>(g.adjacency->values()));
  h.add(g.features);
  h.add(std::span<const int>(g.labels));
  h.add<std::int32_t>(g.num_classes);
  h.add(std::span<const std::uint8_t>(g.train));
  h.add(std::span<const std::uint8_t>(g.val));
  h.add(std::span<const std::uint8_t>(g.test));
  return h.value();
}

}  // namespace tcgu
