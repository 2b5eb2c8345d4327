#pragma once
// Two-level alignment condensation: a small synthetic graph whose class-wise
// multi-hop feature statistics and teacher logits match the original graph.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tcgu/gnn/gnn.hpp"
#include "tcgu/graphdata/binary.hpp"
#include "tcgu/graphdata/graph.hpp"
#include "tcgu/numerics/autodiff.hpp"

namespace tcgu {

struct CondenseConfig {
  double r_cond = 0.05;
  std::size_t hops = 2;
  double w_loop = 1.0;
  double lambda_c = 0.01;
  double lambda_f = 100.0;
  std::size_t steps = 1500;
  /// Feature steps, then topology steps, per alternation period.
  std::size_t tau1 = 10;
  std::size_t tau2 = 1;
  double eta1 = 0.005;
  double eta2 = 0.001;
  double delta = 0.05;
  std::size_t mlp_hidden = 128;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t fingerprint() const;
};

/// Pairwise topology MLP, three linear layers. The first layer acting on
/// [x_i; x_j] is stored split as W1a (for x_i) and W1b (for x_j).
/// params = [W1a, W1b, b1, W2, b2, W3, b3].
struct TopologyMlp {
  std::vector<Tensor> params;

  /// `output_bias` is the initial value of b3, i.e. logit of the typical
  /// edge weight.
  static TopologyMlp init(std::size_t features, std::size_t hidden, std::uint64_t seed, double output_bias = 0.0);
  std::size_t features() const { return params.at(0).rows(); }
  std::size_t hidden() const { return params.at(0).cols(); }
};

/// A'_ij = sigmoid((MLP([x_i;x_j]) + MLP([x_j;x_i])) / 2).
ad::Var topology_from_features(std::span<const ad::Var> phi, const ad::Var& x);
Tensor topology_from_features(const TopologyMlp& phi, const Tensor& x);

/// max(0, a - delta) entrywise.
Tensor sparsify(const Tensor& a, double delta);

struct CondensedGraph {
  Tensor features;
  TopologyMlp phi;
  std::vector<int> labels;
  int num_classes = 0;
  double delta = 0.05;
  double w_loop = 1.0;
  /// Sparsified adjacency used downstream.
  Tensor adjacency;
  /// Lineage of the graph this was condensed from.
  std::uint64_t source_lineage = 0;
  std::uint64_t config_fingerprint = 0;

  std::size_t num_nodes() const { return features.rows(); }
  std::size_t num_features() const { return features.cols(); }
  /// Recomputes the sparsified adjacency from the current features and Phi.
  void refresh_adjacency();
  std::vector<std::size_t> class_histogram() const;
  /// Every node is a training node; no validation rows.
  TrainData train_data(double gnn_w_loop = 1.0) const;
};

/// N' = max(C, round(r_cond * |train|)).
std::size_t condensed_size(std::size_t train_nodes, int num_classes, double r_cond);
/// Per-class counts summing to total, proportional to the histogram by
/// largest remainder, every class at least one.
std::vector<std::size_t> allocate_classes(std::span<const std::size_t> histogram, std::size_t total);

CondensedGraph init_condensed(const AttributedGraph& g, const CondenseConfig& config);

/// [H^(0), ..., H^(K)] with H^(k) = P H^(k-1).
std::vector<ad::Var> propagate(const Propagator& prop, const ad::Var& x, std::size_t hops);

/// Per-hop, per-class first and second moments. Covariances are kept in
/// factored form (centred rows) because F x F matrices are too large at
/// realistic widths; covariance() materialises one on demand.
struct ClassStats {
  std::size_t hops = 0;
  int num_classes = 0;
  std::size_t features = 0;
  std::vector<std::size_t> counts;
  /// Node share of each class among the rows summarised.
  std::vector<double> ratios;
  /// Indexed [k * C + c].
  std::vector<ad::Var> means;
  /// Centred rows; empty Var for single-node classes (zero covariance).
  std::vector<ad::Var> centered;
  /// ||U||_F^2 as a 1x1 Var.
  std::vector<ad::Var> cov_norm2;

  std::size_t index(std::size_t k, int c) const { return k * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(c); }
  const ad::Var& mean(std::size_t k, int c) const { return means[index(k, c)]; }
  Tensor covariance(std::size_t k, int c) const;
};

/// Statistics over the given rows (labels are indexed by node).
ClassStats class_stats(std::span<const ad::Var> hops, std::span<const int> labels,
                       std::span<const std::size_t> rows, int num_classes);
ClassStats class_stats(std::span<const ad::Var> hops, std::span<const int> labels, int num_classes);

/// Sum_k Sum_c r_c ||mu - mu'||^2 with r_c from `real`.
ad::Var mean_alignment_loss(const ClassStats& real, const ClassStats& cond);
/// Sum_k Sum_c r_c ||U - U'||_F^2. Condensed classes with a single node are
/// skipped.
ad::Var covariance_alignment_loss(const ClassStats& real, const ClassStats& cond);
ad::Var feature_alignment_loss(const ClassStats& real, const ClassStats& cond, double lambda_c);

/// Cross-entropy of the frozen teacher on the condensed graph.
ad::Var logits_alignment_loss(const GnnModel& teacher, const ad::Var& adjacency, const ad::Var& x,
                              std::span<const int> labels);

struct CondenseResult {
  CondensedGraph graph;
  std::vector<double> losses;
};

/// Called once per step with the dense pre-sparsification adjacency of that
/// step and the loss.
using CondenseHook = std::function<void(std::size_t step, const Tensor& adjacency, double loss)>;

CondenseResult condense(const AttributedGraph& g, const GnnModel& teacher, const CondenseConfig& config,
                        const CondenseHook& hook = {});

inline constexpr std::string_view kCondensedTag = "COND";
Section encode_condensed(const CondensedGraph& c);
CondensedGraph decode_condensed(const Section& s);

}  // namespace tcgu
