#pragma once
// Utility, membership-inference and edge-attack evaluation of unlearned
// models.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tcgu/gnn/gnn.hpp"
#include "tcgu/graphdata/graph.hpp"
#include "tcgu/pipeline/pipeline.hpp"

namespace tcgu {

/// Micro-F1 on the test nodes of `graph`, with inference over its own
/// topology. Throws ValidationError when the test mask is empty.
double utility_report(const GnnModel& model, const AttributedGraph& graph);

/// Row-wise softmax of the model's logits on `graph`.
Tensor posteriors(const GnnModel& model, const AttributedGraph& graph);

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// count one half. `labels` are 1 for positives, 0 for negatives.
double auc_score(std::span<const double> scores, std::span<const int> labels);

/// Attack features of one node per row: both posteriors sorted in
/// descending order, their difference and its L2 norm (width 3C + 1).
/// Sorting makes the features class-agnostic confidence profiles.
Tensor mia_features(const Tensor& post_original, const Tensor& post_unlearned);

struct MiaReport {
  /// Mean held-out AUC over the folds; 0.5 is a random guess.
  double auc = 0.5;
  std::vector<double> fold_aucs;
  std::size_t n_positives = 0;
  std::size_t n_negatives = 0;
  std::string attacker;
  std::uint64_t seed = 0;
};

/// Stratified k-fold cross-validated AUC of an L2-regularised logistic
/// regression on standardised `features`. Throws ValidationError when a
/// class has fewer than `folds` rows or every row is identical.
MiaReport mia_cross_validate(const Tensor& features, std::span<const int> membership, std::uint64_t seed,
                             std::size_t folds = 5);

/// Positives are the deleted training nodes, negatives never-trained
/// nodes; both are ids of `graph`, the graph before deletion, on which both
/// models are queried. Needs at least 10 of each.
MiaReport mia_attack(const GnnModel& original, const GnnModel& unlearned, const AttributedGraph& graph,
                     std::span<const std::uint32_t> deleted, std::span<const std::size_t> heldout, std::uint64_t seed);

struct EdgeAttackPoint {
  double ratio = 0;
  std::uint64_t seed = 0;
  std::size_t injected = 0;
  /// Model trained on the corrupted graph, evaluated on it.
  double corrupted_f1 = 0;
  /// After unlearning exactly the injected edges.
  double unlearned_f1 = 0;
  double unlearning_seconds = 0;
};

struct EdgeAttackConfig {
  GnnArch arch;
  TrainConfig train;
  CondenseConfig condense;
  TransferConfig transfer;
};

/// One point per (ratio, seed). Infeasible injections are skipped with a
/// warning.
std::vector<EdgeAttackPoint> edge_attack_eval(const AttributedGraph& clean, std::span<const double> ratios,
                                              std::span<const std::uint64_t> seeds, const EdgeAttackConfig& cfg);

/// Per ratio: mean and standard deviation of both F1 curves, tab separated
/// with a header comment line, ready for gnuplot.
void write_edge_attack_tsv(const std::filesystem::path& path, std::span<const EdgeAttackPoint> points);

nlohmann::json to_json(const MiaReport& r);
nlohmann::json to_json(const EdgeAttackPoint& p);

struct MeanStd {
  double mean = 0;
  double std = 0;
};
/// Sample standard deviation; 0 for fewer than two values.
MeanStd mean_std(std::span<const double> values);

}  // namespace tcgu
