#pragma once
// GCN and SGC node classifiers over a normalised propagation matrix.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "tcgu/graphdata/binary.hpp"
#include "tcgu/graphdata/graph.hpp"
#include "tcgu/numerics/autodiff.hpp"
#include "tcgu/numerics/sparse.hpp"

namespace tcgu {

enum class GnnKind { kGcn, kSgc };

GnnKind parse_gnn_kind(std::string_view name);
std::string_view to_string(GnnKind kind);

struct GnnArch {
  GnnKind kind = GnnKind::kGcn;
  std::size_t in_dim = 0;
  std::size_t hidden = 256;
  std::size_t out_dim = 0;
  /// GCN depth.
  std::size_t layers = 2;
  /// SGC propagation hops.
  std::size_t hops = 2;
  double w_loop = 1.0;

  void validate() const;
  /// Width of embed(): the hidden width for GCN; SGC has no hidden layer, so
  /// its embedding is the propagated input of width in_dim.
  std::size_t embed_dim() const;
};

/// Parameters are [W1, b1, ..., WL, bL]; biases are 1 x d rows.
struct GnnModel {
  GnnArch arch;
  std::vector<Tensor> params;
};

/// Glorot-uniform weights, zero biases.
GnnModel init_gnn(const GnnArch& arch, std::uint64_t seed);

/// (wI + D)^-1/2 (wI + A) (wI + D)^-1/2, with D the row sums of A.
CsrMatrix normalize_adjacency(const CsrMatrix& a, double w_loop);
Tensor normalize_adjacency(const Tensor& a, double w_loop);
/// Differentiable dense variant, used when A depends on parameters.
ad::Var normalize_adjacency(const ad::Var& a, double w_loop);

/// Left-multiplication by a propagation matrix, either a constant sparse
/// matrix (original graphs) or a dense expression (condensed graphs).
class Propagator {
 public:
  Propagator() = default;
  explicit Propagator(std::shared_ptr<const CsrMatrix> sparse) : sparse_(std::move(sparse)) {}
  explicit Propagator(ad::Var dense) : dense_(std::move(dense)) {}
  ad::Var operator()(const ad::Var& x) const;
  std::size_t nodes() const;
  bool is_sparse() const noexcept { return static_cast<bool>(sparse_); }

 private:
  std::shared_ptr<const CsrMatrix> sparse_;
  ad::Var dense_;
};

/// Normalised propagation over a graph's adjacency.
Propagator graph_propagator(const AttributedGraph& g, double w_loop);
/// Normalised propagation over a dense (possibly differentiable) adjacency.
Propagator dense_propagator(const ad::Var& adjacency, double w_loop);

struct GnnOutput {
  /// Input to the final linear layer.
  ad::Var embedding;
  ad::Var logits;
};

/// Optional dropout masks, one per layer input, already scaled.
using DropoutMasks = std::vector<Tensor>;

GnnOutput gnn_forward(const GnnArch& arch, std::span<const ad::Var> params, const Propagator& prop,
                      const ad::Var& x, const DropoutMasks* dropout = nullptr);

std::vector<ad::Var> as_constants(std::span<const Tensor> params);
std::vector<ad::Var> as_parameters(std::span<const Tensor> params);

/// Inference with frozen parameters.
GnnOutput infer(const GnnModel& model, const Propagator& prop, const Tensor& x);

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainData {
  Propagator prop;
  Tensor features;
  std::vector<int> labels;
  std::vector<std::size_t> train;
  /// Optional; enables best-on-validation selection.
  std::vector<std::size_t> val;
};

struct TrainResult {
  GnnModel model;
  /// Training loss per epoch, measured before that epoch's update.
  std::vector<double> losses;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

/// Called with the epoch index and the parameters about to be updated.
using EpochHook = std::function<void(std::size_t epoch, const GnnModel& current)>;

/// Adam on mean cross-entropy over the train rows. Returns the parameters
/// with the best validation accuracy (ties to lower validation loss) when a
/// validation set is given, else the final ones. A non-finite loss throws
/// NumericError naming the epoch.
TrainResult train_gnn(const GnnArch& arch, const TrainData& data, const TrainConfig& config,
                      const EpochHook& hook = {});

/// Train/val rows and features of a split graph with its GCN propagation.
TrainData graph_train_data(const AttributedGraph& g, double w_loop = 1.0);

/// Fraction of rows whose arg-max matches the label. For single-label
/// multi-class prediction micro-averaged F1 equals accuracy.
double micro_f1(const Tensor& logits, std::span<const int> labels, std::span<const std::size_t> rows);

inline constexpr std::string_view kModelTag = "MODL";
Section encode_model(const GnnModel& m);
GnnModel decode_model(const Section& s);

}  // namespace tcgu
