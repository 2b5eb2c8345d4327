#pragma once
// Fine-tunes a pre-condensed graph towards a remaining graph through a
// low-rank feature residual, similarity distribution matching over
// trajectory-sampled embedding functions, and a contrastive regulariser.
//
// The deleted data never enters this module: transfer() sees only the
// condensed graph and the remaining graph.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "tcgu/condense/condense.hpp"
#include "tcgu/gnn/gnn.hpp"
#include "tcgu/graphdata/binary.hpp"
#include "tcgu/graphdata/graph.hpp"

namespace tcgu {

struct LowRankPlugin {
  /// N' x r, Gaussian at init.
  Tensor a;
  /// r x F, zero at init.
  Tensor b;

  std::size_t rank() const { return a.cols(); }
  Tensor residual() const;
};

LowRankPlugin init_plugin(std::size_t nodes, std::size_t features, std::size_t rank, std::uint64_t seed,
                          double stddev = 0.02);
/// X' + A B.
Tensor apply_plugin(const Tensor& x, const LowRankPlugin& plugin);
ad::Var apply_plugin(const ad::Var& x, const ad::Var& a, const ad::Var& b);

struct FunctionSnapshot {
  std::shared_ptr<const GnnModel> model;
  /// Unique per push; keys caches of real-graph embeddings.
  std::uint64_t id = 0;
  /// Which trajectory (queue refresh) produced it.
  std::size_t generation = 0;
  std::size_t epoch = 0;
};

/// Bounded FIFO of parameter snapshots; the oldest is evicted on overflow.
class FunctionQueue {
 public:
  explicit FunctionQueue(std::size_t capacity);

  void push(GnnModel model, std::size_t generation, std::size_t epoch);
  const FunctionSnapshot& sample(std::mt19937_64& rng) const;
  /// Uniform over the snapshots of the newest generation only.
  const FunctionSnapshot& sample_latest(std::mt19937_64& rng) const;
  void clear() { items_.clear(); }

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t total_pushes() const noexcept { return next_id_; }
  const FunctionSnapshot& at(std::size_t i) const { return items_.at(i); }

 private:
  std::size_t capacity_;
  std::deque<FunctionSnapshot> items_;
  std::uint64_t next_id_ = 0;
};

/// Trains a fresh GNN on `data` for `epochs` epochs and pushes a snapshot
/// every ceil(epochs / samples) epochs, starting at epoch 0. A diverging
/// trajectory keeps what it pushed so far and logs a warning. Returns the
/// number of snapshots pushed.
std::size_t sample_trajectory(FunctionQueue& queue, const GnnArch& arch, const TrainData& data,
                              const TrainConfig& train, std::size_t samples, std::size_t generation);

/// The representation fed to prototypes and the regulariser: the input to
/// the final linear layer for GCN; the logits for SGC, whose penultimate
/// representation does not depend on the parameters at all.
ad::Var embed(const GnnArch& arch, std::span<const ad::Var> params, const Propagator& prop, const ad::Var& x);

/// Row c = mean of the rows (restricted to `rows`) labelled c.
ad::Var class_mean_rows(const ad::Var& z, std::span<const int> labels, std::span<const std::size_t> rows,
                        int num_classes);
ad::Var prototypes(const ad::Var& z, std::span<const int> labels, std::span<const std::size_t> rows, int num_classes);
ad::Var prototypes(const ad::Var& z, std::span<const int> labels, int num_classes);

/// S(i, c) = exp(cos(z_i, p_c) / tau); zero-norm pairs have cosine 0.
ad::Var similarity_embedding(const ad::Var& z, const ad::Var& protos, double tau);

/// Sum_c r_c ||mean_c(S_r) - mean_c(S_u)||^2 given the class means of the
/// remaining-graph side.
ad::Var sdm_loss(const ad::Var& real_class_means, const ad::Var& s_u, std::span<const int> labels_u,
                 std::span<const double> ratios);
ad::Var sdm_loss(const ad::Var& s_r, std::span<const int> labels_r, std::span<const std::size_t> rows_r,
                 const ad::Var& s_u, std::span<const int> labels_u, std::span<const double> ratios);

/// -Sum_i 1/|S(i)| Sum_{p in S(i)} exp(cos_ip / tau) / Sum_{q != i} exp(cos_iq / tau)
/// with S(i) the other nodes sharing i's label. `log_form` takes the log of
/// each ratio (the usual supervised contrastive loss). Nodes without a
/// same-class peer contribute 0.
ad::Var cdr_loss(const ad::Var& z, std::span<const int> labels, double tau, bool log_form = false);

struct TransferConfig {
  std::size_t rank = 2;
  std::size_t steps = 20;
  /// Queue refresh period in steps.
  std::size_t sample_interval = 10;
  std::size_t trajectory_epochs = 50;
  std::size_t trajectory_samples = 10;
  std::size_t queue_capacity = 20;
  double lambda_f = 100.0;
  double lambda_r = 2e-3;
  double tau_sim = 0.5;
  double tau_r = 0.5;
  std::size_t tau1 = 4;
  std::size_t tau2 = 1;
  double eta1 = 0.01;
  double eta2 = 0.001;
  bool log_form = false;
  /// Feature alignment settings, as in condensation.
  std::size_t hops = 2;
  double w_loop = 1.0;
  double lambda_c = 0.01;
  /// Optimiser of the trajectory models.
  double trajectory_lr = 0.01;
  double trajectory_weight_decay = 5e-4;
  double plugin_stddev = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t fingerprint() const;
};

struct TransferStep {
  std::size_t step = 0;
  bool updated_plugin = false;
  double loss = 0, sdm = 0, feat = 0, cdr = 0;
  std::size_t queue_size = 0;
  /// Generation of the trajectory the sampled function came from, and the
  /// current one.
  std::size_t sampled_generation = 0;
  std::size_t generation = 0;
  /// X'_u and A'_u = g(X'_u) before this step's update.
  const Tensor* features = nullptr;
  const Tensor* adjacency = nullptr;
  const std::vector<int>* labels = nullptr;
};

using TransferHook = std::function<void(const TransferStep&)>;

struct TransferResult {
  /// X'_u folded into the features, sparsified A'_u, Y' unchanged.
  CondensedGraph graph;
  LowRankPlugin plugin;
  std::vector<double> losses;
  std::size_t refreshes = 0;
};

/// `arch` fixes the sampled GNN family (kind, hidden width, depth); its
/// input and output widths are taken from the data.
TransferResult transfer(const CondensedGraph& condensed, const AttributedGraph& remaining, const GnnArch& arch,
                        const TransferConfig& config, const TransferHook& hook = {});

inline constexpr std::string_view kPluginTag = "PLUG";
Section encode_plugin(const LowRankPlugin& p);
LowRankPlugin decode_plugin(const Section& s);

}  // namespace tcgu
