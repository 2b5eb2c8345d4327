#pragma once
// Stage orchestration: pre-condense once (stage 1), then per deletion request
// transfer the condensed graph to the remaining graph (stage 2) and retrain
// on it (stage 3).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tcgu/condense/condense.hpp"
#include "tcgu/gnn/gnn.hpp"
#include "tcgu/graphdata/deletion.hpp"
#include "tcgu/graphdata/graph.hpp"
#include "tcgu/transfer/transfer.hpp"

namespace tcgu {

/// Wall-clock seconds from a monotonic clock.
class Stopwatch {
 public:
  Stopwatch();
  double seconds() const;

 private:
  std::int64_t start_ns_;
};

struct StageTimings {
  double stage1 = 0;
  double stage2 = 0;
  double stage3 = 0;
  /// Pre-condensation is a one-off cost and is not part of unlearning time.
  double unlearning() const { return stage2 + stage3; }
};

struct Precondensed {
  GnnModel original;
  CondensedGraph condensed;
  double original_train_seconds = 0;
  double stage1_seconds = 0;
  std::vector<double> condense_losses;
};

/// Trains the original model on `graph` and condenses it with that model as
/// the teacher.
Precondensed precondense(const AttributedGraph& graph, const GnnArch& arch, const TrainConfig& train,
                         const CondenseConfig& condense_cfg);

/// A fresh model of `arch` trained on every condensed node.
GnnModel retrain(const CondensedGraph& graph, const GnnArch& arch, const TrainConfig& train);

struct RetrainBaseline {
  GnnModel model;
  double seconds = 0;
};

/// The exact-unlearning reference: train from scratch on the remaining graph.
RetrainBaseline retrain_from_scratch(const AttributedGraph& remaining, const GnnArch& arch, const TrainConfig& train);

struct UnlearnRun {
  GnnModel unlearned;
  TransferResult transferred;
  StageTimings timings;
  std::uint64_t transfer_seed = 0;
  std::uint64_t train_seed = 0;
};

/// Transfer then retrain. `condensed` must descend from the same dataset and
/// split as `remaining`, otherwise CheckpointError. The deletion itself is
/// not a parameter.
UnlearnRun unlearn(const GnnModel& original, const CondensedGraph& condensed, const AttributedGraph& remaining,
                   const TransferConfig& transfer_cfg, const TrainConfig& train, const TransferHook& hook = {});

struct SequentialBatch {
  std::size_t batch = 0;
  /// Original ids of the nodes removed in this batch.
  std::vector<std::uint32_t> deleted;
  /// Remaining graph after this and all earlier batches.
  AttributedGraph remaining;
  UnlearnRun run;
};

struct SequentialResult {
  std::vector<SequentialBatch> batches;
  /// Empty when every batch ran; otherwise why the sequence stopped.
  std::string stopped_reason;
};

/// Called after each batch, e.g. to evaluate utility and attacks.
using BatchHook = std::function<void(const SequentialBatch&)>;

/// Deletes floor(batch_ratio * |train|) original train nodes per batch,
/// cumulatively. Each batch continues from the previous batch's transferred
/// graph with a fresh plugin and a fresh function queue. Stops early with
/// partial results when a class loses all its training nodes.
SequentialResult sequential_unlearn(const AttributedGraph& graph, const Precondensed& pre, double batch_ratio,
                                    std::size_t batches, const TransferConfig& transfer_cfg, const TrainConfig& train,
                                    std::uint64_t seed, const BatchHook& hook = {});

/// Everything a run persists. Absent parts are simply not written.
struct Checkpoint {
  std::optional<AttributedGraph> graph;
  std::optional<GnnModel> model;
  std::optional<CondensedGraph> condensed;
  std::optional<LowRankPlugin> plugin;
  nlohmann::json meta = nlohmann::json::object();
};

inline constexpr std::string_view kMetaTag = "META";

/// Records the lineage and library version in `meta` before writing.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Verifies that all parts share one lineage, and that it equals
/// `expected_lineage` when given.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_lineage = {});

/// Lineage of whatever the checkpoint holds; 0 when it holds nothing.
std::uint64_t checkpoint_lineage(const Checkpoint& ckpt);

nlohmann::json to_json(const GnnArch& arch);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const CondenseConfig& cfg);
nlohmann::json to_json(const TransferConfig& cfg);
nlohmann::json to_json(const StageTimings& t);

/// Lowercase hexadecimal, 16 digits.
std::string hex64(std::uint64_t v);

}  // namespace tcgu
