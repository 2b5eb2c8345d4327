#pragma once
// The `tcgu` command line: condense, unlearn, eval and attack-edges.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "tcgu/condense/condense.hpp"
#include "tcgu/gnn/gnn.hpp"
#include "tcgu/graphdata/deletion.hpp"
#include "tcgu/graphdata/split.hpp"
#include "tcgu/transfer/transfer.hpp"

namespace tcgu::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

struct DataConfig {
  /// Dataset path; relative paths that do not exist are looked up under
  /// $TCGU_DATA_DIR.
  std::string path;
  /// "auto", "csv", "json" or "binary".
  std::string format = "auto";
  /// Synthetic graph instead of a file: "cora_like" or "small".
  std::string sbm;
  std::uint64_t sbm_seed = 0;
};

struct UnlearnConfig {
  std::string kind = "node";
  double ratio = 0.2;
  /// Deletion request JSON; empty means sample one per seed.
  std::string request;
  /// Sequential protocol, "NxR" (e.g. "5x0.05"); empty for one-shot.
  std::string sequential;
};

struct EvalConfig {
  bool mia = false;
  /// Also time and score retraining from scratch on the remaining graph.
  bool baseline = false;
  std::vector<double> edge_attack;
};

struct RunConfig {
  DataConfig data;
  SplitSpec split;
  GnnArch gnn{GnnKind::kGcn, 0, 256, 0};
  TrainConfig train;
  CondenseConfig condense;
  TransferConfig transfer;
  UnlearnConfig unlearn;
  EvalConfig eval;
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::size_t jobs = 1;
  std::string out = "runs/tcgu";

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
/// Unknown keys and ill-typed values are ValidationErrors.
RunConfig config_from_json(const nlohmann::json& j);
/// Overlays `patch` onto `base` key by key, rejecting keys `base` lacks.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");
/// TOML, or JSON when the file ends in .json.
nlohmann::json read_config_file(const std::filesystem::path& path);
/// Hash of everything that can change results (not `out` or `jobs`).
std::uint64_t config_hash(const RunConfig& cfg);

/// Loads or generates the dataset and applies the split.
AttributedGraph load_dataset(const DataConfig& data, const SplitSpec& split);
std::string dataset_name(const DataConfig& data);

/// {"kind": "node"|"edge"|"feature", "nodes": [...], "edges": [[u, v], ...]}
DeletionRequest read_request(const std::filesystem::path& path);
nlohmann::json request_to_json(const DeletionRequest& r);

/// Parses "NxR" into (N, R).
std::pair<std::size_t, double> parse_sequential(const std::string& spec);

/// Runs `args` (without the program name). Diagnostics go to `err`,
/// summaries to `out`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tcgu::cli
