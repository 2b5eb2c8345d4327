#include "tcgu/pipeline/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tcgu/graphdata/binary.hpp"

namespace tcgu {

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

GnnArch arch_for(const GnnArch& arch, std::size_t in_dim, int classes) {
  GnnArch a = arch;
  a.in_dim = in_dim;
  a.out_dim = static_cast<std::size_t>(classes);
  a.validate();
  return a;
}

}  // namespace

Stopwatch::Stopwatch() : start_ns_(now_ns()) {}

double Stopwatch::seconds() const { return static_cast<double>(now_ns() - start_ns_) * 1e-9; }

Precondensed precondense(const AttributedGraph& graph, const GnnArch& arch, const TrainConfig& train,
                         const CondenseConfig& condense_cfg) {
  train.validate();
  condense_cfg.validate();
  Precondensed out;
  const GnnArch full = arch_for(arch, graph.num_features(), graph.num_classes);
  Stopwatch sw;
  out.original = train_gnn(full, graph_train_data(graph, full.w_loop), train).model;
  out.original_train_seconds = sw.seconds();
  Stopwatch s1;
  CondenseResult res = condense(graph, out.original, condense_cfg);
  out.stage1_seconds = s1.seconds();
  out.condensed = std::move(res.graph);
  out.condense_losses = std::move(res.losses);
  return out;
}

GnnModel retrain(const CondensedGraph& graph, const GnnArch& arch, const TrainConfig& train) {
  const GnnArch full = arch_for(arch, graph.num_features(), graph.num_classes);
  return train_gnn(full, graph.train_data(full.w_loop), train).model;
}

RetrainBaseline retrain_from_scratch(const AttributedGraph& remaining, const GnnArch& arch, const TrainConfig& train) {
  const GnnArch full = arch_for(arch, remaining.num_features(), remaining.num_classes);
  Stopwatch sw;
  RetrainBaseline out;
  out.model = train_gnn(full, graph_train_data(remaining, full.w_loop), train).model;
  out.seconds = sw.seconds();
  return out;
}

UnlearnRun unlearn(const GnnModel& original, const CondensedGraph& condensed, const AttributedGraph& remaining,
                   const TransferConfig& transfer_cfg, const TrainConfig& train, const TransferHook& hook) {
  if (condensed.source_lineage != remaining.lineage) {
    throw CheckpointError("condensed checkpoint was built from a different dataset or split (lineage " +
                          hex64(condensed.source_lineage) + ", remaining graph " + hex64(remaining.lineage) + ")");
  }
  UnlearnRun run;
  run.transfer_seed = transfer_cfg.seed;
  run.train_seed = train.seed;
  Stopwatch s2;
  run.transferred = transfer(condensed, remaining, original.arch, transfer_cfg, hook);
  run.timings.stage2 = s2.seconds();
  Stopwatch s3;
  run.unlearned = retrain(run.transferred.graph, original.arch, train);
  run.timings.stage3 = s3.seconds();
  return run;
}

SequentialResult sequential_unlearn(const AttributedGraph& graph, const Precondensed& pre, double batch_ratio,
                                    std::size_t batches, const TransferConfig& transfer_cfg, const TrainConfig& train,
                                    std::uint64_t seed, const BatchHook& hook) {
  if (!(batch_ratio > 0) || batches == 0) throw ValidationError("sequential unlearning needs a positive batch ratio and count");
  if (batch_ratio * static_cast<double>(batches) > 0.5 + 1e-12) {
    throw ValidationError("sequential unlearning may delete at most half of the training nodes");
  }
  const std::size_t per_batch =
      static_cast<std::size_t>(std::floor(batch_ratio * static_cast<double>(graph.train_nodes().size()) + 1e-9));
  if (per_batch == 0) throw ValidationError("batch ratio selects no training nodes");

  SequentialResult out;
  AttributedGraph current = graph;
  CondensedGraph condensed = pre.condensed;
  for (std::size_t b = 0; b < batches; ++b) {
    const DeletionRequest req = sample_deletion_count(current, DeletionKind::kNode, per_batch, seed + 7919 * (b + 1));
    AttributedGraph next = apply_deletion(current, req);
    std::vector<std::size_t> per_class(static_cast<std::size_t>(next.num_classes), 0);
    for (std::size_t v : next.train_nodes()) ++per_class[static_cast<std::size_t>(next.labels[v])];
    for (std::size_t c = 0; c < per_class.size(); ++c) {
      if (per_class[c] == 0) {
        out.stopped_reason = "class " + std::to_string(c) + " has no training nodes left after batch " + std::to_string(b + 1);
        spdlog::warn("sequential unlearning stopped: {}", out.stopped_reason);
        return out;
      }
    }
    SequentialBatch batch;
    batch.batch = b;
    for (auto v : req.nodes) batch.deleted.push_back(current.original_ids.empty() ? v : current.original_ids[v]);
    TransferConfig tc = transfer_cfg;
    tc.seed = transfer_cfg.seed + 104729 * b;
    TrainConfig rc = train;
    rc.seed = train.seed + 104729 * b;
    batch.run = unlearn(pre.original, condensed, next, tc, rc);
    condensed = batch.run.transferred.graph;
    batch.remaining = std::move(next);
    current = batch.remaining;
    if (hook) hook(batch);
    out.batches.push_back(std::move(batch));
  }
  return out;
}

std::uint64_t checkpoint_lineage(const Checkpoint& ckpt) {
  if (ckpt.graph) return ckpt.graph->lineage;
  if (ckpt.condensed) return ckpt.condensed->source_lineage;
  if (ckpt.meta.contains("lineage")) return std::stoull(ckpt.meta["lineage"].get<std::string>(), nullptr, 16);
  return 0;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (ckpt.graph && ckpt.condensed && ckpt.graph->lineage != ckpt.condensed->source_lineage) {
    throw CheckpointError("refusing to save a graph and a condensed graph of different lineage");
  }
  std::vector<Section> sections;
  if (ckpt.graph) sections.push_back(encode_graph(*ckpt.graph));
  if (ckpt.model) sections.push_back(encode_model(*ckpt.model));
  if (ckpt.condensed) sections.push_back(encode_condensed(*ckpt.condensed));
  if (ckpt.plugin) sections.push_back(encode_plugin(*ckpt.plugin));
  nlohmann::json meta = ckpt.meta;
  meta["lineage"] = hex64(checkpoint_lineage(ckpt));
  meta["version"] = TCGU_VERSION;
  if (ckpt.condensed) meta["condense_fingerprint"] = hex64(ckpt.condensed->config_fingerprint);
  BinaryWriter w;
  w.str(meta.dump());
  sections.push_back({std::string(kMetaTag), w.take()});
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  write_container(path, sections);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_lineage) {
  if (!std::filesystem::exists(path)) {
    throw CheckpointError("checkpoint " + path.string() + " does not exist; run `tcgu condense` first");
  }
  const std::vector<Section> sections = read_container(path);
  Checkpoint ckpt;
  if (const Section* s = find_section(sections, kGraphTag)) ckpt.graph = decode_graph(*s);
  if (const Section* s = find_section(sections, kModelTag)) ckpt.model = decode_model(*s);
  if (const Section* s = find_section(sections, kCondensedTag)) ckpt.condensed = decode_condensed(*s);
  if (const Section* s = find_section(sections, kPluginTag)) ckpt.plugin = decode_plugin(*s);
  const Section* m = find_section(sections, kMetaTag);
  if (!m) throw CheckpointError(path.string() + ": missing metadata section");
  BinaryReader r(m->payload, "metadata section");
  try {
    ckpt.meta = nlohmann::json::parse(r.str("meta"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": unreadable metadata: " + e.what());
  }
  r.expect_done();

  const std::string recorded = ckpt.meta.value("lineage", std::string{});
  auto check = [&](std::uint64_t lineage, const char* what) {
    if (hex64(lineage) != recorded) {
      throw CheckpointError(path.string() + ": " + what + " lineage " + hex64(lineage) + " disagrees with recorded " + recorded);
    }
  };
  if (ckpt.graph) check(ckpt.graph->lineage, "graph");
  if (ckpt.condensed) {
    check(ckpt.condensed->source_lineage, "condensed graph");
    if (ckpt.meta.contains("condense_fingerprint") &&
        ckpt.meta["condense_fingerprint"].get<std::string>() != hex64(ckpt.condensed->config_fingerprint)) {
      throw CheckpointError(path.string() + ": condensation config fingerprint disagrees with metadata");
    }
  }
  if (expected_lineage && recorded != hex64(*expected_lineage)) {
    throw CheckpointError(path.string() + " was built from a different dataset or split (lineage " + recorded +
                          ", expected " + hex64(*expected_lineage) + ")");
  }
  return ckpt;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json to_json(const GnnArch& a) {
  return {{"kind", std::string(to_string(a.kind))}, {"in_dim", a.in_dim}, {"hidden", a.hidden}, {"out_dim", a.out_dim},
          {"layers", a.layers}, {"hops", a.hops}, {"w_loop", a.w_loop}};
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"lr", c.lr}, {"weight_decay", c.weight_decay}, {"dropout", c.dropout}, {"seed", c.seed}};
}

nlohmann::json to_json(const CondenseConfig& c) {
  return {{"r_cond", c.r_cond}, {"hops", c.hops},   {"w_loop", c.w_loop}, {"lambda_c", c.lambda_c},
          {"lambda_f", c.lambda_f}, {"steps", c.steps}, {"tau1", c.tau1},     {"tau2", c.tau2},
          {"eta1", c.eta1},     {"eta2", c.eta2},   {"delta", c.delta},   {"mlp_hidden", c.mlp_hidden},
          {"seed", c.seed},     {"fingerprint", hex64(c.fingerprint())}};
}

nlohmann::json to_json(const TransferConfig& c) {
  return {{"rank", c.rank},
          {"steps", c.steps},
          {"sample_interval", c.sample_interval},
          {"trajectory_epochs", c.trajectory_epochs},
          {"trajectory_samples", c.trajectory_samples},
          {"queue_capacity", c.queue_capacity},
          {"lambda_f", c.lambda_f},
          {"lambda_r", c.lambda_r},
          {"tau_sim", c.tau_sim},
          {"tau_r", c.tau_r},
          {"tau1", c.tau1},
          {"tau2", c.tau2},
          {"eta1", c.eta1},
          {"eta2", c.eta2},
          {"log_form", c.log_form},
          {"hops", c.hops},
          {"w_loop", c.w_loop},
          {"lambda_c", c.lambda_c},
          {"trajectory_lr", c.trajectory_lr},
          {"trajectory_weight_decay", c.trajectory_weight_decay},
          {"plugin_stddev", c.plugin_stddev},
          {"seed", c.seed},
          {"fingerprint", hex64(c.fingerprint())}};
}

nlohmann::json to_json(const StageTimings& t) {
  auto ms = [](double s) { return std::round(s * 1000.0) / 1000.0; };
  return {{"stage1", ms(t.stage1)}, {"stage2", ms(t.stage2)}, {"stage3", ms(t.stage3)}, {"unlearning", ms(t.unlearning())}};
}

}  // namespace tcgu
