#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <cmath>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "tcgu/cli/cli.hpp"
#include "tcgu/evalsuite/evalsuite.hpp"
#include "tcgu/pipeline/pipeline.hpp"

namespace tcgu::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".tcgu_write_probe";
  {
    std::ofstream f(probe);
    if (ec || !f) throw ValidationError("output directory " + out + " is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

// Runs fn(0..n-1) on up to `jobs` threads; the first exception wins.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

double ms(double s) { return std::round(s * 1000.0) / 1000.0; }

json summarize(const std::vector<json>& runs, const std::vector<std::string>& keys) {
  json s = json::object();
  for (const auto& k : keys) {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r["metrics"].contains(k)) v.push_back(r["metrics"][k].get<double>());
    if (v.empty()) continue;
    const MeanStd m = mean_std(v);
    s[k] = {{"mean", m.mean}, {"std", m.std}, {"n", v.size()}};
  }
  return s;
}

struct Context {
  RunConfig cfg;
  std::string command;
  std::ostream& out;
};

json manifest_base(const Context& c, const json& stage_one_meta = json::object()) {
  const std::string dataset = stage_one_meta.contains("dataset") ? stage_one_meta["dataset"].get<std::string>()
                                                                 : dataset_name(c.cfg.data);
  return {{"tool", "tcgu"},
          {"version", TCGU_VERSION},
          {"command", c.command},
          {"dataset", dataset},
          {"split_seed", c.cfg.split.seed},
          {"config_hash", hex64(config_hash(c.cfg))},
          {"configs", config_to_json(c.cfg)}};
}

fs::path checkpoint_path(const std::string& from) {
  fs::path p(from);
  if (fs::is_directory(p)) p /= "condensed.tcgu";
  return p;
}

// Stage-1 checkpoint contents needed downstream.
struct StageOne {
  AttributedGraph graph;
  GnnModel original;
  CondensedGraph condensed;
  json meta;
};

StageOne load_stage_one(const std::string& from) {
  if (from.empty()) throw ValidationError("--from is required: the output directory of `tcgu condense`");
  Checkpoint ck = load_checkpoint(checkpoint_path(from));
  if (!ck.graph || !ck.model || !ck.condensed) {
    throw CheckpointError(checkpoint_path(from).string() + " is not a condensation checkpoint; run `tcgu condense` first");
  }
  return {std::move(*ck.graph), std::move(*ck.model), std::move(*ck.condensed), std::move(ck.meta)};
}

// Transfer must propagate and weight the covariance the way condensation did.
TransferConfig aligned_transfer(const RunConfig& cfg, const json& meta) {
  TransferConfig t = cfg.transfer;
  if (meta.contains("condense")) {
    t.hops = meta["condense"].value("hops", t.hops);
    t.w_loop = meta["condense"].value("w_loop", t.w_loop);
    t.lambda_c = meta["condense"].value("lambda_c", t.lambda_c);
  }
  return t;
}

int cmd_condense(Context& c) {
  const RunConfig& cfg = c.cfg;
  const fs::path dir = prepare_out(cfg.out);
  const AttributedGraph graph = load_dataset(cfg.data, cfg.split);
  spdlog::info("condensing {} ({} nodes, {} edges, {} features) at ratio {}", dataset_name(cfg.data), graph.num_nodes(),
               graph.num_edges(), graph.num_features(), cfg.condense.r_cond);
  TrainConfig train = cfg.train;
  train.seed += cfg.seed;
  CondenseConfig cond = cfg.condense;
  cond.seed += cfg.seed;
  const Precondensed pre = precondense(graph, cfg.gnn, train, cond);
  const double original_f1 = utility_report(pre.original, graph);
  const double condensed_f1 = utility_report(retrain(pre.condensed, cfg.gnn, train), graph);

  Checkpoint ck;
  ck.graph = graph;
  ck.model = pre.original;
  ck.condensed = pre.condensed;
  ck.meta = {{"condense", to_json(cond)},
             {"gnn", to_json(pre.original.arch)},
             {"dataset", dataset_name(cfg.data)},
             {"split", {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}, {"seed", cfg.split.seed}}},
             {"config_hash", hex64(config_hash(cfg))}};
  const fs::path ckpt = dir / "condensed.tcgu";
  save_checkpoint(ckpt, ck);

  json m = manifest_base(c);
  m["timings_s"] = {{"original_train", ms(pre.original_train_seconds)}, {"stage1", ms(pre.stage1_seconds)}};
  m["metrics"] = {{"original_test_f1", original_f1},
                  {"condensed_retrain_test_f1", condensed_f1},
                  {"condensed_nodes", pre.condensed.num_nodes()},
                  {"final_condense_loss", pre.condense_losses.empty() ? 0.0 : pre.condense_losses.back()}};
  m["artifact_paths"] = {{"checkpoint", ckpt.string()}, {"manifest", (dir / "manifest.json").string()}};
  write_json(dir / "manifest.json", m);
  c.out << "condensed " << graph.num_nodes() << " -> " << pre.condensed.num_nodes() << " nodes in " << std::fixed
        << std::setprecision(2) << pre.stage1_seconds << " s; original test F1 " << std::setprecision(4) << original_f1
        << ", retrained on condensed " << condensed_f1 << "\n"
        << "wrote " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

json one_shot(const RunConfig& cfg, const StageOne& s1, const TransferConfig& tbase, std::size_t i, const fs::path& dir,
              const std::optional<DeletionRequest>& fixed) {
  const std::uint64_t seed = cfg.seed + i;
  const DeletionKind kind = parse_deletion_kind(cfg.unlearn.kind);
  const DeletionRequest req = fixed ? *fixed : sample_deletion(s1.graph, kind, cfg.unlearn.ratio, seed);
  // Delta G leaves the working set here; unlearning only ever sees the remainder.
  const AttributedGraph remaining = apply_deletion(s1.graph, req);
  TransferConfig tc = tbase;
  tc.seed += seed;
  TrainConfig tr = cfg.train;
  tr.seed += seed;
  const UnlearnRun run = unlearn(s1.original, s1.condensed, remaining, tc, tr);

  json metrics = {{"test_f1", utility_report(run.unlearned, remaining)}};
  const bool node_request = req.kind == DeletionKind::kNode;
  if (cfg.eval.mia && !node_request) spdlog::warn("membership inference needs a node deletion request; skipped");
  if (cfg.eval.mia && node_request) {
    metrics["mia_auc"] = mia_attack(s1.original, run.unlearned, s1.graph, req.nodes, s1.graph.test_nodes(), seed).auc;
  }
  if (cfg.eval.baseline) {
    const RetrainBaseline base = retrain_from_scratch(remaining, s1.original.arch, tr);
    metrics["retrain_test_f1"] = utility_report(base.model, remaining);
    metrics["retrain_seconds"] = ms(base.seconds);
    metrics["speedup_vs_retrain"] = base.seconds / std::max(run.timings.unlearning(), 1e-9);
    if (cfg.eval.mia && node_request) {
      metrics["retrain_mia_auc"] = mia_attack(s1.original, base.model, s1.graph, req.nodes, s1.graph.test_nodes(), seed).auc;
    }
  }
  const fs::path sub = dir / ("seed_" + std::to_string(i));
  fs::create_directories(sub);
  Checkpoint ck;
  ck.model = run.unlearned;
  ck.condensed = run.transferred.graph;
  ck.plugin = run.transferred.plugin;
  ck.meta = {{"run_seed", seed}};
  save_checkpoint(sub / "unlearned.tcgu", ck);
  write_json(sub / "request.json", request_to_json(req));
  return {{"index", i},
          {"seed", seed},
          {"request", {{"kind", std::string(to_string(req.kind))},
                       {"size", req.kind == DeletionKind::kEdge ? req.edges.size() : req.nodes.size()}}},
          {"timings_s", to_json(run.timings)},
          {"metrics", metrics},
          {"artifact_paths", {{"model", (sub / "unlearned.tcgu").string()}, {"request", (sub / "request.json").string()}}}};
}

json sequential_run(const RunConfig& cfg, const StageOne& s1, const TransferConfig& tbase, std::size_t i) {
  const auto [batches, ratio] = parse_sequential(cfg.unlearn.sequential);
  const std::uint64_t seed = cfg.seed + i;
  Precondensed pre;
  pre.original = s1.original;
  pre.condensed = s1.condensed;
  TransferConfig tc = tbase;
  tc.seed += seed;
  TrainConfig tr = cfg.train;
  tr.seed += seed;
  std::vector<std::uint32_t> deleted;
  json steps = json::array();
  const SequentialResult res = sequential_unlearn(s1.graph, pre, ratio, batches, tc, tr, seed, [&](const SequentialBatch& b) {
    deleted.insert(deleted.end(), b.deleted.begin(), b.deleted.end());
    json row = {{"batch", b.batch + 1},
                {"deleted_total", deleted.size()},
                {"test_f1", utility_report(b.run.unlearned, b.remaining)},
                {"timings_s", to_json(b.run.timings)}};
    if (cfg.eval.mia && deleted.size() >= 10) {
      row["mia_auc"] = mia_attack(s1.original, b.run.unlearned, s1.graph, deleted, s1.graph.test_nodes(), seed).auc;
    }
    steps.push_back(std::move(row));
  });
  json r = {{"index", i}, {"seed", seed}, {"batches", steps}, {"metrics", json::object()}};
  if (!res.stopped_reason.empty()) r["stopped_reason"] = res.stopped_reason;
  if (!steps.empty()) {
    r["metrics"]["final_test_f1"] = steps.back()["test_f1"];
    if (steps.back().contains("mia_auc")) r["metrics"]["final_mia_auc"] = steps.back()["mia_auc"];
  }
  return r;
}

int cmd_unlearn(Context& c, const std::string& from) {
  const RunConfig& cfg = c.cfg;
  const fs::path dir = prepare_out(cfg.out);
  const StageOne s1 = load_stage_one(from);
  const TransferConfig tbase = aligned_transfer(cfg, s1.meta);
  std::optional<DeletionRequest> fixed;
  if (!cfg.unlearn.request.empty()) fixed = read_request(cfg.unlearn.request);

  std::vector<json> runs(cfg.seeds);
  const bool seq = !cfg.unlearn.sequential.empty();
  if (seq && fixed) throw ValidationError("--sequential samples its own batches; drop --request");
  parallel_for(cfg.seeds, cfg.jobs, [&](std::size_t i) {
    spdlog::info("run {} of {}", i + 1, cfg.seeds);
    runs[i] = seq ? sequential_run(cfg, s1, tbase, i) : one_shot(cfg, s1, tbase, i, dir, fixed);
  });

  json m = manifest_base(c, s1.meta);
  m["checkpoint"] = checkpoint_path(from).string();
  m["runs"] = runs;
  if (seq) {
    m["request"] = {{"protocol", "sequential"}, {"spec", cfg.unlearn.sequential}};
    m["metrics"] = summarize(runs, {"final_test_f1", "final_mia_auc"});
    std::ofstream csv(dir / "sequential.csv");
    csv << "seed,batch,deleted_total,test_f1,mia_auc,stage2_s,stage3_s\n";
    for (const auto& r : runs) {
      for (const auto& b : r["batches"]) {
        csv << r["seed"] << ',' << b["batch"] << ',' << b["deleted_total"] << ',' << b["test_f1"] << ','
            << (b.contains("mia_auc") ? b["mia_auc"].dump() : "") << ',' << b["timings_s"]["stage2"] << ','
            << b["timings_s"]["stage3"] << '\n';
      }
    }
    m["artifact_paths"] = {{"curve", (dir / "sequential.csv").string()}};
  } else {
    m["request"] = fixed ? request_to_json(*fixed) : json{{"kind", cfg.unlearn.kind}, {"ratio", cfg.unlearn.ratio}};
    std::vector<json> flat = runs;
    for (auto& r : flat) {
      r["metrics"]["stage2_s"] = r["timings_s"]["stage2"];
      r["metrics"]["stage3_s"] = r["timings_s"]["stage3"];
      r["metrics"]["unlearning_s"] = r["timings_s"]["unlearning"];
    }
    m["metrics"] = summarize(flat, {"test_f1", "mia_auc", "retrain_test_f1", "retrain_mia_auc", "retrain_seconds",
                                    "speedup_vs_retrain"});
    m["timings_s"] = summarize(flat, {"stage2_s", "stage3_s", "unlearning_s"});
    std::ofstream csv(dir / "metrics.csv");
    csv << "seed,test_f1,mia_auc,stage2_s,stage3_s,unlearning_s,retrain_test_f1,retrain_s\n";
    for (const auto& r : flat) {
      const json& x = r["metrics"];
      auto opt = [&](const char* k) { return x.contains(k) ? x[k].dump() : std::string(); };
      csv << r["seed"] << ',' << x["test_f1"] << ',' << opt("mia_auc") << ',' << x["stage2_s"] << ',' << x["stage3_s"]
          << ',' << x["unlearning_s"] << ',' << opt("retrain_test_f1") << ',' << opt("retrain_seconds") << '\n';
    }
    m["artifact_paths"] = {{"metrics_csv", (dir / "metrics.csv").string()}};
  }
  write_json(dir / "manifest.json", m);

  c.out << std::fixed << std::setprecision(4);
  for (const auto& [k, v] : m["metrics"].items()) {
    c.out << k << ": " << v["mean"].get<double>() << " +- " << v["std"].get<double>() << " (n=" << v["n"] << ")\n";
  }
  if (m.contains("timings_s") && m["timings_s"].contains("unlearning_s")) {
    c.out << "unlearning time: " << m["timings_s"]["unlearning_s"]["mean"].get<double>() << " s\n";
  }
  c.out << "wrote " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_attack(Context& c) {
  const RunConfig& cfg = c.cfg;
  if (cfg.eval.edge_attack.empty()) throw ValidationError("--edge-attack needs at least one ratio");
  const fs::path dir = prepare_out(cfg.out);
  const AttributedGraph graph = load_dataset(cfg.data, cfg.split);
  EdgeAttackConfig ec{cfg.gnn, cfg.train, cfg.condense, cfg.transfer};
  std::vector<std::vector<EdgeAttackPoint>> per_seed(cfg.seeds);
  parallel_for(cfg.seeds, cfg.jobs, [&](std::size_t i) {
    const std::vector<std::uint64_t> seed{cfg.seed + i};
    per_seed[i] = edge_attack_eval(graph, cfg.eval.edge_attack, seed, ec);
  });
  std::vector<EdgeAttackPoint> pts;
  for (auto& v : per_seed) pts.insert(pts.end(), v.begin(), v.end());
  write_edge_attack_tsv(dir / "edge_attack.tsv", pts);
  json m = manifest_base(c);
  json points = json::array();
  for (const auto& p : pts) points.push_back(to_json(p));
  m["request"] = {{"kind", "edge"}, {"adversarial_ratios", cfg.eval.edge_attack}};
  m["metrics"] = {{"points", points}};
  m["artifact_paths"] = {{"curve_tsv", (dir / "edge_attack.tsv").string()}};
  write_json(dir / "manifest.json", m);
  std::ifstream tsv(dir / "edge_attack.tsv");
  c.out << tsv.rdbuf() << "wrote " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_eval(Context& c, const std::string& from, const std::string& model_path) {
  const RunConfig& cfg = c.cfg;
  if (!cfg.eval.edge_attack.empty() && from.empty()) return cmd_attack(c);
  const fs::path dir = prepare_out(cfg.out);
  const StageOne s1 = load_stage_one(from);
  if (model_path.empty()) throw ValidationError("--model is required: an unlearned.tcgu written by `tcgu unlearn`");
  if (cfg.unlearn.request.empty()) throw ValidationError("--request is required: the request.json of that run");
  const Checkpoint un = load_checkpoint(model_path, s1.graph.lineage);
  if (!un.model) throw CheckpointError(model_path + " holds no model");
  const DeletionRequest req = read_request(cfg.unlearn.request);
  const AttributedGraph remaining = apply_deletion(s1.graph, req);

  json m = manifest_base(c, s1.meta);
  m["request"] = request_to_json(req);
  m["metrics"] = {{"test_f1", utility_report(*un.model, remaining)},
                  {"original_test_f1", utility_report(s1.original, remaining)}};
  if (cfg.eval.mia) {
    if (req.kind != DeletionKind::kNode) throw ValidationError("membership inference needs a node deletion request");
    const MiaReport r = mia_attack(s1.original, *un.model, s1.graph, req.nodes, s1.graph.test_nodes(), cfg.seed);
    write_json(dir / "mia.json", to_json(r));
    m["metrics"]["mia"] = to_json(r);
    m["artifact_paths"] = {{"mia", (dir / "mia.json").string()}};
  }
  write_json(dir / "manifest.json", m);
  c.out << m["metrics"].dump(2) << "\n";
  if (!cfg.eval.edge_attack.empty()) {
    Context sub{cfg, "attack-edges", c.out};
    sub.cfg.out = (dir / "edge_attack").string();
    return cmd_attack(sub);
  }
  return kExitOk;
}

// Flag values that override the configuration file when given.
struct Overrides {
  std::string config;
  std::vector<std::string> sets;
  json patch = json::object();
  std::string from, model;
  bool quiet = false;
};

template <typename T>
CLI::Option* bind(CLI::App* app, Overrides& o, const std::string& flag, std::vector<std::string> path, const std::string& help) {
  return app->add_option_function<T>(
      flag,
      [&o, path](const T& v) {
        json* node = &o.patch;
        for (std::size_t k = 0; k + 1 < path.size(); ++k) node = &(*node)[path[k]];
        (*node)[path.back()] = v;
      },
      help);
}

CLI::Option* switch_on(CLI::App* app, Overrides& o, const std::string& flag, std::string section, std::string key,
                       const std::string& help) {
  return app->add_flag_callback(flag, [&o, section, key] { o.patch[section][key] = true; }, help);
}

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config, "TOML (or .json) configuration file");
  app->add_option("--set", o.sets, "Override any key, e.g. --set transfer.rank=4");
  app->add_flag("-q,--quiet", o.quiet, "Only log warnings and errors");
  bind<std::string>(app, o, "-o,--out", {"out"}, "Output directory");
  bind<std::uint64_t>(app, o, "--seed", {"seed"}, "Global seed");
  bind<std::size_t>(app, o, "--seeds", {"seeds"}, "Number of repeats (seed, seed+1, ...)");
  bind<std::size_t>(app, o, "-j,--jobs", {"jobs"}, "Worker threads for independent repeats");
  bind<std::string>(app, o, "--data", {"data", "path"}, "Dataset path (CSV directory, JSON or binary)");
  bind<std::string>(app, o, "--format", {"data", "format"}, "auto, csv, json or binary");
  bind<std::string>(app, o, "--sbm", {"data", "sbm"}, "Synthetic dataset instead: cora_like or small");
  bind<std::uint64_t>(app, o, "--sbm-seed", {"data", "sbm_seed"}, "Seed of the synthetic dataset");
  bind<std::string>(app, o, "--gnn", {"gnn", "kind"}, "gcn or sgc");
  bind<std::size_t>(app, o, "--hidden", {"gnn", "hidden"}, "GCN hidden width");
  bind<std::size_t>(app, o, "--epochs", {"train", "epochs"}, "GNN training epochs");
  bind<double>(app, o, "--lr", {"train", "lr"}, "GNN learning rate");
  bind<std::uint64_t>(app, o, "--split-seed", {"split", "seed"}, "Split seed");
  app->add_option_function<std::vector<double>>(
         "--split",
         [&o](const std::vector<double>& v) {
           if (v.size() != 3) throw CLI::ValidationError("--split", "needs train,val,test fractions");
           o.patch["split"]["train"] = v[0];
           o.patch["split"]["val"] = v[1];
           o.patch["split"]["test"] = v[2];
         },
         "Train,val,test fractions")
      ->delimiter(',');
}

void add_condense_knobs(CLI::App* app, Overrides& o) {
  bind<double>(app, o, "--ratio", {"condense", "r_cond"}, "Condensation ratio N'/|train|");
  bind<std::size_t>(app, o, "--steps", {"condense", "steps"}, "Condensation steps");
}

void add_transfer_knobs(CLI::App* app, Overrides& o) {
  bind<std::size_t>(app, o, "--transfer-steps", {"transfer", "steps"}, "Fine-tuning steps");
  bind<std::size_t>(app, o, "--rank", {"transfer", "rank"}, "Plugin rank");
}

json parse_set(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key.path=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json patch = json::object();
  json* node = &patch;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    node = &(*node)[key.substr(start, dot - start)];
  }
  (*node)[key.substr(start)] = value;
  return patch;
}

RunConfig resolve(const Overrides& o) {
  json cfg = config_to_json(RunConfig{});
  if (!o.config.empty()) merge_config(cfg, read_config_file(o.config));
  merge_config(cfg, o.patch);
  for (const auto& s : o.sets) merge_config(cfg, parse_set(s));
  RunConfig r = config_from_json(cfg);
  r.validate();
  return r;
}

class LoggerScope {
 public:
  LoggerScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("tcgu", sink);
    logger->set_pattern("[%H:%M:%S] [%l] %v");
    spdlog::set_default_logger(logger);
  }
  ~LoggerScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  LoggerScope logging(err);
  CLI::App app{"tcgu: graph unlearning by transferred condensation"};
  app.set_version_flag("--version", std::string(TCGU_VERSION));
  app.require_subcommand(1);
  Overrides o;

  CLI::App* condense = app.add_subcommand("condense", "Train the original model and pre-condense the graph");
  add_common(condense, o);
  add_condense_knobs(condense, o);
  add_transfer_knobs(condense, o);

  CLI::App* unl = app.add_subcommand("unlearn", "Unlearn a deletion request from a condensation checkpoint");
  add_common(unl, o);
  add_condense_knobs(unl, o);
  add_transfer_knobs(unl, o);
  unl->add_option("--from", o.from, "Checkpoint or output directory of `tcgu condense`");
  bind<std::string>(unl, o, "--request", {"unlearn", "request"}, "Deletion request JSON");
  bind<std::string>(unl, o, "--kind", {"unlearn", "kind"}, "node, edge or feature (sampled requests)");
  bind<double>(unl, o, "--deletion-ratio", {"unlearn", "ratio"}, "Fraction of train nodes (or edges) to delete");
  bind<std::string>(unl, o, "--sequential", {"unlearn", "sequential"}, "Sequential batches, e.g. 5x0.05");
  switch_on(unl, o, "--mia", "eval", "mia", "Run the membership inference attack");
  switch_on(unl, o, "--baseline", "eval", "baseline", "Also time and score retraining from scratch");

  CLI::App* ev = app.add_subcommand("eval", "Evaluate an unlearned model");
  add_common(ev, o);
  add_condense_knobs(ev, o);
  add_transfer_knobs(ev, o);
  ev->add_option("--from", o.from, "Checkpoint or output directory of `tcgu condense`");
  ev->add_option("--model", o.model, "unlearned.tcgu written by `tcgu unlearn`");
  bind<std::string>(ev, o, "--request", {"unlearn", "request"}, "The request.json of that run");
  switch_on(ev, o, "--mia", "eval", "mia", "Run the membership inference attack");
  bind<std::vector<double>>(ev, o, "--edge-attack", {"eval", "edge_attack"}, "Adversarial edge ratios")
      ->delimiter(',');

  CLI::App* atk = app.add_subcommand("attack-edges", "Adversarial edge injection then unlearning, as a curve");
  add_common(atk, o);
  add_condense_knobs(atk, o);
  add_transfer_knobs(atk, o);
  bind<std::vector<double>>(atk, o, "--edge-attack,--ratios", {"eval", "edge_attack"}, "Adversarial edge ratios")
      ->delimiter(',');

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    Context ctx{resolve(o), "", out};
    if (o.quiet) spdlog::set_level(spdlog::level::warn);
    else spdlog::set_level(spdlog::level::info);
    ctx.command = app.get_subcommands().front()->get_name();
    if (ctx.command == "condense") return cmd_condense(ctx);
    if (ctx.command == "unlearn") return cmd_unlearn(ctx, o.from);
    if (ctx.command == "eval") return cmd_eval(ctx, o.from, o.model);
    return cmd_attack(ctx);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const DimensionError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const CheckpointError& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  } catch (const NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace tcgu::cli
