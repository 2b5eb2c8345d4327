#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tcgu/cli/cli.hpp"
#include "tcgu/graphdata/hash.hpp"
#include "tcgu/graphdata/io.hpp"
#include "tcgu/graphdata/sbm.hpp"
#include "toml.hpp"

namespace tcgu {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SplitSpec, train, val, test, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs, lr, weight_decay, dropout, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CondenseConfig, r_cond, hops, w_loop, lambda_c, lambda_f, steps, tau1,
                                                tau2, eta1, eta2, delta, mlp_hidden, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TransferConfig, rank, steps, sample_interval, trajectory_epochs,
                                                trajectory_samples, queue_capacity, lambda_f, lambda_r, tau_sim, tau_r,
                                                tau1, tau2, eta1, eta2, log_form, hops, w_loop, lambda_c,
                                                trajectory_lr, trajectory_weight_decay, plugin_stddev, seed)

namespace cli {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataConfig, path, format, sbm, sbm_seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(UnlearnConfig, kind, ratio, request, sequential)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, mia, baseline, edge_attack)

namespace {

nlohmann::json gnn_to_json(const GnnArch& a) {
  return {{"kind", std::string(to_string(a.kind))}, {"hidden", a.hidden}, {"layers", a.layers},
          {"hops", a.hops},                          {"w_loop", a.w_loop}};
}

GnnArch gnn_from_json(const nlohmann::json& j) {
  GnnArch a{GnnKind::kGcn, 0, 256, 0};
  a.kind = parse_gnn_kind(j.value("kind", std::string("gcn")));
  a.hidden = j.value("hidden", a.hidden);
  a.layers = j.value("layers", a.layers);
  a.hops = j.value("hops", a.hops);
  a.w_loop = j.value("w_loop", a.w_loop);
  return a;
}

nlohmann::json toml_to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = n.as_array()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = n.as_string()) return v->get();
  if (const auto* v = n.as_integer()) return v->get();
  if (const auto* v = n.as_floating_point()) return v->get();
  if (const auto* v = n.as_boolean()) return v->get();
  throw ValidationError("unsupported TOML value (dates and times are not configuration values)");
}

bool is_number(const nlohmann::json& j) { return j.is_number(); }

}  // namespace

void RunConfig::validate() const {
  if (!data.path.empty() && !data.sbm.empty()) throw ValidationError("give only one of data.path and data.sbm");
  if (!data.sbm.empty() && data.sbm != "cora_like" && data.sbm != "small") {
    throw ValidationError("data.sbm must be cora_like or small, got '" + data.sbm + "'");
  }
  if (data.format != "auto") (void)parse_graph_format(data.format);
  split.validate();
  GnnArch g = gnn;
  g.in_dim = g.out_dim = 1;
  g.validate();
  train.validate();
  condense.validate();
  transfer.validate();
  (void)parse_deletion_kind(unlearn.kind);
  if (!(unlearn.ratio > 0 && unlearn.ratio < 1)) throw ValidationError("unlearn.ratio must lie in (0, 1)");
  if (!unlearn.sequential.empty()) (void)parse_sequential(unlearn.sequential);
  for (double r : eval.edge_attack) {
    if (!(r > 0 && r <= 1)) throw ValidationError("edge attack ratios must lie in (0, 1]");
  }
  if (seeds == 0) throw ValidationError("seeds must be at least 1");
  if (jobs == 0) throw ValidationError("jobs must be at least 1");
  if (out.empty()) throw ValidationError("an output directory is required");
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {{"data", c.data},         {"split", c.split},       {"gnn", gnn_to_json(c.gnn)},
          {"train", c.train},       {"condense", c.condense}, {"transfer", c.transfer},
          {"unlearn", c.unlearn},   {"eval", c.eval},         {"seed", c.seed},
          {"seeds", c.seeds},       {"jobs", c.jobs},         {"out", c.out}};
}

RunConfig config_from_json(const nlohmann::json& j) {
  nlohmann::json full = config_to_json(RunConfig{});
  merge_config(full, j);
  RunConfig c;
  try {
    c.data = full["data"].get<DataConfig>();
    c.split = full["split"].get<SplitSpec>();
    c.gnn = gnn_from_json(full["gnn"]);
    c.train = full["train"].get<TrainConfig>();
    c.condense = full["condense"].get<CondenseConfig>();
    c.transfer = full["transfer"].get<TransferConfig>();
    c.unlearn = full["unlearn"].get<UnlearnConfig>();
    c.eval = full["eval"].get<EvalConfig>();
    c.seed = full["seed"].get<std::uint64_t>();
    c.seeds = full["seeds"].get<std::size_t>();
    c.jobs = full["jobs"].get<std::size_t>();
    c.out = full["out"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& where) {
  if (!patch.is_object()) throw ValidationError("configuration " + (where.empty() ? "root" : where) + " must be a table");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ValidationError("unknown configuration key '" + key + "'");
    nlohmann::json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_config(slot, *it, key);
      continue;
    }
    const bool compatible = slot.type() == it->type() || (is_number(slot) && is_number(*it)) ||
                            (slot.is_array() && it->is_array());
    if (!compatible) throw ValidationError("configuration key '" + key + "' has the wrong type");
    // A float default given an integer value stays a float.
    if (slot.is_number_float() && it->is_number()) {
      slot = it->get<double>();
    } else if (slot.is_number_unsigned() && it->is_number()) {
      if (it->is_number_float() || (it->is_number_integer() && it->get<std::int64_t>() < 0)) {
        throw ValidationError("configuration key '" + key + "' must be a non-negative integer");
      }
      slot = it->get<std::uint64_t>();
    } else {
      slot = *it;
    }
  }
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
  try {
    return toml_to_json(toml::parse(ss.str(), path.string()));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << e.source().begin.line << ": " << e.description();
    throw ValidationError(msg.str());
  }
}

std::uint64_t config_hash(const RunConfig& cfg) {
  nlohmann::json j = config_to_json(cfg);
  j.erase("out");
  j.erase("jobs");
  return Fnv1a().add(std::string_view(j.dump())).value();
}

AttributedGraph load_dataset(const DataConfig& data, const SplitSpec& split) {
  if (data.path.empty() == data.sbm.empty()) throw ValidationError("give exactly one of --data and --sbm");
  AttributedGraph g;
  if (!data.sbm.empty()) {
    SbmSpec s = SbmSpec::cora_like(data.sbm_seed);
    if (data.sbm == "small") {
      s = SbmSpec{};
      s.nodes = 400;
      s.features = 32;
      s.signal = 0.3;
      s.seed = data.sbm_seed;
      s.with_degree(6.0, 0.9);
    }
    g = generate_sbm(s);
  } else {
    std::filesystem::path p = data.path;
    if (p.is_relative() && !std::filesystem::exists(p)) {
      if (const char* root = std::getenv("TCGU_DATA_DIR"); root && *root) p = std::filesystem::path(root) / p;
    }
    if (!std::filesystem::exists(p)) {
      throw ValidationError("dataset " + data.path + " not found (relative paths are also tried under $TCGU_DATA_DIR)");
    }
    const GraphFormat f = data.format == "auto" ? guess_graph_format(p) : parse_graph_format(data.format);
    g = load_graph(p, f);
  }
  return make_split(g, split);
}

std::string dataset_name(const DataConfig& data) {
  if (!data.sbm.empty()) return "sbm:" + data.sbm + ":" + std::to_string(data.sbm_seed);
  return data.path;
}

DeletionRequest read_request(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read deletion request " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    DeletionRequest r;
    r.kind = parse_deletion_kind(j.at("kind").get<std::string>());
    r.ratio = j.value("ratio", 0.0);
    r.seed = j.value("seed", std::uint64_t{0});
    if (r.kind == DeletionKind::kEdge) {
      for (const auto& e : j.at("edges")) {
        auto u = e.at(0).get<std::uint32_t>(), v = e.at(1).get<std::uint32_t>();
        if (u == v) throw ValidationError("deletion request lists a self-loop");
        r.edges.emplace_back(std::min(u, v), std::max(u, v));
      }
      std::sort(r.edges.begin(), r.edges.end());
      r.edges.erase(std::unique(r.edges.begin(), r.edges.end()), r.edges.end());
    } else {
      r.nodes = j.at("nodes").get<std::vector<std::uint32_t>>();
      std::sort(r.nodes.begin(), r.nodes.end());
      r.nodes.erase(std::unique(r.nodes.begin(), r.nodes.end()), r.nodes.end());
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed deletion request: " + e.what());
  }
}

nlohmann::json request_to_json(const DeletionRequest& r) {
  nlohmann::json j = {{"kind", std::string(to_string(r.kind))}, {"ratio", r.ratio}, {"seed", r.seed}};
  if (r.kind == DeletionKind::kEdge) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [u, v] : r.edges) edges.push_back({u, v});
    j["edges"] = std::move(edges);
  } else {
    j["nodes"] = r.nodes;
  }
  return j;
}

std::pair<std::size_t, double> parse_sequential(const std::string& spec) {
  const auto x = spec.find('x');
  if (x == std::string::npos || x == 0 || x + 1 == spec.size()) {
    throw ValidationError("sequential protocol must look like 5x0.05, got '" + spec + "'");
  }
  std::size_t n = 0;
  double r = 0;
  try {
    std::size_t used = 0;
    n = std::stoul(spec.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("count");
    const std::string tail = spec.substr(x + 1);
    r = std::stod(tail, &used);
    if (used != tail.size()) throw std::invalid_argument("ratio");
  } catch (const std::exception&) {
    throw ValidationError("sequential protocol must look like 5x0.05, got '" + spec + "'");
  }
  if (n == 0 || !(r > 0) || n * r > 0.5 + 1e-12) {
    throw ValidationError("sequential protocol needs N >= 1, R > 0 and N * R <= 0.5");
  }
  return {n, r};
}

}  // namespace cli
}  // namespace tcgu
