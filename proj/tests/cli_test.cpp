#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tcgu/cli/cli.hpp"
#include "tcgu/graphdata/io.hpp"
#include "tcgu/graphdata/sbm.hpp"

using namespace tcgu;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result tcgu_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("tcgu_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

const std::vector<std::string> kQuick = {"--sbm",        "small", "--steps", "30", "--set", "condense.mlp_hidden=16",
                                         "--set",        "condense.r_cond=0.1", "--epochs", "40", "--hidden", "32",
                                         "--transfer-steps", "4", "-q"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("validation errors exit with 2") {
  TempDir d("validation");
  CHECK(tcgu_run({"condense", "--sbm", "small", "--ratio", "1.5", "--out", d / "c"}).code == 2);
  CHECK(tcgu_run({"condense", "--sbm", "nope", "--out", d / "c"}).code == 2);
  CHECK(tcgu_run({"condense", "--out", d / "c"}).code == 2);
  CHECK(tcgu_run({"frobnicate"}).code == 2);
  CHECK(tcgu_run({"condense", "--sbm", "small", "--set", "condense.nonsense=1", "--out", d / "c"}).code == 2);
  CHECK(tcgu_run({"condense", "--sbm", "small", "--set", "condense.steps=\"many\"", "--out", d / "c"}).code == 2);
  CHECK(tcgu_run({"condense", "--sbm", "small", "--split", "0.7,0.1", "--out", d / "c"}).code == 2);
  const Result seq = tcgu_run({"unlearn", "--from", d / "c", "--sequential", "20x0.05", "--out", d / "u"});
  CHECK(seq.code == 2);
  CHECK(tcgu_run({"--help"}).code == 0);
}

TEST_CASE("a missing checkpoint is a runtime error that says what to run") {
  TempDir d("missing");
  const Result r = tcgu_run({"unlearn", "--from", d / "nowhere", "--out", d / "u"});
  CHECK(r.code == 3);
  CHECK(r.err.find("tcgu condense") != std::string::npos);
}

TEST_CASE("configuration files: TOML and JSON, flags win over files") {
  TempDir d("config");
  {
    std::ofstream f(d / "run.toml");
    f << "seed = 4\n[condense]\nsteps = 7\nr_cond = 0.2\n[transfer]\nrank = 4\n[gnn]\nkind = \"sgc\"\n";
  }
  nlohmann::json base = cli::config_to_json(cli::RunConfig{});
  cli::merge_config(base, cli::read_config_file(d / "run.toml"));
  cli::RunConfig c = cli::config_from_json(base);
  CHECK(c.seed == 4);
  CHECK(c.condense.steps == 7);
  CHECK(c.condense.r_cond == 0.2);
  CHECK(c.transfer.rank == 4);
  CHECK(c.gnn.kind == GnnKind::kSgc);
  CHECK(c.train.epochs == 100);

  {
    std::ofstream f(d / "run.json");
    f << R"({"train": {"epochs": 12, "lr": 1}, "unlearn": {"ratio": 0.1}})";
  }
  c = cli::config_from_json(cli::read_config_file(d / "run.json"));
  CHECK(c.train.epochs == 12);
  CHECK(c.train.lr == 1.0);
  CHECK(c.unlearn.ratio == 0.1);

  {
    std::ofstream f(d / "bad.toml");
    f << "[condense\nsteps = 1\n";
  }
  CHECK_THROWS_AS(cli::read_config_file(d / "bad.toml"), ValidationError);
  nlohmann::json neg = cli::config_to_json(cli::RunConfig{});
  CHECK_THROWS_AS(cli::merge_config(neg, nlohmann::json{{"seeds", -1}}), ValidationError);

  // The file says 7 steps, the flag says 9; the manifest records the flag.
  const Result r = tcgu_run(with({"condense", "--config", d / "run.toml", "--out", d / "c"}, kQuick));
  REQUIRE(r.code == 0);
  const nlohmann::json m = read_json(d / "c/manifest.json");
  CHECK(m["configs"]["condense"]["steps"] == 30);
  CHECK(m["configs"]["transfer"]["rank"] == 4);
  CHECK(m["configs"]["seed"] == 4);
}

TEST_CASE("condense, unlearn and eval write reproducible manifests") {
  TempDir d("pipeline");
  REQUIRE(tcgu_run(with({"condense", "--out", d / "c"}, kQuick)).code == 0);
  const nlohmann::json cm = read_json(d / "c/manifest.json");
  for (const char* k : {"tool", "version", "dataset", "split_seed", "config_hash", "configs", "timings_s", "metrics",
                        "artifact_paths"}) {
    CHECK(cm.contains(k));
  }
  CHECK(cm["version"] == TCGU_VERSION);
  CHECK(cm["dataset"] == "sbm:small:0");
  CHECK(fs::exists(d / "c/condensed.tcgu"));

  const auto unlearn_args = [&](const std::string& out, const std::string& jobs) {
    return with({"unlearn", "--from", d / "c", "--seeds", "2", "--jobs", jobs, "--mia", "--baseline",
                 "--deletion-ratio", "0.2", "--out", out},
                kQuick);
  };
  REQUIRE(tcgu_run(unlearn_args(d / "u1", "1")).code == 0);
  REQUIRE(tcgu_run(unlearn_args(d / "u2", "2")).code == 0);
  const nlohmann::json m1 = read_json(d / "u1/manifest.json"), m2 = read_json(d / "u2/manifest.json");
  CHECK(m1["dataset"] == "sbm:small:0");
  CHECK(m1["config_hash"] == m2["config_hash"]);
  CHECK(m1["metrics"]["test_f1"] == m2["metrics"]["test_f1"]);
  CHECK(m1["metrics"]["mia_auc"] == m2["metrics"]["mia_auc"]);
  CHECK(m1["metrics"]["test_f1"]["n"] == 2);
  CHECK(m1["metrics"].contains("retrain_test_f1"));
  for (const auto& run : m1["runs"]) {
    CHECK(run["timings_s"]["unlearning"].get<double>() ==
          doctest::Approx(run["timings_s"]["stage2"].get<double>() + run["timings_s"]["stage3"].get<double>()).epsilon(0.01));
  }
  CHECK(fs::exists(d / "u1/metrics.csv"));

  const DeletionRequest req = cli::read_request(d / "u1/seed_0/request.json");
  CHECK(req.kind == DeletionKind::kNode);
  CHECK(!req.nodes.empty());

  const Result ev = tcgu_run({"eval", "--from", d / "c", "--model", d / "u1/seed_0/unlearned.tcgu", "--request",
                              d / "u1/seed_0/request.json", "--mia", "--out", d / "e", "-q"});
  REQUIRE(ev.code == 0);
  const nlohmann::json em = read_json(d / "e/manifest.json");
  CHECK(em["metrics"]["test_f1"] == m1["runs"][0]["metrics"]["test_f1"]);
  CHECK(em["metrics"]["mia"]["auc"].get<double>() >= 0.0);
  CHECK(fs::exists(d / "e/mia.json"));

  SUBCASE("a fixed request file is honoured") {
    std::ofstream f(d / "req.json");
    f << R"({"kind": "edge", "edges": [[0, 1], [1, 0]]})";
    f.close();
    const DeletionRequest e = cli::read_request(d / "req.json");
    CHECK(e.edges.size() == 1);
  }
  SUBCASE("sequential protocol writes a per-batch curve") {
    const Result s = tcgu_run(with({"unlearn", "--from", d / "c", "--sequential", "2x0.05", "--out", d / "s"}, kQuick));
    REQUIRE(s.code == 0);
    std::ifstream csv(d / "s/sequential.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 3);
  }
  SUBCASE("a checkpoint from another dataset is refused") {
    std::vector<std::string> other = kQuick;
    other.insert(other.end(), {"--sbm-seed", "9"});
    REQUIRE(tcgu_run(with({"condense", "--out", d / "c9"}, other)).code == 0);
    const Result bad = tcgu_run({"eval", "--from", d / "c9", "--model", d / "u1/seed_0/unlearned.tcgu", "--request",
                                 d / "u1/seed_0/request.json", "--out", d / "e9", "-q"});
    CHECK(bad.code == 3);
  }
}

TEST_CASE("edge attack emits a tsv curve") {
  TempDir d("attack");
  const Result r = tcgu_run(with({"attack-edges", "--edge-attack", "0.5,1.0", "--out", d / "a"}, kQuick));
  REQUIRE(r.code == 0);
  std::ifstream tsv(d / "a/edge_attack.tsv");
  std::string header;
  std::getline(tsv, header);
  CHECK(header.rfind("# ratio", 0) == 0);
  CHECK(tcgu_run(with({"attack-edges", "--edge-attack", "0,1.0", "--out", d / "a"}, kQuick)).code == 2);
}

TEST_CASE("relative dataset paths resolve under TCGU_DATA_DIR") {
  TempDir d("datadir");
  SbmSpec s;
  s.nodes = 120;
  s.classes = 3;
  save_graph_json(generate_sbm(s), d.path / "toy.json");
  ::setenv("TCGU_DATA_DIR", d.path.c_str(), 1);
  cli::DataConfig data;
  data.path = "toy.json";
  const AttributedGraph g = cli::load_dataset(data, SplitSpec{});
  CHECK(g.num_nodes() == 120);
  data.path = "absent.json";
  CHECK_THROWS_AS(cli::load_dataset(data, SplitSpec{}), ValidationError);
  ::unsetenv("TCGU_DATA_DIR");
}

TEST_CASE("sequential specs parse") {
  CHECK(cli::parse_sequential("5x0.05") == std::pair<std::size_t, double>{5, 0.05});
  CHECK_THROWS_AS(cli::parse_sequential("5x"), ValidationError);
  CHECK_THROWS_AS(cli::parse_sequential("x0.1"), ValidationError);
  CHECK_THROWS_AS(cli::parse_sequential("6x0.1"), ValidationError);
  CHECK_THROWS_AS(cli::parse_sequential("5y0.1"), ValidationError);
}
