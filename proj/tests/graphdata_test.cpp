#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "doctest.h"
#include "tcgu/graphdata/binary.hpp"
#include "tcgu/graphdata/deletion.hpp"
#include "tcgu/graphdata/io.hpp"
#include "tcgu/graphdata/sbm.hpp"
#include "tcgu/graphdata/split.hpp"

using namespace tcgu;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("tcgu_gd_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  void write(const std::string& name, const std::string& body) const { std::ofstream(path / name) << body; }
};

AttributedGraph triangle() {
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 0}};
  return make_graph(3, e, Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}}), {0, 1, 0});
}

void check_structure(const AttributedGraph& g) {
  CHECK_NOTHROW(g.validate());
  CHECK(g.adjacency->is_symmetric());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) CHECK_FALSE(g.has_edge(i, i));
}

AttributedGraph split_sbm(std::size_t n, int c, std::uint64_t seed) {
  SbmSpec s;
  s.nodes = n;
  s.classes = c;
  s.features = 8;
  s.seed = seed;
  s.with_degree(4.0, 0.8);
  SplitSpec sp;
  sp.seed = seed;
  return make_split(generate_sbm(s), sp);
}

}  // namespace

TEST_CASE("csv loader: triangle gives symmetric adjacency with 6 nonzeros") {
  TempDir d;
  d.write("edges.csv", "src,dst\n0,1\n1,2\n2,0\n");
  d.write("features.csv", "1,0\n0,1\n1,1\n");
  d.write("labels.csv", "node,label\n0,a\n1,b\n2,a\n");
  const AttributedGraph g = load_graph(d.path, GraphFormat::kEdgeListCsv);
  CHECK(g.num_nodes() == 3);
  CHECK(g.adjacency->nnz() == 6);
  CHECK(g.num_edges() == 3);
  CHECK(g.num_classes == 2);
  CHECK(g.labels == std::vector<int>{0, 1, 0});
  check_structure(g);
}

TEST_CASE("csv loader: empty edge file yields zero adjacency") {
  TempDir d;
  d.write("edges.csv", "");
  d.write("features.csv", "1\n2\n3\n");
  d.write("labels.csv", "0,0\n1,1\n2,2\n");
  const AttributedGraph g = load_graph(d.path, GraphFormat::kEdgeListCsv);
  CHECK(g.num_nodes() == 3);
  CHECK(g.adjacency->nnz() == 0);
  CHECK(max_abs_diff(g.adjacency->to_dense(), Tensor(3, 3)) == 0.0);
}

TEST_CASE("csv loader: directed pairs are symmetrised and self-loops dropped") {
  TempDir d;
  d.write("edges.csv", "0,1\n1,0\n2,2\n");
  d.write("features.csv", "1\n2\n3\n");
  d.write("labels.csv", "0,0\n1,1\n2,0\n");
  const AttributedGraph g = load_graph(d.path, GraphFormat::kEdgeListCsv);
  CHECK(g.num_edges() == 1);
  CHECK(g.adjacency->nnz() == 2);
}

TEST_CASE("csv loader errors carry file and line context") {
  TempDir d;
  d.write("features.csv", "1,2\n3,4\n5,6\n");
  d.write("labels.csv", "0,0\n1,1\n2,0\n");
  SUBCASE("duplicate edge") {
    d.write("edges.csv", "0,1\n1,2\n0,1\n");
    CHECK_THROWS_WITH_AS(load_graph(d.path, GraphFormat::kEdgeListCsv),
                         doctest::Contains("edges.csv:3: duplicate edge"), IngestionError);
  }
  SUBCASE("ragged feature row") {
    d.write("edges.csv", "0,1\n");
    d.write("features.csv", "1,2\n3\n5,6\n");
    CHECK_THROWS_WITH_AS(load_graph(d.path, GraphFormat::kEdgeListCsv),
                         doctest::Contains("features.csv:2: ragged"), IngestionError);
  }
  SUBCASE("label for unknown node") {
    d.write("edges.csv", "0,1\n");
    d.write("labels.csv", "0,0\n1,1\n2,0\n7,1\n");
    CHECK_THROWS_WITH_AS(load_graph(d.path, GraphFormat::kEdgeListCsv),
                         doctest::Contains("labels.csv:4"), IngestionError);
  }
  SUBCASE("node without label") {
    d.write("edges.csv", "0,1\n");
    d.write("labels.csv", "0,0\n1,1\n");
    CHECK_THROWS_AS(load_graph(d.path, GraphFormat::kEdgeListCsv), IngestionError);
  }
  SUBCASE("edge to unknown node") {
    d.write("edges.csv", "0,9\n");
    CHECK_THROWS_WITH_AS(load_graph(d.path, GraphFormat::kEdgeListCsv),
                         doctest::Contains("edges.csv:1"), IngestionError);
  }
}

TEST_CASE("json loader and json writer round-trip") {
  TempDir d;
  d.write("g.json", R"({"n":4,"edges":[[0,1],[2,3]],"x":[[1,0],[0,1],[1,1],[0,0]],"y":[1,0,1,0]})");
  const AttributedGraph g = load_graph(d.path / "g.json", GraphFormat::kJsonGraph);
  CHECK(g.num_nodes() == 4);
  CHECK(g.num_edges() == 2);
  CHECK(g.has_edge(3, 2));
  save_graph_json(g, d.path / "h.json");
  const AttributedGraph h = load_graph(d.path / "h.json", GraphFormat::kJsonGraph);
  CHECK(content_hash(g) == content_hash(h));

  d.write("bad.json", R"({"n":2,"edges":[],"x":[[1,0],[1]],"y":[0,1]})");
  CHECK_THROWS_WITH_AS(load_graph(d.path / "bad.json", GraphFormat::kJsonGraph), doctest::Contains("ragged"),
                       IngestionError);
  d.write("trunc.json", R"({"n":2,"edges":[)");
  CHECK_THROWS_AS(load_graph(d.path / "trunc.json", GraphFormat::kJsonGraph), IngestionError);
}

TEST_CASE("make_split: exact fractions and determinism") {
  const AttributedGraph base = split_sbm(100, 4, 1);
  SplitSpec spec;
  spec.seed = 42;
  const AttributedGraph a = make_split(base, spec);
  CHECK(a.train_nodes().size() == 70);
  CHECK(a.val_nodes().size() == 10);
  CHECK(a.test_nodes().size() == 20);
  const AttributedGraph b = make_split(base, spec);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(a.lineage == b.lineage);
  spec.seed = 43;
  CHECK(make_split(base, spec).train != a.train);
  check_structure(a);
}

TEST_CASE("make_split: 2708 nodes gives 1895/270/541") {
  SbmSpec s;
  s.nodes = 2708;
  s.classes = 7;
  s.features = 2;
  s.p_in = 0.0;
  s.p_out = 0.0;
  const AttributedGraph g = make_split(generate_sbm(s), SplitSpec{});
  CHECK(g.train_nodes().size() == 1895);
  CHECK(g.val_nodes().size() == 270);
  CHECK(g.test_nodes().size() == 541);
}

TEST_CASE("make_split with N=10, C=7: all classes in train or an explicit error") {
  // Labels 0..6 then 0,1,2. A 7-node train set covers every class exactly
  // when the 3 excluded nodes avoid the singleton classes 3..6 and take at
  // most one node from each duplicated pair. Enumerate to get the odds.
  const std::vector<int> y{0, 1, 2, 3, 4, 5, 6, 0, 1, 2};
  std::size_t good = 0, total = 0;
  for (unsigned mask = 0; mask < 1024; ++mask) {
    if (__builtin_popcount(mask) != 3) continue;
    ++total;
    std::vector<int> cnt(7, 0);
    for (unsigned i = 0; i < 10; ++i) {
      if (!(mask >> i & 1u)) ++cnt[static_cast<std::size_t>(y[i])];
    }
    good += std::all_of(cnt.begin(), cnt.end(), [](int c) { return c > 0; });
  }
  REQUIRE(total == 120);
  REQUIRE(good == 8);

  const AttributedGraph g = make_graph(10, {}, Tensor(10, 1), y, 7);
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SplitSpec spec;
    spec.seed = seed;
    try {
      const AttributedGraph s = make_split(g, spec);
      CHECK_NOTHROW(s.validate(true));
      ++successes;
    } catch (const ValidationError&) {
      // (14/15)^100 per seed: possible but rare
    }
  }
  CHECK(successes >= 38);

  // Eight classes can never fit in seven train slots.
  const AttributedGraph h = make_graph(10, {}, Tensor(10, 1), {0, 1, 2, 3, 4, 5, 6, 7, 0, 1}, 8);
  CHECK_THROWS_AS(make_split(h, SplitSpec{}), ValidationError);
}

TEST_CASE("make_split rejects invalid fractions") {
  const AttributedGraph g = triangle();
  CHECK_THROWS_AS(make_split(g, SplitSpec{0.7, 0.2, 0.2, 0}), ValidationError);
  CHECK_THROWS_AS(make_split(g, SplitSpec{0.0, 0.1, 0.2, 0}), ValidationError);
}

TEST_CASE("sample_deletion: counts and determinism") {
  SbmSpec s;
  s.nodes = 2708;
  s.classes = 7;
  s.features = 2;
  s.p_in = 0.002;
  s.p_out = 0.0002;
  const AttributedGraph g = make_split(generate_sbm(s), SplitSpec{});
  REQUIRE(g.train_nodes().size() == 1895);
  const DeletionRequest r = sample_deletion(g, DeletionKind::kNode, 0.20, 9);
  CHECK(r.nodes.size() == 379);
  for (auto v : r.nodes) CHECK(g.train[v]);
  CHECK(sample_deletion(g, DeletionKind::kNode, 0.20, 9).nodes == r.nodes);
  CHECK(sample_deletion(g, DeletionKind::kNode, 0.20, 10).nodes != r.nodes);

  const DeletionRequest e = sample_deletion(g, DeletionKind::kEdge, 0.1, 3);
  CHECK(e.edges.size() == static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(g.num_edges()))));
  for (auto [u, v] : e.edges) {
    CHECK((g.train[u] || g.train[v]));
    CHECK(g.has_edge(u, v));
  }
  CHECK_THROWS_AS(sample_deletion(g, DeletionKind::kNode, 1e-5, 1), ValidationError);
  CHECK_THROWS_AS(sample_deletion(g, DeletionKind::kNode, 0.0, 1), ValidationError);
}

TEST_CASE("sample_deletion: half of 4 train edges gives 2") {
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  AttributedGraph g = make_graph(4, e, Tensor(4, 1), {0, 1, 0, 1});
  g.train = {1, 1, 1, 1};
  g.val = {0, 0, 0, 0};
  g.test = {0, 0, 0, 0};
  CHECK(sample_deletion(g, DeletionKind::kEdge, 0.5, 1).edges.size() == 2);
}

TEST_CASE("apply_deletion on the triangle") {
  const AttributedGraph g = triangle();
  SUBCASE("node 1 removed leaves the single edge 0-2 relabelled to 0-1") {
    DeletionRequest r;
    r.kind = DeletionKind::kNode;
    r.nodes = {1};
    const AttributedGraph out = apply_deletion(g, r);
    CHECK(out.num_nodes() == 2);
    CHECK(out.num_edges() == 1);
    CHECK(out.has_edge(0, 1));
    CHECK(out.original_ids == std::vector<std::uint32_t>{0, 2});
    CHECK(out.features(1, 0) == 5.0);
    CHECK(g.num_nodes() == 3);
    check_structure(out);
  }
  SUBCASE("edge (0,1) leaves 4 nonzeros") {
    DeletionRequest r;
    r.kind = DeletionKind::kEdge;
    r.edges = {{0, 1}};
    const AttributedGraph out = apply_deletion(g, r);
    CHECK(out.adjacency->nnz() == 4);
    CHECK_FALSE(out.has_edge(1, 0));
    CHECK(g.adjacency->nnz() == 6);
    const AttributedGraph twice = apply_deletion(out, r);
    CHECK(content_hash(twice) == content_hash(out));
  }
  SUBCASE("feature request zeroes the row only") {
    DeletionRequest r;
    r.kind = DeletionKind::kFeature;
    r.nodes = {0};
    const AttributedGraph out = apply_deletion(g, r);
    CHECK(out.features(0, 0) == 0.0);
    CHECK(out.features(0, 1) == 0.0);
    CHECK(out.features(1, 0) == 3.0);
    CHECK(out.adjacency->nnz() == 6);
    CHECK(content_hash(apply_deletion(out, r)) == content_hash(out));
  }
  SUBCASE("dangling target") {
    DeletionRequest r;
    r.kind = DeletionKind::kNode;
    r.nodes = {5};
    CHECK_THROWS_AS(apply_deletion(g, r), ValidationError);
  }
}

TEST_CASE("property: deletions keep structural invariants") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const AttributedGraph g = split_sbm(120, 3, seed);
    for (DeletionKind k : {DeletionKind::kNode, DeletionKind::kEdge, DeletionKind::kFeature}) {
      const DeletionRequest r = sample_deletion(g, k, 0.2, seed + 100);
      const AttributedGraph out = apply_deletion(g, r);
      check_structure(out);
      CHECK(out.lineage == g.lineage);
      if (k == DeletionKind::kNode) {
        CHECK(out.num_nodes() == g.num_nodes() - r.nodes.size());
        // No surviving edge maps back to a deleted node.
        for (auto [u, v] : out.edges()) {
          CHECK_FALSE(std::binary_search(r.nodes.begin(), r.nodes.end(), out.original_ids[u]));
          CHECK_FALSE(std::binary_search(r.nodes.begin(), r.nodes.end(), out.original_ids[v]));
          CHECK(g.has_edge(out.original_ids[u], out.original_ids[v]));
        }
        CHECK(out.train_nodes().size() == g.train_nodes().size() - r.nodes.size());
        CHECK(out.test_nodes().size() == g.test_nodes().size());
      } else {
        CHECK(content_hash(apply_deletion(out, r)) == content_hash(out));
      }
    }
  }
}

TEST_CASE("inject_adversarial_edges") {
  const AttributedGraph g = split_sbm(200, 4, 5);
  CHECK_THROWS_AS(inject_adversarial_edges(g, 0.0, 1), ValidationError);
  for (double ratio : {0.1, 0.5, 1.0}) {
    const EdgeInjection inj = inject_adversarial_edges(g, ratio, 7);
    CHECK(inj.edges.size() == static_cast<std::size_t>(std::floor(ratio * static_cast<double>(g.num_edges()))));
    CHECK(inj.corrupted.num_edges() == g.num_edges() + inj.edges.size());
    for (auto [u, v] : inj.edges) {
      CHECK(g.labels[u] != g.labels[v]);
      CHECK_FALSE(g.has_edge(u, v));
      CHECK(inj.corrupted.has_edge(v, u));
    }
    check_structure(inj.corrupted);
    DeletionRequest undo;
    undo.kind = DeletionKind::kEdge;
    undo.edges = inj.edges;
    CHECK(content_hash(apply_deletion(inj.corrupted, undo)) == content_hash(g));
  }
  // Two classes of one node each: a single cross-class pair exists.
  const AttributedGraph tiny = make_graph(3, std::vector<Edge>{{0, 1}, {1, 2}}, Tensor(3, 1), {0, 0, 1});
  CHECK_THROWS_AS(inject_adversarial_edges(tiny, 1.0, 1), ValidationError);
}

TEST_CASE("inject_adversarial_edges at ratio 1.0 on a Cora-scale graph") {
  const AttributedGraph g = generate_sbm(SbmSpec::cora_like(3));
  const EdgeInjection inj = inject_adversarial_edges(g, 1.0, 11);
  CHECK(inj.edges.size() == g.num_edges());
  CHECK(inj.corrupted.num_edges() == 2 * g.num_edges());
}

TEST_CASE("cora-like SBM matches the target scale") {
  const AttributedGraph g = generate_sbm(SbmSpec::cora_like(1));
  CHECK(g.num_nodes() == 2708);
  CHECK(g.num_features() == 1433);
  CHECK(g.num_classes == 7);
  CHECK(std::abs(static_cast<double>(g.num_edges()) - 5429.0) < 250.0);
  std::size_t same = 0;
  for (auto [u, v] : g.edges()) same += g.labels[u] == g.labels[v];
  CHECK(std::abs(static_cast<double>(same) / static_cast<double>(g.num_edges()) - 0.81) < 0.03);
  CHECK(content_hash(generate_sbm(SbmSpec::cora_like(1))) == content_hash(g));
}

TEST_CASE("binary graph round-trip is bit-identical") {
  TempDir d;
  AttributedGraph g = split_sbm(60, 3, 2);
  g.features(0, 0) = -0.0;
  g.features(1, 1) = 1e-310;
  save_graph(g, d.path / "g.tcgu");
  const AttributedGraph h = load_graph(d.path / "g.tcgu", GraphFormat::kBinary);
  CHECK(content_hash(h) == content_hash(g));
  CHECK(std::signbit(h.features(0, 0)));
  CHECK(h.features(1, 1) == 1e-310);
  CHECK(h.lineage == g.lineage);
  CHECK(h.original_ids == g.original_ids);
}

TEST_CASE("binary container errors are structured") {
  const AttributedGraph g = triangle();
  const Section s = encode_graph(g);
  auto bytes = encode_container(std::span<const Section>(&s, 1));
  SUBCASE("truncated") {
    for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
      std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
      CHECK_THROWS_AS(decode_container(part), CheckpointError);
    }
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + 30);
    CHECK_THROWS_WITH(decode_container(part), doctest::Contains("truncated"));
  }
  SUBCASE("version mismatch") {
    bytes[4] = 99;
    CHECK_THROWS_WITH_AS(decode_container(bytes), doctest::Contains("format version 99"), CheckpointError);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_container(bytes), doctest::Contains("magic"), CheckpointError);
  }
  SUBCASE("flipped payload byte") {
    bytes[bytes.size() / 2] ^= 0x5a;
    CHECK_THROWS_AS(decode_container(bytes), CheckpointError);
  }
}
