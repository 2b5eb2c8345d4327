#include "tcgu/graphdata/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "tcgu/graphdata/binary.hpp"

namespace tcgu {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void ingest_fail(const fs::path& file, std::size_t line, const std::string& what) {
  throw IngestionError(file.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && line[j] != '\t' && line[j] != '\r') ++j;
    std::string_view f = line.substr(i, j - i);
    while (!f.empty() && f.back() == ' ') f.remove_suffix(1);
    out.push_back(f);
    i = j + 1;
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

struct CsvLine {
  std::size_t number;
  std::vector<std::string_view> fields;
};

/// Non-empty lines; a first line whose first field is not numeric is
/// treated as a header and skipped.
std::vector<CsvLine> read_csv(const fs::path& file, std::string& storage) {
  std::ifstream f(file);
  if (!f) throw IngestionError("cannot open " + file.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  storage = ss.str();
  std::vector<CsvLine> out;
  std::string_view all(storage);
  std::size_t line_no = 0;
  while (!all.empty()) {
    const std::size_t nl = all.find('\n');
    std::string_view line = all.substr(0, nl);
    all = nl == std::string_view::npos ? std::string_view() : all.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto fields = split_fields(line);
    if (out.empty() && line_no == 1 && !parse_number<double>(fields.front())) continue;
    out.push_back({line_no, std::move(fields)});
  }
  return out;
}

std::vector<int> resolve_labels(const std::vector<std::string>& names, const fs::path& file) {
  bool numeric = true;
  for (const auto& s : names) numeric = numeric && parse_number<int>(s).has_value();
  std::vector<int> out(names.size());
  if (numeric) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      out[i] = *parse_number<int>(names[i]);
      if (out[i] < 0) ingest_fail(file, 0, "negative label id " + names[i]);
    }
    return out;
  }
  std::set<std::string> uniq(names.begin(), names.end());
  std::map<std::string, int> id;
  for (const auto& s : uniq) id.emplace(s, static_cast<int>(id.size()));
  for (std::size_t i = 0; i < names.size(); ++i) out[i] = id.at(names[i]);
  return out;
}

AttributedGraph finish(std::size_t n, std::vector<Edge> edges, Tensor x, std::vector<int> y) {
  const int c = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
  try {
    return make_graph(n, edges, std::move(x), std::move(y), c);
  } catch (const ValidationError& e) {
    throw IngestionError(e.what());
  }
}

AttributedGraph load_csv_dir(const fs::path& dir) {
  std::string fbuf, ebuf, lbuf;
  const fs::path ffile = dir / "features.csv", efile = dir / "edges.csv", lfile = dir / "labels.csv";

  const auto frows = read_csv(ffile, fbuf);
  const std::size_t n = frows.size();
  const std::size_t width = n ? frows.front().fields.size() : 0;
  Tensor x(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = frows[i];
    if (row.fields.size() != width) {
      ingest_fail(ffile, row.number, "ragged feature row: " + std::to_string(row.fields.size()) +
                                         " values, expected " + std::to_string(width));
    }
    for (std::size_t k = 0; k < width; ++k) {
      const auto v = parse_number<double>(row.fields[k]);
      if (!v) ingest_fail(ffile, row.number, "non-numeric feature '" + std::string(row.fields[k]) + "'");
      x(i, k) = *v;
    }
  }

  std::vector<Edge> edges;
  std::map<Edge, std::size_t> first_seen;
  for (const auto& row : read_csv(efile, ebuf)) {
    if (row.fields.size() < 2) ingest_fail(efile, row.number, "expected src,dst");
    const auto u = parse_number<std::uint32_t>(row.fields[0]);
    const auto v = parse_number<std::uint32_t>(row.fields[1]);
    if (!u || !v) ingest_fail(efile, row.number, "non-integer node id");
    if (*u >= n || *v >= n) {
      ingest_fail(efile, row.number, "edge references unknown node (N=" + std::to_string(n) + ")");
    }
    const auto [it, fresh] = first_seen.emplace(Edge{*u, *v}, row.number);
    if (!fresh) {
      ingest_fail(efile, row.number, "duplicate edge " + std::to_string(*u) + "," + std::to_string(*v) +
                                         " (first at line " + std::to_string(it->second) + ")");
    }
    edges.emplace_back(*u, *v);
  }

  std::vector<std::string> names(n);
  std::vector<char> has(n, 0);
  for (const auto& row : read_csv(lfile, lbuf)) {
    if (row.fields.size() < 2) ingest_fail(lfile, row.number, "expected node,label");
    const auto v = parse_number<std::uint32_t>(row.fields[0]);
    if (!v || *v >= n) ingest_fail(lfile, row.number, "label for unknown node '" + std::string(row.fields[0]) + "'");
    if (has[*v]) ingest_fail(lfile, row.number, "second label for node " + std::to_string(*v));
    if (row.fields[1].empty()) ingest_fail(lfile, row.number, "empty label");
    has[*v] = 1;
    names[*v] = std::string(row.fields[1]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!has[i]) throw IngestionError(lfile.string() + ": node " + std::to_string(i) + " has no label");
  }
  return finish(n, std::move(edges), std::move(x), resolve_labels(names, lfile));
}

AttributedGraph load_json(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw IngestionError("cannot open " + file.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError(file.string() + ": " + e.what());
  }
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw IngestionError(file.string() + ": missing key \"" + key + "\"");
    return j.at(key);
  };
  try {
    const auto n = need("n").get<std::size_t>();
    const auto& xj = need("x");
    if (!xj.is_array() || xj.size() != n) throw IngestionError(file.string() + ": \"x\" must have n rows");
    const std::size_t width = n ? xj.at(0).size() : 0;
    Tensor x(n, width);
    for (std::size_t i = 0; i < n; ++i) {
      if (xj[i].size() != width) {
        throw IngestionError(file.string() + ": ragged feature row " + std::to_string(i) + ": " +
                             std::to_string(xj[i].size()) + " values, expected " + std::to_string(width));
      }
      for (std::size_t k = 0; k < width; ++k) x(i, k) = xj[i][k].get<double>();
    }
    std::vector<Edge> edges;
    std::set<Edge> seen;
    const auto& ej = need("edges");
    for (std::size_t k = 0; k < ej.size(); ++k) {
      const Edge e{ej[k].at(0).get<std::uint32_t>(), ej[k].at(1).get<std::uint32_t>()};
      if (e.first >= n || e.second >= n) {
        throw IngestionError(file.string() + ": edge " + std::to_string(k) + " references unknown node");
      }
      if (!seen.insert(e).second) throw IngestionError(file.string() + ": duplicate edge at index " + std::to_string(k));
      edges.push_back(e);
    }
    const auto& yj = need("y");
    if (yj.size() != n) throw IngestionError(file.string() + ": \"y\" must have n entries");
    std::vector<std::string> names;
    for (const auto& v : yj) names.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    return finish(n, std::move(edges), std::move(x), resolve_labels(names, file));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(file.string() + ": " + e.what());
  }
}

}  // namespace

GraphFormat parse_graph_format(std::string_view name) {
  if (name == "csv" || name == "edge-list-csv") return GraphFormat::kEdgeListCsv;
  if (name == "json" || name == "json-graph") return GraphFormat::kJsonGraph;
  if (name == "binary" || name == "tcgu") return GraphFormat::kBinary;
  throw ValidationError("unknown graph format '" + std::string(name) + "' (csv|json|binary)");
}

GraphFormat guess_graph_format(const fs::path& path) {
  if (fs::is_directory(path)) return GraphFormat::kEdgeListCsv;
  if (path.extension() == ".json") return GraphFormat::kJsonGraph;
  return GraphFormat::kBinary;
}

AttributedGraph load_graph(const fs::path& path, GraphFormat format) {
  switch (format) {
    case GraphFormat::kEdgeListCsv: return load_csv_dir(path);
    case GraphFormat::kJsonGraph: return load_json(path);
    case GraphFormat::kBinary: return load_graph_binary(path);
  }
  throw ValidationError("unknown graph format");
}

void save_graph_json(const AttributedGraph& g, const fs::path& path) {
  nlohmann::json j;
  j["n"] = g.num_nodes();
  auto edges = nlohmann::json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  auto x = nlohmann::json::array();
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto r = g.features.row(i);
    x.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["x"] = std::move(x);
  j["y"] = g.labels;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << j.dump();
}

}  // namespace tcgu
