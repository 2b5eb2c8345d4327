#pragma once

#include <filesystem>
#include <string_view>

#include "tcgu/graphdata/graph.hpp"

namespace tcgu {

enum class GraphFormat {
  /// Directory with edges.csv (`src,dst`), features.csv (one row per node)
  /// and labels.csv (`node,label`).
  kEdgeListCsv,
  /// {"n":…, "edges":[[u,v],…], "x":[[…],…], "y":[…]}
  kJsonGraph,
  /// TCGU checkpoint holding a graph section.
  kBinary,
};

/// Parses "csv", "json" or "binary".
GraphFormat parse_graph_format(std::string_view name);
/// Guesses from the path: directories are CSV, *.json is JSON, else binary.
GraphFormat guess_graph_format(const std::filesystem::path& path);

/// Loads and validates a graph. Directed edge lists are symmetrised and
/// self-loops dropped; a repeated identical line is an error, while an edge
/// listed once in each direction is accepted. Labels may be integers or
/// names; names are mapped to ids in sorted order.
AttributedGraph load_graph(const std::filesystem::path& path, GraphFormat format);

void save_graph_json(const AttributedGraph& g, const std::filesystem::path& path);

}  // namespace tcgu
