#pragma once

#include <cstdint>

#include "tcgu/graphdata/graph.hpp"

namespace tcgu {

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniform random split with floor(fraction * N) nodes per part. Resamples
/// up to `max_tries` times until every class appears in the train part, then
/// throws ValidationError. Also sets the graph lineage.
AttributedGraph make_split(const AttributedGraph& graph, const SplitSpec& spec,
                           int max_tries = 100);

}  // namespace tcgu
