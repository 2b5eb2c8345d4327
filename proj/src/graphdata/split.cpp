#include "tcgu/graphdata/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tcgu/graphdata/hash.hpp"

namespace tcgu {

void SplitSpec::validate() const {
  if (!(train > 0 && val >= 0 && test > 0)) {
    throw ValidationError("split fractions must be positive (val may be zero)");
  }
  if (train + val + test > 1.0 + 1e-12) throw ValidationError("split fractions sum to more than 1");
}

AttributedGraph make_split(const AttributedGraph& graph, const SplitSpec& spec, int max_tries) {
  spec.validate();
  const std::size_t n = graph.num_nodes();
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(spec.test * static_cast<double>(n)));
  if (n_train == 0 || n_test == 0) throw ValidationError("split leaves the train or test part empty");

  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> order(n);
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> seen(static_cast<std::size_t>(graph.num_classes), 0);
    int covered = 0;
    for (std::size_t i = 0; i < n_train; ++i) {
      char& s = seen[static_cast<std::size_t>(graph.labels[order[i]])];
      if (!s) ++covered;
      s = 1;
    }
    if (covered != graph.num_classes) continue;

    AttributedGraph out = graph;
    out.train.assign(n, 0);
    out.val.assign(n, 0);
    out.test.assign(n, 0);
    for (std::size_t i = 0; i < n_train; ++i) out.train[order[i]] = 1;
    for (std::size_t i = n_train; i < n_train + n_val; ++i) out.val[order[i]] = 1;
    for (std::size_t i = n_train + n_val; i < n_train + n_val + n_test; ++i) out.test[order[i]] = 1;
    out.lineage = Fnv1a().add<std::uint64_t>(content_hash(out)).add<std::uint64_t>(spec.seed).value();
    return out;
  }
  throw ValidationError("no split with every class in the train part after " +
                        std::to_string(max_tries) + " tries");
}

}  // namespace tcgu
