#include "tcgu/graphdata/sbm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tcgu {

void SbmSpec::validate() const {
  if (nodes < 2 || classes < 1 || static_cast<std::size_t>(classes) > nodes) {
    throw ValidationError("SBM needs at least 2 nodes and 1..N classes");
  }
  if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1) throw ValidationError("SBM probabilities must lie in [0, 1]");
  if (features == 0) throw ValidationError("SBM needs at least one feature");
  if (feature_mode == FeatureMode::kBagOfWords && (signal < 0 || signal > 1)) {
    throw ValidationError("bag-of-words signal is a probability");
  }
}

SbmSpec& SbmSpec::with_degree(double mean_degree, double homophily) {
  const double n = static_cast<double>(nodes);
  const double block = n / classes;
  const double intra_pairs_per_node = block - 1.0;
  const double inter_pairs_per_node = n - block;
  p_in = std::min(1.0, mean_degree * homophily / std::max(intra_pairs_per_node, 1.0));
  p_out = inter_pairs_per_node > 0 ? std::min(1.0, mean_degree * (1.0 - homophily) / inter_pairs_per_node) : 0.0;
  return *this;
}

SbmSpec SbmSpec::cora_like(std::uint64_t seed) {
  SbmSpec s;
  s.nodes = 2708;
  s.classes = 7;
  s.features = 1433;
  s.feature_mode = FeatureMode::kBagOfWords;
  s.signal = 0.35;
  s.words_per_node = 18;
  s.row_normalize = true;
  s.seed = seed;
  // Cora: 5429 edges over 2708 nodes, edge homophily about 0.81.
  s.with_degree(2.0 * 5429.0 / 2708.0, 0.81);
  return s;
}

AttributedGraph generate_sbm(const SbmSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t n = spec.nodes;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(spec.classes));

  std::vector<Edge> edges;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      const double p = labels[u] == labels[v] ? spec.p_in : spec.p_out;
      if (unit(rng) < p) edges.emplace_back(u, v);
    }
  }

  Tensor x(n, spec.features);
  const auto cls = static_cast<std::size_t>(spec.classes);
  if (spec.feature_mode == SbmSpec::FeatureMode::kGaussian) {
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor mu(cls, spec.features);
    for (double& v : mu.data()) v = spec.signal * g(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const auto m = mu.row(static_cast<std::size_t>(labels[i]));
      auto r = x.row(i);
      for (std::size_t f = 0; f < spec.features; ++f) r[f] = m[f] + spec.noise * g(rng);
    }
  } else {
    // Each class owns a contiguous topic of roughly F / C words.
    const std::size_t topic = std::max<std::size_t>(1, spec.features / cls);
    std::uniform_int_distribution<std::size_t> any(0, spec.features - 1);
    std::uniform_int_distribution<std::size_t> in_topic(0, topic - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (static_cast<std::size_t>(labels[i]) * topic) % spec.features;
      auto r = x.row(i);
      for (std::size_t w = 0; w < spec.words_per_node; ++w) {
        const std::size_t f = unit(rng) < spec.signal ? (base + in_topic(rng)) % spec.features : any(rng);
        r[f] = 1.0;
      }
    }
  }
  if (spec.row_normalize) {
    for (std::size_t i = 0; i < n; ++i) {
      auto r = x.row(i);
      double s = 0.0;
      for (double v : r) s += std::abs(v);
      if (s > 0) {
        for (double& v : r) v /= s;
      }
    }
  }
  return make_graph(n, edges, std::move(x), std::move(labels), spec.classes);
}

}  // namespace tcgu
