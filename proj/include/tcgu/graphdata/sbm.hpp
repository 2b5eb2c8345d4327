#pragma once

#include <cstddef>
#include <cstdint>

#include "tcgu/graphdata/graph.hpp"

namespace tcgu {

/// Stochastic block model with class-dependent features.
struct SbmSpec {
  std::size_t nodes = 200;
  int classes = 4;
  /// Edge probability within and across blocks.
  double p_in = 0.05;
  double p_out = 0.005;
  std::size_t features = 16;

  enum class FeatureMode {
    /// x = mu_c + noise, mu_c ~ N(0, signal^2) per dimension.
    kGaussian,
    /// Sparse binary bag of words: each node draws `words_per_node` words,
    /// each from its class topic with probability `signal`, else uniformly.
    kBagOfWords,
  } feature_mode = FeatureMode::kGaussian;
  double signal = 1.0;
  double noise = 1.0;
  std::size_t words_per_node = 18;
  bool row_normalize = false;
  std::uint64_t seed = 0;

  void validate() const;

  /// Sets p_in/p_out for a target mean degree and fraction of intra-class
  /// edges, assuming balanced blocks.
  SbmSpec& with_degree(double mean_degree, double homophily);

  /// 2708 nodes, 1433 sparse binary features, 7 classes, ~5.4k edges.
  static SbmSpec cora_like(std::uint64_t seed);
};

/// Labels are assigned round-robin so block sizes differ by at most one.
AttributedGraph generate_sbm(const SbmSpec& spec);

}  // namespace tcgu
