#include "tcgu/condense/condense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tcgu/graphdata/hash.hpp"
#include "tcgu/numerics/ops.hpp"
#include "tcgu/numerics/optim.hpp"

namespace tcgu {

using ad::Var;

namespace {

Var sum_terms(const std::vector<Var>& terms) {
  if (terms.empty()) return ad::constant(Tensor::scalar(0.0));
  if (terms.size() == 1) return terms[0];
  return ad::sum(ad::concat_rows(terms));
}

void check_compatible(const ClassStats& a, const ClassStats& b) {
  if (a.hops != b.hops || a.num_classes != b.num_classes || a.features != b.features) {
    throw DimensionError("class statistics disagree on hops, classes or feature width");
  }
}

}  // namespace

void CondenseConfig::validate() const {
  if (!(r_cond > 0 && r_cond < 1)) throw ValidationError("condensation ratio must lie in (0, 1)");
  if (steps == 0) throw ValidationError("condensation steps must be positive");
  if (!(w_loop > 0)) throw ValidationError("self-loop weight must be positive");
  if (lambda_c < 0 || lambda_f < 0) throw ValidationError("loss weights must be non-negative");
  if (tau1 + tau2 == 0) throw ValidationError("alternation periods cannot both be zero");
  if (!(eta1 > 0) || !(eta2 > 0)) throw ValidationError("condensation learning rates must be positive");
  if (!(delta >= 0 && delta < 1)) throw ValidationError("sparsification threshold must lie in [0, 1)");
  if (mlp_hidden == 0) throw ValidationError("topology MLP width must be positive");
}

std::uint64_t CondenseConfig::fingerprint() const {
  Fnv1a h;
  h.add(r_cond).add<std::uint64_t>(hops).add(w_loop).add(lambda_c).add(lambda_f).add<std::uint64_t>(steps);
  h.add<std::uint64_t>(tau1).add<std::uint64_t>(tau2).add(eta1).add(eta2).add(delta);
  h.add<std::uint64_t>(mlp_hidden).add(seed);
  return h.value();
}

TopologyMlp TopologyMlp::init(std::size_t features, std::size_t hidden, std::uint64_t seed, double output_bias) {
  std::mt19937_64 rng(seed);
  auto layer = [&](std::size_t in, std::size_t out, std::size_t fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(static_cast<double>(fan_in)),
                                             1.0 / std::sqrt(static_cast<double>(fan_in)));
    Tensor t(in, out);
    for (double& v : t.data()) v = u(rng);
    return t;
  };
  TopologyMlp m;
  m.params.push_back(layer(features, hidden, 2 * features));
  m.params.push_back(layer(features, hidden, 2 * features));
  m.params.push_back(layer(1, hidden, 2 * features));
  m.params.push_back(layer(hidden, hidden, hidden));
  m.params.push_back(layer(1, hidden, hidden));
  m.params.push_back(layer(hidden, 1, hidden));
  m.params.push_back(Tensor(1, 1, output_bias));
  return m;
}

Var topology_from_features(std::span<const Var> phi, const Var& x) {
  if (phi.size() != 7) throw DimensionError("topology MLP needs 7 parameter tensors");
  const std::size_t n = x.rows();
  const Var ua = ad::add(ad::matmul(x, phi[0]), phi[2]);
  const Var ub = ad::matmul(x, phi[1]);
  Var h = ad::relu(ad::pairwise_sum(ua, ub));
  h = ad::relu(ad::add(ad::matmul(h, phi[3]), phi[4]));
  const Var o = ad::reshape(ad::add(ad::matmul(h, phi[5]), phi[6]), n, n);
  return ad::sigmoid(ad::scale(ad::add(o, ad::transpose(o)), 0.5));
}

Tensor topology_from_features(const TopologyMlp& phi, const Tensor& x) {
  return topology_from_features(as_constants(phi.params), ad::constant(x)).value();
}

Tensor sparsify(const Tensor& a, double delta) {
  if (!(delta >= 0 && delta < 1)) throw DomainError("sparsify: threshold must lie in [0, 1)");
  Tensor out = a;
  for (double& v : out.data()) v = std::max(0.0, v - delta);
  return out;
}

void CondensedGraph::refresh_adjacency() { adjacency = sparsify(topology_from_features(phi, features), delta); }

std::vector<std::size_t> CondensedGraph::class_histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++h[static_cast<std::size_t>(y)];
  return h;
}

TrainData CondensedGraph::train_data(double gnn_w_loop) const {
  std::vector<std::size_t> all(num_nodes());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {dense_propagator(ad::constant(adjacency), gnn_w_loop), features, labels, std::move(all), {}};
}

std::size_t condensed_size(std::size_t train_nodes, int num_classes, double r_cond) {
  const auto target = static_cast<std::size_t>(std::llround(r_cond * static_cast<double>(train_nodes)));
  return std::max(static_cast<std::size_t>(num_classes), target);
}

std::vector<std::size_t> allocate_classes(std::span<const std::size_t> histogram, std::size_t total) {
  const std::size_t c = histogram.size();
  if (total < c) throw ValidationError("condensed graph needs at least one node per class");
  const double n = static_cast<double>(std::accumulate(histogram.begin(), histogram.end(), std::size_t{0}));
  if (n == 0) throw ValidationError("empty class histogram");
  std::vector<double> quota(c);
  std::vector<std::size_t> out(c);
  for (std::size_t i = 0; i < c; ++i) {
    if (histogram[i] == 0) throw ValidationError("class " + std::to_string(i) + " has no training nodes");
    quota[i] = static_cast<double>(histogram[i]) * static_cast<double>(total) / n;
    out[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(quota[i])));
  }
  std::size_t sum = std::accumulate(out.begin(), out.end(), std::size_t{0});
  while (sum < total) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c; ++i) {
      if (quota[i] - static_cast<double>(out[i]) > quota[best] - static_cast<double>(out[best])) best = i;
    }
    ++out[best];
    ++sum;
  }
  // The at-least-one floor can overshoot; take back from the most over-served classes.
  while (sum > total) {
    std::size_t worst = c;
    for (std::size_t i = 0; i < c; ++i) {
      if (out[i] <= 1) continue;
      if (worst == c || static_cast<double>(out[i]) - quota[i] > static_cast<double>(out[worst]) - quota[worst]) worst = i;
    }
    --out[worst];
    --sum;
  }
  return out;
}

CondensedGraph init_condensed(const AttributedGraph& g, const CondenseConfig& config) {
  config.validate();
  const std::size_t classes = static_cast<std::size_t>(g.num_classes);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t v : g.train_nodes()) members[static_cast<std::size_t>(g.labels[v])].push_back(v);
  std::vector<std::size_t> hist(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (members[c].empty()) throw ValidationError("class " + std::to_string(c) + " has no training nodes");
    hist[c] = members[c].size();
  }
  const std::size_t total = condensed_size(g.train_nodes().size(), g.num_classes, config.r_cond);
  const auto alloc = allocate_classes(hist, total);

  std::mt19937_64 rng(config.seed);
  CondensedGraph out;
  out.features = Tensor(total, g.num_features());
  out.num_classes = g.num_classes;
  out.delta = config.delta;
  out.w_loop = config.w_loop;
  out.source_lineage = g.lineage;
  out.config_fingerprint = config.fingerprint();
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> pool = members[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < alloc[c]; ++i, ++row) {
      // Without replacement while the class has enough nodes.
      const std::size_t src = i < pool.size() ? pool[i] : pool[pick(rng)];
      std::copy(g.features.row(src).begin(), g.features.row(src).end(), out.features.row(row).begin());
      out.labels.push_back(static_cast<int>(c));
    }
  }
  // Start near the real graph's mean degree; a sigmoid centred at 0.5 makes
  // the condensed graph almost complete and propagation washes out X'.
  const double mean_degree = 2.0 * static_cast<double>(g.num_edges()) / static_cast<double>(g.num_nodes());
  const double p0 = total > 1 ? std::clamp(mean_degree / static_cast<double>(total - 1), 1e-3, 0.5) : 0.5;
  out.phi = TopologyMlp::init(g.num_features(), config.mlp_hidden, config.seed + 1, std::log(p0 / (1.0 - p0)));
  out.refresh_adjacency();
  return out;
}

std::vector<Var> propagate(const Propagator& prop, const Var& x, std::size_t hops) {
  std::vector<Var> h{x};
  for (std::size_t k = 0; k < hops; ++k) h.push_back(prop(h.back()));
  return h;
}

Tensor ClassStats::covariance(std::size_t k, int c) const {
  const Var& hc = centered[index(k, c)];
  if (!hc) return Tensor(features, features);
  Tensor u = ad::matmul_tn(hc.value(), hc.value());
  const double m = static_cast<double>(counts[static_cast<std::size_t>(c)] - 1);
  for (double& v : u.data()) v /= m;
  return u;
}

ClassStats class_stats(std::span<const Var> hops, std::span<const int> labels, std::span<const std::size_t> rows,
                       int num_classes) {
  if (hops.empty()) throw DimensionError("class_stats: no hop features");
  if (num_classes <= 0) throw ValidationError("class_stats: no classes");
  ClassStats s;
  s.hops = hops.size() - 1;
  s.num_classes = num_classes;
  s.features = hops[0].cols();
  const auto classes = static_cast<std::size_t>(num_classes);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t r : rows) {
    const int y = labels[r];
    if (y < 0 || y >= num_classes) throw ValidationError("class_stats: label out of range");
    members[static_cast<std::size_t>(y)].push_back(r);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (members[c].empty()) throw ValidationError("class_stats: class " + std::to_string(c) + " has no nodes");
    s.counts.push_back(members[c].size());
    s.ratios.push_back(static_cast<double>(members[c].size()) / static_cast<double>(rows.size()));
  }
  for (const Var& h : hops) {
    if (h.cols() != s.features || h.rows() != labels.size()) throw DimensionError("class_stats: hop shape mismatch");
    for (std::size_t c = 0; c < classes; ++c) {
      const Var hc = ad::index_rows(h, members[c]);
      s.means.push_back(ad::col_mean(hc));
      if (members[c].size() < 2) {
        s.centered.emplace_back();
        s.cov_norm2.push_back(ad::constant(Tensor::scalar(0.0)));
        continue;
      }
      const Var centered = ad::center_rows(hc);
      const double m = static_cast<double>(members[c].size() - 1);
      // ||H^T H||_F = ||H H^T||_F; use whichever Gram matrix is smaller.
      const Var gram = members[c].size() <= s.features ? ad::matmul_nt(centered, centered)
                                                       : ad::matmul(ad::transpose(centered), centered);
      s.cov_norm2.push_back(ad::scale(ad::sum_squares(gram), 1.0 / (m * m)));
      s.centered.push_back(centered);
    }
  }
  return s;
}

ClassStats class_stats(std::span<const Var> hops, std::span<const int> labels, int num_classes) {
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return class_stats(hops, labels, all, num_classes);
}

Var mean_alignment_loss(const ClassStats& real, const ClassStats& cond) {
  check_compatible(real, cond);
  std::vector<Var> terms;
  for (std::size_t k = 0; k <= real.hops; ++k) {
    for (int c = 0; c < real.num_classes; ++c) {
      const double r = real.ratios[static_cast<std::size_t>(c)];
      terms.push_back(ad::scale(ad::sum_squares(ad::sub(real.mean(k, c), cond.mean(k, c))), r));
    }
  }
  return sum_terms(terms);
}

Var covariance_alignment_loss(const ClassStats& real, const ClassStats& cond) {
  check_compatible(real, cond);
  std::vector<Var> terms;
  for (std::size_t k = 0; k <= real.hops; ++k) {
    for (int c = 0; c < real.num_classes; ++c) {
      const std::size_t i = real.index(k, c);
      if (!cond.centered[i]) continue;
      const double r = real.ratios[static_cast<std::size_t>(c)];
      // ||U - U'||^2 = ||U||^2 - 2 tr(U U') + ||U'||^2, and
      // tr(U U') = ||H~ H~'^T||^2 / (m m').
      Var term = ad::add(real.cov_norm2[i], cond.cov_norm2[i]);
      if (real.centered[i]) {
        const double m = static_cast<double>(real.counts[static_cast<std::size_t>(c)] - 1);
        const double mp = static_cast<double>(cond.counts[static_cast<std::size_t>(c)] - 1);
        const Var cross = ad::sum_squares(ad::matmul_nt(real.centered[i], cond.centered[i]));
        term = ad::sub(term, ad::scale(cross, 2.0 / (m * mp)));
      }
      terms.push_back(ad::scale(term, r));
    }
  }
  return sum_terms(terms);
}

Var feature_alignment_loss(const ClassStats& real, const ClassStats& cond, double lambda_c) {
  const Var mean_term = mean_alignment_loss(real, cond);
  if (lambda_c == 0) return mean_term;
  return ad::add(mean_term, ad::scale(covariance_alignment_loss(real, cond), lambda_c));
}

Var logits_alignment_loss(const GnnModel& teacher, const Var& adjacency, const Var& x, std::span<const int> labels) {
  if (x.rows() != labels.size()) throw DimensionError("logits alignment: label count differs from node count");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= teacher.arch.out_dim) {
      throw ValidationError("logits alignment: teacher output width does not cover the labels");
    }
  }
  const auto params = as_constants(teacher.params);
  const GnnOutput out = gnn_forward(teacher.arch, params, dense_propagator(adjacency, teacher.arch.w_loop), x);
  return ad::cross_entropy_with_logits(out.logits, labels);
}

CondenseResult condense(const AttributedGraph& g, const GnnModel& teacher, const CondenseConfig& config,
                        const CondenseHook& hook) {
  config.validate();
  if (teacher.arch.out_dim != static_cast<std::size_t>(g.num_classes) || teacher.arch.in_dim != g.num_features()) {
    throw ValidationError("condense: teacher shape does not match the graph");
  }
  CondenseResult result{init_condensed(g, config), {}};
  CondensedGraph& cg = result.graph;

  // Real-side statistics are fixed for the whole stage.
  const auto real_hops = propagate(graph_propagator(g, config.w_loop), ad::constant(g.features), config.hops);
  const ClassStats real = class_stats(real_hops, g.labels, g.train_nodes(), g.num_classes);

  std::vector<Tensor> x_group{cg.features};
  std::vector<Tensor> phi_group = cg.phi.params;
  AdamConfig x_cfg;
  x_cfg.lr = config.eta1;
  AdamConfig phi_cfg;
  phi_cfg.lr = config.eta2;
  Adam x_opt(x_cfg, x_group);
  Adam phi_opt(phi_cfg, phi_group);

  for (std::size_t t = 0; t < config.steps; ++t) {
    const bool update_x = t % (config.tau1 + config.tau2) < config.tau1;
    try {
      const Var x = update_x ? ad::parameter(x_group[0]) : ad::constant(x_group[0]);
      const auto phi = update_x ? as_constants(phi_group) : as_parameters(phi_group);
      const Var a = topology_from_features(phi, x);
      Var loss = logits_alignment_loss(teacher, a, x, cg.labels);
      if (config.lambda_f > 0) {
        const auto hops = propagate(dense_propagator(a, config.w_loop), x, config.hops);
        const ClassStats cond = class_stats(hops, cg.labels, g.num_classes);
        loss = ad::add(loss, ad::scale(feature_alignment_loss(real, cond, config.lambda_c), config.lambda_f));
      }
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw NumericError("loss is not finite");
      result.losses.push_back(lv);
      if (hook) hook(t, a.value(), lv);
      const ad::Gradients grads = ad::backward(loss);
      if (update_x) {
        std::vector<Tensor> gx{grads.of(x)};
        x_opt.step(x_group, gx);
      } else {
        std::vector<Tensor> gp;
        for (const Var& p : phi) gp.push_back(grads.of(p));
        phi_opt.step(phi_group, gp);
      }
    } catch (const NumericError& e) {
      throw NumericError("condensation diverged at step " + std::to_string(t) + ": " + e.what());
    }
  }
  cg.features = std::move(x_group[0]);
  cg.phi.params = std::move(phi_group);
  cg.refresh_adjacency();
  return result;
}

Section encode_condensed(const CondensedGraph& c) {
  BinaryWriter w;
  w.tensor(c.features);
  w.u64(c.phi.params.size());
  for (const Tensor& t : c.phi.params) w.tensor(t);
  w.ints(c.labels);
  w.i32(c.num_classes);
  w.f64(c.delta);
  w.f64(c.w_loop);
  w.tensor(c.adjacency);
  w.u64(c.source_lineage);
  w.u64(c.config_fingerprint);
  return {std::string(kCondensedTag), w.take()};
}

CondensedGraph decode_condensed(const Section& s) {
  BinaryReader r(s.payload, "condensed section");
  CondensedGraph c;
  c.features = r.tensor("features");
  const std::uint64_t n = r.u64("topology parameter count");
  if (n != 7) throw CheckpointError("condensed section: expected 7 topology parameters, found " + std::to_string(n));
  for (std::uint64_t i = 0; i < n; ++i) c.phi.params.push_back(r.tensor("topology parameter"));
  c.labels = r.ints("labels");
  c.num_classes = r.i32("class count");
  c.delta = r.f64("delta");
  c.w_loop = r.f64("w_loop");
  c.adjacency = r.tensor("adjacency");
  c.source_lineage = r.u64("source lineage");
  c.config_fingerprint = r.u64("config fingerprint");
  r.expect_done();

  const std::size_t nodes = c.features.rows();
  const std::size_t f = c.features.cols();
  const std::size_t h = c.phi.params[0].cols();
  const std::size_t expect[7][2] = {{f, h}, {f, h}, {1, h}, {h, h}, {1, h}, {h, 1}, {1, 1}};
  for (std::size_t i = 0; i < 7; ++i) {
    if (c.phi.params[i].rows() != expect[i][0] || c.phi.params[i].cols() != expect[i][1]) {
      throw CheckpointError("condensed section: topology parameter " + std::to_string(i) + " has shape " +
                            shape_string(c.phi.params[i]));
    }
  }
  if (c.labels.size() != nodes || c.adjacency.rows() != nodes || c.adjacency.cols() != nodes) {
    throw CheckpointError("condensed section: node counts disagree");
  }
  for (int y : c.labels) {
    if (y < 0 || y >= c.num_classes) throw CheckpointError("condensed section: label out of range");
  }
  return c;
}

}  // namespace tcgu
