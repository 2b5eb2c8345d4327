#include "tcgu/transfer/transfer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "tcgu/graphdata/hash.hpp"
#include "tcgu/numerics/ops.hpp"
#include "tcgu/numerics/optim.hpp"

namespace tcgu {

using ad::Var;

Tensor LowRankPlugin::residual() const { return ad::matmul(a, b); }

LowRankPlugin init_plugin(std::size_t nodes, std::size_t features, std::size_t rank, std::uint64_t seed,
                          double stddev) {
  if (rank == 0) throw ValidationError("plugin rank must be at least 1");
  if (rank > std::min(nodes, features)) {
    throw ValidationError("plugin rank " + std::to_string(rank) + " exceeds min(N', F) = " +
                          std::to_string(std::min(nodes, features)));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  LowRankPlugin p{Tensor(nodes, rank), Tensor(rank, features)};
  for (double& v : p.a.data()) v = gauss(rng);
  return p;
}

Tensor apply_plugin(const Tensor& x, const LowRankPlugin& plugin) {
  return apply_plugin(ad::constant(x), ad::constant(plugin.a), ad::constant(plugin.b)).value();
}

Var apply_plugin(const Var& x, const Var& a, const Var& b) { return ad::add(x, ad::matmul(a, b)); }

FunctionQueue::FunctionQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("function queue capacity must be positive");
}

void FunctionQueue::push(GnnModel model, std::size_t generation, std::size_t epoch) {
  items_.push_back({std::make_shared<const GnnModel>(std::move(model)), next_id_++, generation, epoch});
  while (items_.size() > capacity_) items_.pop_front();
}

const FunctionSnapshot& FunctionQueue::sample(std::mt19937_64& rng) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty function queue");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  return items_[pick(rng)];
}

const FunctionSnapshot& FunctionQueue::sample_latest(std::mt19937_64& rng) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty function queue");
  const std::size_t newest = items_.back().generation;
  std::size_t first = items_.size();
  while (first > 0 && items_[first - 1].generation == newest) --first;
  std::uniform_int_distribution<std::size_t> pick(first, items_.size() - 1);
  return items_[pick(rng)];
}

std::size_t sample_trajectory(FunctionQueue& queue, const GnnArch& arch, const TrainData& data,
                              const TrainConfig& train, std::size_t samples, std::size_t generation) {
  if (samples == 0 || samples > train.epochs) throw ValidationError("trajectory samples must lie in [1, epochs]");
  const std::size_t stride = (train.epochs + samples - 1) / samples;
  std::size_t pushed = 0;
  try {
    train_gnn(arch, data, train, [&](std::size_t epoch, const GnnModel& m) {
      if (epoch % stride == 0) {
        queue.push(m, generation, epoch);
        ++pushed;
      }
    });
  } catch (const NumericError& e) {
    spdlog::warn("trajectory {} diverged after {} snapshots: {}", generation, pushed, e.what());
  }
  return pushed;
}

Var embed(const GnnArch& arch, std::span<const Var> params, const Propagator& prop, const Var& x) {
  const GnnOutput out = gnn_forward(arch, params, prop, x);
  return arch.kind == GnnKind::kSgc ? out.logits : out.embedding;
}

Var class_mean_rows(const Var& z, std::span<const int> labels, std::span<const std::size_t> rows, int num_classes) {
  if (labels.size() != z.rows()) throw DimensionError("class_mean_rows: label count differs from row count");
  const auto classes = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t r : rows) {
    const int y = labels[r];
    if (y < 0 || y >= num_classes) throw ValidationError("class_mean_rows: label out of range");
    ++count[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) throw ValidationError("class " + std::to_string(c) + " has no rows");
  }
  Tensor avg(classes, z.rows());
  for (std::size_t r : rows) {
    const auto c = static_cast<std::size_t>(labels[r]);
    avg(c, r) += 1.0 / static_cast<double>(count[c]);
  }
  return ad::matmul(ad::constant(std::move(avg)), z);
}

Var prototypes(const Var& z, std::span<const int> labels, std::span<const std::size_t> rows, int num_classes) {
  return class_mean_rows(z, labels, rows, num_classes);
}

Var prototypes(const Var& z, std::span<const int> labels, int num_classes) {
  std::vector<std::size_t> all(z.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return class_mean_rows(z, labels, all, num_classes);
}

Var similarity_embedding(const Var& z, const Var& protos, double tau) {
  if (!(tau > 0)) throw DomainError("similarity temperature must be positive");
  return ad::exp(ad::scale(ad::cosine_similarity_matrix(z, protos), 1.0 / tau));
}

Var sdm_loss(const Var& real_class_means, const Var& s_u, std::span<const int> labels_u,
             std::span<const double> ratios) {
  const int classes = static_cast<int>(real_class_means.rows());
  if (ratios.size() != real_class_means.rows() || real_class_means.cols() != s_u.cols()) {
    throw DimensionError("sdm_loss: class counts disagree");
  }
  std::vector<std::size_t> all(s_u.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Var diff = ad::sub(real_class_means, class_mean_rows(s_u, labels_u, all, classes));
  Tensor w(ratios.size(), 1);
  for (std::size_t c = 0; c < ratios.size(); ++c) w(c, 0) = ratios[c];
  return ad::sum(ad::mul(ad::mul(diff, diff), ad::constant(std::move(w))));
}

Var sdm_loss(const Var& s_r, std::span<const int> labels_r, std::span<const std::size_t> rows_r, const Var& s_u,
             std::span<const int> labels_u, std::span<const double> ratios) {
  return sdm_loss(class_mean_rows(s_r, labels_r, rows_r, static_cast<int>(ratios.size())), s_u, labels_u, ratios);
}

Var cdr_loss(const Var& z, std::span<const int> labels, double tau, bool log_form) {
  if (!(tau > 0)) throw DomainError("contrastive temperature must be positive");
  const std::size_t n = z.rows();
  if (labels.size() != n) throw DimensionError("cdr_loss: label count differs from row count");
  if (n < 2) throw ValidationError("cdr_loss needs at least two nodes");
  Tensor off(n, n, 1.0);
  Tensor pos(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    off(i, i) = 0.0;
    std::size_t peers = 0;
    for (std::size_t j = 0; j < n; ++j) peers += j != i && labels[j] == labels[i];
    if (peers == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) pos(i, j) = 1.0 / static_cast<double>(peers);
    }
  }
  const Var logits = ad::scale(ad::cosine_similarity_matrix(z, z), 1.0 / tau);
  const Var e = ad::mul(ad::exp(logits), ad::constant(std::move(off)));
  const Var denom = ad::row_sum(e);
  const Var terms = log_form ? ad::sub(logits, ad::log(denom)) : ad::div(e, denom);
  return ad::neg(ad::sum(ad::mul(terms, ad::constant(std::move(pos)))));
}

void TransferConfig::validate() const {
  if (rank == 0) throw ValidationError("plugin rank must be at least 1");
  if (steps == 0) throw ValidationError("fine-tuning steps must be positive");
  if (sample_interval == 0) throw ValidationError("sampling interval must be positive");
  if (trajectory_epochs == 0) throw ValidationError("trajectory length must be positive");
  if (trajectory_samples == 0 || trajectory_samples > trajectory_epochs) {
    throw ValidationError("snapshots per trajectory must lie in [1, trajectory length]");
  }
  if (queue_capacity == 0) throw ValidationError("queue capacity must be positive");
  if (!(tau_sim > 0) || !(tau_r > 0)) throw ValidationError("temperatures must be positive");
  if (lambda_f < 0 || lambda_r < 0 || lambda_c < 0) throw ValidationError("loss weights must be non-negative");
  if (tau1 + tau2 == 0) throw ValidationError("alternation periods cannot both be zero");
  if (!(eta1 > 0) || !(eta2 > 0) || !(trajectory_lr > 0)) throw ValidationError("learning rates must be positive");
  if (!(w_loop > 0)) throw ValidationError("self-loop weight must be positive");
  if (!(plugin_stddev >= 0)) throw ValidationError("plugin init scale must be non-negative");
}

std::uint64_t TransferConfig::fingerprint() const {
  Fnv1a h;
  h.add<std::uint64_t>(rank).add<std::uint64_t>(steps).add<std::uint64_t>(sample_interval);
  h.add<std::uint64_t>(trajectory_epochs).add<std::uint64_t>(trajectory_samples).add<std::uint64_t>(queue_capacity);
  h.add(lambda_f).add(lambda_r).add(tau_sim).add(tau_r).add<std::uint64_t>(tau1).add<std::uint64_t>(tau2);
  h.add(eta1).add(eta2).add<std::uint8_t>(log_form).add<std::uint64_t>(hops).add(w_loop).add(lambda_c);
  h.add(trajectory_lr).add(trajectory_weight_decay).add(plugin_stddev).add(seed);
  return h.value();
}

TransferResult transfer(const CondensedGraph& condensed, const AttributedGraph& remaining, const GnnArch& arch,
                        const TransferConfig& config, const TransferHook& hook) {
  config.validate();
  if (condensed.num_features() != remaining.num_features() || condensed.num_classes != remaining.num_classes) {
    throw ValidationError("transfer: condensed graph and remaining graph disagree on features or classes");
  }
  const int classes = remaining.num_classes;
  const std::vector<std::size_t> train_r = remaining.train_nodes();
  std::vector<double> ratios(static_cast<std::size_t>(classes), 0.0);
  for (std::size_t v : train_r) ratios[static_cast<std::size_t>(remaining.labels[v])] += 1.0;
  for (std::size_t c = 0; c < ratios.size(); ++c) {
    if (ratios[c] == 0) {
      throw ValidationError("transfer: class " + std::to_string(c) + " has no training nodes left in the remaining graph");
    }
    ratios[c] /= static_cast<double>(train_r.size());
  }

  GnnArch fn_arch = arch;
  fn_arch.in_dim = remaining.num_features();
  fn_arch.out_dim = static_cast<std::size_t>(classes);
  fn_arch.validate();

  // Remaining-graph quantities fixed for the whole stage.
  const Var x_r = ad::constant(remaining.features);
  const Propagator feat_prop = graph_propagator(remaining, config.w_loop);
  const Propagator fn_prop = config.w_loop == fn_arch.w_loop ? feat_prop : graph_propagator(remaining, fn_arch.w_loop);
  const ClassStats real = class_stats(propagate(feat_prop, x_r, config.hops), remaining.labels, train_r, classes);
  std::unordered_map<std::uint64_t, Var> real_sim_means;
  auto real_means_for = [&](const FunctionSnapshot& s) -> const Var& {
    auto it = real_sim_means.find(s.id);
    if (it != real_sim_means.end()) return it->second;
    const Var z = embed(fn_arch, as_constants(s.model->params), fn_prop, x_r);
    const Var protos = prototypes(z, remaining.labels, train_r, classes);
    const Var sim = similarity_embedding(z, protos, config.tau_sim);
    const Var means = ad::constant(class_mean_rows(sim, remaining.labels, train_r, classes).value());
    return real_sim_means.emplace(s.id, means).first->second;
  };

  TransferResult result;
  result.plugin = init_plugin(condensed.num_nodes(), condensed.num_features(), config.rank, config.seed, config.plugin_stddev);
  std::vector<Tensor> plugin_group{result.plugin.a, result.plugin.b};
  std::vector<Tensor> phi_group = condensed.phi.params;
  AdamConfig plugin_cfg;
  plugin_cfg.lr = config.eta1;
  AdamConfig phi_cfg;
  phi_cfg.lr = config.eta2;
  Adam plugin_opt(plugin_cfg, plugin_group);
  Adam phi_opt(phi_cfg, phi_group);

  FunctionQueue queue(config.queue_capacity);
  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ULL);
  const Var x_frozen = ad::constant(condensed.features);
  const std::vector<int>& labels = condensed.labels;
  for (std::size_t c : condensed.class_histogram()) {
    if (c == 1) spdlog::warn("contrastive regulariser: a condensed class has a single node, which contributes 0");
  }
  std::size_t generation = 0;

  auto refresh = [&](const Tensor& x_u, const Tensor& a_u) {
    std::vector<std::size_t> all(condensed.num_nodes());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const TrainData data{dense_propagator(ad::constant(a_u), fn_arch.w_loop), x_u, labels, std::move(all), {}};
    TrainConfig tc;
    tc.epochs = config.trajectory_epochs;
    tc.lr = config.trajectory_lr;
    tc.weight_decay = config.trajectory_weight_decay;
    tc.seed = config.seed + 1000003ULL * (generation + 1);
    ++generation;
    sample_trajectory(queue, fn_arch, data, tc, config.trajectory_samples, generation);
    ++result.refreshes;
  };

  for (std::size_t t = 0; t < config.steps; ++t) {
    const bool update_plugin = t % (config.tau1 + config.tau2) < config.tau1;
    try {
      const Var pa = update_plugin ? ad::parameter(plugin_group[0]) : ad::constant(plugin_group[0]);
      const Var pb = update_plugin ? ad::parameter(plugin_group[1]) : ad::constant(plugin_group[1]);
      const auto phi = update_plugin ? as_constants(phi_group) : as_parameters(phi_group);
      const Var x_u = apply_plugin(x_frozen, pa, pb);
      const Var a_u = topology_from_features(phi, x_u);

      if (t % config.sample_interval == 0) refresh(x_u.value(), a_u.value());
      if (queue.empty()) {
        spdlog::warn("function queue empty at step {}; refreshing", t);
        refresh(x_u.value(), a_u.value());
        if (queue.empty()) throw NumericError("no embedding function could be trained");
      }
      const FunctionSnapshot& fn = queue.sample_latest(rng);
      const Var& real_means = real_means_for(fn);

      const Var z_u = embed(fn_arch, as_constants(fn.model->params), dense_propagator(a_u, fn_arch.w_loop), x_u);
      const Var s_u = similarity_embedding(z_u, prototypes(z_u, labels, classes), config.tau_sim);
      const Var l_sdm = sdm_loss(real_means, s_u, labels, ratios);
      const Var l_cdr = cdr_loss(z_u, labels, config.tau_r, config.log_form);
      const ClassStats cond = class_stats(propagate(dense_propagator(a_u, config.w_loop), x_u, config.hops), labels, classes);
      const Var l_feat = feature_alignment_loss(real, cond, config.lambda_c);
      const Var loss =
          ad::add(ad::add(l_sdm, ad::scale(l_feat, config.lambda_f)), ad::scale(l_cdr, config.lambda_r));
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw NumericError("loss is not finite");
      result.losses.push_back(lv);
      if (hook) {
        TransferStep info;
        info.step = t;
        info.updated_plugin = update_plugin;
        info.loss = lv;
        info.sdm = l_sdm.value().item();
        info.feat = l_feat.value().item();
        info.cdr = l_cdr.value().item();
        info.queue_size = queue.size();
        info.sampled_generation = fn.generation;
        info.generation = generation;
        info.features = &x_u.value();
        info.adjacency = &a_u.value();
        info.labels = &labels;
        hook(info);
      }

      const ad::Gradients grads = ad::backward(loss);
      if (update_plugin) {
        std::vector<Tensor> g{grads.of(pa), grads.of(pb)};
        plugin_opt.step(plugin_group, g);
      } else {
        std::vector<Tensor> g;
        for (const Var& p : phi) g.push_back(grads.of(p));
        phi_opt.step(phi_group, g);
      }
    } catch (const NumericError& e) {
      throw NumericError("transfer diverged at step " + std::to_string(t) + ": " + e.what());
    }
  }

  result.plugin.a = std::move(plugin_group[0]);
  result.plugin.b = std::move(plugin_group[1]);
  result.graph = condensed;
  result.graph.features = apply_plugin(condensed.features, result.plugin);
  result.graph.phi.params = std::move(phi_group);
  result.graph.source_lineage = remaining.lineage;
  result.graph.refresh_adjacency();
  return result;
}

Section encode_plugin(const LowRankPlugin& p) {
  BinaryWriter w;
  w.tensor(p.a);
  w.tensor(p.b);
  return {std::string(kPluginTag), w.take()};
}

LowRankPlugin decode_plugin(const Section& s) {
  BinaryReader r(s.payload, "plugin section");
  LowRankPlugin p;
  p.a = r.tensor("A");
  p.b = r.tensor("B");
  r.expect_done();
  if (p.a.cols() != p.b.rows()) throw CheckpointError("plugin section: factor ranks disagree");
  return p;
}

}  // namespace tcgu
