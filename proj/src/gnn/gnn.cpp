#include "tcgu/gnn/gnn.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "tcgu/numerics/ops.hpp"
#include "tcgu/numerics/optim.hpp"

namespace tcgu {

using ad::Var;

GnnKind parse_gnn_kind(std::string_view name) {
  if (name == "gcn" || name == "GCN") return GnnKind::kGcn;
  if (name == "sgc" || name == "SGC") return GnnKind::kSgc;
  throw ValidationError("unknown GNN kind '" + std::string(name) + "' (gcn|sgc)");
}

std::string_view to_string(GnnKind kind) { return kind == GnnKind::kGcn ? "gcn" : "sgc"; }

void GnnArch::validate() const {
  if (in_dim == 0 || out_dim == 0) throw ValidationError("GNN input and output widths must be positive");
  if (kind == GnnKind::kGcn && (layers == 0 || hidden == 0)) throw ValidationError("GCN needs layers >= 1 and hidden > 0");
  if (!(w_loop > 0)) throw ValidationError("self-loop weight must be positive");
}

std::size_t GnnArch::embed_dim() const {
  if (kind == GnnKind::kSgc || layers == 1) return in_dim;
  return hidden;
}

GnnModel init_gnn(const GnnArch& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  GnnModel m{arch, {}};
  std::vector<std::size_t> dims{arch.in_dim};
  if (arch.kind == GnnKind::kGcn) {
    for (std::size_t l = 1; l < arch.layers; ++l) dims.push_back(arch.hidden);
  }
  dims.push_back(arch.out_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double a = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> u(-a, a);
    Tensor w(dims[l], dims[l + 1]);
    for (double& v : w.data()) v = u(rng);
    m.params.push_back(std::move(w));
    m.params.emplace_back(1, dims[l + 1]);
  }
  return m;
}

CsrMatrix normalize_adjacency(const CsrMatrix& a, double w_loop) {
  if (!(w_loop > 0)) throw DomainError("normalize_adjacency: self-loop weight must be positive");
  const auto deg = a.row_sums();
  std::vector<double> s(deg.size());
  for (std::size_t i = 0; i < deg.size(); ++i) s[i] = 1.0 / std::sqrt(deg[i] + w_loop);
  std::vector<Triplet> t;
  t.reserve(a.nnz() + a.rows());
  for (std::uint32_t r = 0; r < a.rows(); ++r) {
    for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) {
      const std::uint32_t c = a.col_idx()[p];
      t.push_back({r, c, a.values()[p] * s[r] * s[c]});
    }
    t.push_back({r, r, w_loop * s[r] * s[r]});
  }
  return CsrMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

Tensor normalize_adjacency(const Tensor& a, double w_loop) {
  return normalize_adjacency(CsrMatrix::from_dense(a), w_loop).to_dense();
}

Var normalize_adjacency(const Var& a, double w_loop) {
  if (!(w_loop > 0)) throw DomainError("normalize_adjacency: self-loop weight must be positive");
  const Var s = ad::pow(ad::add_scalar(ad::row_sum(a), w_loop), -0.5);
  Tensor eye(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) eye(i, i) = w_loop;
  const Var loops = ad::add(a, ad::constant(std::move(eye)));
  return ad::mul(loops, ad::matmul_nt(s, s));
}

Var Propagator::operator()(const Var& x) const {
  if (sparse_) return ad::spmm(sparse_, x);
  if (!dense_) throw std::logic_error("empty propagator");
  return ad::matmul(dense_, x);
}

std::size_t Propagator::nodes() const { return sparse_ ? sparse_->rows() : dense_.rows(); }

Propagator graph_propagator(const AttributedGraph& g, double w_loop) {
  return Propagator(std::make_shared<const CsrMatrix>(normalize_adjacency(*g.adjacency, w_loop)));
}

Propagator dense_propagator(const Var& adjacency, double w_loop) {
  return Propagator(normalize_adjacency(adjacency, w_loop));
}

std::vector<Var> as_constants(std::span<const Tensor> params) {
  std::vector<Var> out;
  for (const Tensor& t : params) out.push_back(ad::constant(t));
  return out;
}

std::vector<Var> as_parameters(std::span<const Tensor> params) {
  std::vector<Var> out;
  for (const Tensor& t : params) out.push_back(ad::parameter(t));
  return out;
}

GnnOutput gnn_forward(const GnnArch& arch, std::span<const Var> params, const Propagator& prop, const Var& x,
                      const DropoutMasks* dropout) {
  const std::size_t n_linear = arch.kind == GnnKind::kGcn ? arch.layers : 1;
  if (params.size() != 2 * n_linear) throw DimensionError("gnn_forward: wrong parameter count");
  if (x.cols() != params[0].rows()) {
    throw DimensionError("gnn_forward: feature width " + std::to_string(x.cols()) + " but model expects " +
                         std::to_string(params[0].rows()));
  }
  auto drop = [&](const Var& h, std::size_t layer) {
    return dropout && layer < dropout->size() ? ad::mul(h, ad::constant((*dropout)[layer])) : h;
  };
  if (arch.kind == GnnKind::kSgc) {
    Var h = x;
    for (std::size_t k = 0; k < arch.hops; ++k) h = prop(h);
    return {h, ad::add(ad::matmul(drop(h, 0), params[0]), params[1])};
  }
  Var h = x;
  for (std::size_t l = 0; l + 1 < n_linear; ++l) {
    h = ad::relu(ad::add(prop(ad::matmul(drop(h, l), params[2 * l])), params[2 * l + 1]));
  }
  const std::size_t last = n_linear - 1;
  return {h, ad::add(prop(ad::matmul(drop(h, last), params[2 * last])), params[2 * last + 1])};
}

GnnOutput infer(const GnnModel& model, const Propagator& prop, const Tensor& x) {
  const auto p = as_constants(model.params);
  return gnn_forward(model.arch, p, prop, ad::constant(x));
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ValidationError("training epochs must be positive");
  if (!(lr > 0)) throw ValidationError("learning rate must be positive");
  if (weight_decay < 0) throw ValidationError("weight decay must be non-negative");
  if (dropout < 0 || dropout >= 1) throw ValidationError("dropout must lie in [0, 1)");
}

TrainData graph_train_data(const AttributedGraph& g, double w_loop) {
  return {graph_propagator(g, w_loop), g.features, g.labels, g.train_nodes(), g.val_nodes()};
}

double micro_f1(const Tensor& logits, std::span<const int> labels, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ValidationError("micro_f1: empty evaluation set");
  std::size_t hit = 0;
  for (std::size_t r : rows) {
    const auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    hit += static_cast<int>(best) == labels[r];
  }
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

namespace {

struct Evaluation {
  double accuracy;
  double loss;
};

Evaluation evaluate_rows(const Var& logits, std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> y;
  for (std::size_t r : rows) y.push_back(labels[r]);
  const Var sub = ad::index_rows(ad::constant(logits.value()), rows);
  const double loss = ad::cross_entropy_with_logits(sub, y).value().item();
  return {micro_f1(logits.value(), labels, rows), loss};
}

}  // namespace

TrainResult train_gnn(const GnnArch& arch, const TrainData& data, const TrainConfig& config, const EpochHook& hook) {
  config.validate();
  arch.validate();
  if (data.train.empty()) throw ValidationError("train_gnn: empty train set");
  if (data.features.rows() != data.prop.nodes() || data.labels.size() != data.features.rows()) {
    throw DimensionError("train_gnn: features, labels and propagation disagree on node count");
  }
  for (std::size_t r : data.train) {
    if (data.labels[r] < 0 || static_cast<std::size_t>(data.labels[r]) >= arch.out_dim) {
      throw ValidationError("train_gnn: label outside model output width");
    }
  }

  // SGC propagation does not depend on parameters; do it once.
  GnnArch run_arch = arch;
  Var x = ad::constant(data.features);
  if (arch.kind == GnnKind::kSgc) {
    for (std::size_t k = 0; k < arch.hops; ++k) x = data.prop(x);
    run_arch.hops = 0;
  }

  TrainResult result{init_gnn(arch, config.seed), {}, 0, -1.0};
  std::vector<int> train_labels;
  for (std::size_t r : data.train) train_labels.push_back(data.labels[r]);
  AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  adam_cfg.weight_decay = config.weight_decay;
  Adam adam(adam_cfg, result.model.params);
  std::mt19937_64 drop_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<Tensor> params = result.model.params;
  std::vector<Tensor> best = params;
  double best_val_loss = std::numeric_limits<double>::infinity();
  const bool use_val = !data.val.empty();

  auto consider = [&](std::size_t epoch, const Var& logits) {
    if (!use_val) return;
    const Evaluation e = evaluate_rows(logits, data.labels, data.val);
    if (e.accuracy > result.best_val_accuracy || (e.accuracy == result.best_val_accuracy && e.loss < best_val_loss)) {
      result.best_val_accuracy = e.accuracy;
      best_val_loss = e.loss;
      result.best_epoch = epoch;
      best = params;
    }
  };

  auto dropout_masks = [&]() {
    DropoutMasks masks;
    const std::size_t n_linear = arch.kind == GnnKind::kGcn ? arch.layers : 1;
    std::bernoulli_distribution keep(1.0 - config.dropout);
    const double scale = 1.0 / (1.0 - config.dropout);
    std::size_t width = x.cols();
    for (std::size_t l = 0; l < n_linear; ++l) {
      Tensor m(x.rows(), width);
      for (double& v : m.data()) v = keep(drop_rng) ? scale : 0.0;
      masks.push_back(std::move(m));
      width = arch.hidden;
    }
    return masks;
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (hook) hook(epoch, GnnModel{arch, params});
    try {
      const auto vars = as_parameters(params);
      DropoutMasks masks;
      if (config.dropout > 0) masks = dropout_masks();
      const GnnOutput out = gnn_forward(run_arch, vars, data.prop, x, config.dropout > 0 ? &masks : nullptr);
      const Var loss = ad::cross_entropy_with_logits(ad::index_rows(out.logits, data.train), train_labels);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw NumericError("loss is not finite");
      result.losses.push_back(lv);
      if (config.dropout > 0) {
        consider(epoch, gnn_forward(run_arch, as_constants(params), data.prop, x).logits);
      } else {
        consider(epoch, out.logits);
      }
      const ad::Gradients g = ad::backward(loss);
      std::vector<Tensor> grads;
      for (const Var& v : vars) grads.push_back(g.of(v));
      adam.step(params, grads);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }
  if (use_val) {
    consider(config.epochs, gnn_forward(run_arch, as_constants(params), data.prop, x).logits);
    result.model.params = std::move(best);
  } else {
    result.model.params = std::move(params);
    result.best_epoch = config.epochs;
  }
  return result;
}

Section encode_model(const GnnModel& m) {
  BinaryWriter w;
  w.u8(m.arch.kind == GnnKind::kGcn ? 0 : 1);
  w.u64(m.arch.in_dim);
  w.u64(m.arch.hidden);
  w.u64(m.arch.out_dim);
  w.u64(m.arch.layers);
  w.u64(m.arch.hops);
  w.f64(m.arch.w_loop);
  w.u64(m.params.size());
  for (const Tensor& t : m.params) w.tensor(t);
  return {std::string(kModelTag), w.take()};
}

GnnModel decode_model(const Section& s) {
  BinaryReader r(s.payload, "model section");
  GnnModel m;
  const std::uint8_t kind = r.u8("kind");
  if (kind > 1) throw CheckpointError("model section: unknown model kind " + std::to_string(kind));
  m.arch.kind = kind == 0 ? GnnKind::kGcn : GnnKind::kSgc;
  m.arch.in_dim = r.u64("in_dim");
  m.arch.hidden = r.u64("hidden");
  m.arch.out_dim = r.u64("out_dim");
  m.arch.layers = r.u64("layers");
  m.arch.hops = r.u64("hops");
  m.arch.w_loop = r.f64("w_loop");
  const std::uint64_t n = r.u64("parameter count");
  if (n > 1024) throw CheckpointError("model section: implausible parameter count");
  for (std::uint64_t i = 0; i < n; ++i) m.params.push_back(r.tensor("parameter"));
  r.expect_done();
  const GnnModel ref = init_gnn(m.arch, 0);
  if (ref.params.size() != m.params.size()) throw CheckpointError("model section: parameter count does not match architecture");
  for (std::size_t i = 0; i < ref.params.size(); ++i) {
    if (!ref.params[i].same_shape(m.params[i])) throw CheckpointError("model section: parameter shape mismatch");
  }
  return m;
}

}  // namespace tcgu
