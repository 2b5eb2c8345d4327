#include "tcgu/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "tcgu/numerics/kernels.hpp"

namespace tcgu::ad {
namespace {

const kernels::KernelTable& K() { return kernels::active(); }

std::size_t broadcast_dim(std::size_t x, std::size_t y, std::string_view op) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  throw DimensionError(std::string(op) + ": cannot broadcast " + std::to_string(x) + " against " +
                       std::to_string(y));
}

inline double bat(const Tensor& t, std::size_t i, std::size_t j) {
  return t(t.rows() == 1 ? 0 : i, t.cols() == 1 ? 0 : j);
}

inline double& bat(Tensor& t, std::size_t i, std::size_t j) {
  return t(t.rows() == 1 ? 0 : i, t.cols() == 1 ? 0 : j);
}

// out = f(a, b) with broadcasting; d/da and d/db are supplied as functions of
// (a, b, out) and accumulated back with reduction over broadcast axes.
template <class F, class DA, class DB>
Var binary(std::string_view op, const Var& a, const Var& b, F f, DA da, DB db) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t r = broadcast_dim(x.rows(), y.rows(), op);
  const std::size_t c = broadcast_dim(x.cols(), y.cols(), op);
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = f(bat(x, i, j), bat(y, i, j));
  return record(op, std::move(out), {a.node(), b.node()},
                [da, db](const Node& self, const Tensor& g, GradSink& sink) {
                  const Tensor& xv = self.inputs[0]->value;
                  const Tensor& yv = self.inputs[1]->value;
                  Tensor* ga = sink.slot(self.inputs[0]);
                  Tensor* gb = sink.slot(self.inputs[1]);
                  for (std::size_t i = 0; i < g.rows(); ++i) {
                    for (std::size_t j = 0; j < g.cols(); ++j) {
                      const double u = bat(xv, i, j);
                      const double v = bat(yv, i, j);
                      const double o = self.value(i, j);
                      if (ga) bat(*ga, i, j) += g(i, j) * da(u, v, o);
                      if (gb) bat(*gb, i, j) += g(i, j) * db(u, v, o);
                    }
                  }
                });
}

// out = f(a) elementwise with derivative d(x, out).
template <class F, class D>
Var unary(std::string_view op, const Var& a, F f, D d) {
  Tensor out(a.rows(), a.cols());
  auto src = a.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return record(op, std::move(out), {a.node()},
                [d](const Node& self, const Tensor& g, GradSink& sink) {
                  Tensor* ga = sink.slot(self.inputs[0]);
                  if (!ga) return;
                  auto x = self.inputs[0]->value.data();
                  auto o = self.value.data();
                  auto gi = g.data();
                  auto go = ga->data();
                  for (std::size_t i = 0; i < x.size(); ++i) go[i] += gi[i] * d(x[i], o[i]);
                });
}

void require_same_cols(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": column mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_string(a) + " x " + shape_string(b));
  }
  Tensor out(a.rows(), b.cols());
  K().gemm_nn(a.rows(), b.cols(), a.cols(), a.data().data(), b.data().data(), out.data().data(),
              false);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_same_cols(a, b, "matmul_nt");
  Tensor out(a.rows(), b.rows());
  K().gemm_nt(a.rows(), b.rows(), a.cols(), a.data().data(), b.data().data(), out.data().data(),
              false);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: " + shape_string(a) + "^T x " + shape_string(b));
  }
  Tensor out(a.cols(), b.cols());
  K().gemm_tn(a.cols(), b.cols(), a.rows(), a.data().data(), b.data().data(), out.data().data(),
              false);
  return out;
}

namespace {

// Constant, mostly-zero left operands (bag-of-words features) go through CSR.
std::shared_ptr<const CsrMatrix> sparse_constant(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  if (a.requires_grad() || av.size() < 4096 || b.cols() < 8) return nullptr;
  std::size_t nnz = 0;
  for (double v : av.data()) nnz += v != 0.0;
  if (nnz * 10 > av.size()) return nullptr;
  return std::make_shared<const CsrMatrix>(CsrMatrix::from_dense(av));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.rows() == 0 || a.cols() != b.rows()) {
    // Shape errors are reported by the dense path.
  } else if (auto csr = sparse_constant(a, b)) {
    return spmm(std::move(csr), b);
  }
  Tensor out = matmul(a.value(), b.value());
  return record("matmul", std::move(out), {a.node(), b.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  const Tensor& av = self.inputs[0]->value;
                  const Tensor& bv = self.inputs[1]->value;
                  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    K().gemm_nt(m, k, n, g.data().data(), bv.data().data(), ga->data().data(),
                                true);
                  }
                  if (Tensor* gb = sink.slot(self.inputs[1])) {
                    K().gemm_tn(k, n, m, av.data().data(), g.data().data(), gb->data().data(),
                                true);
                  }
                });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tensor out = matmul_nt(a.value(), b.value());
  return record("matmul_nt", std::move(out), {a.node(), b.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  const Tensor& av = self.inputs[0]->value;
                  const Tensor& bv = self.inputs[1]->value;
                  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    K().gemm_nn(m, k, n, g.data().data(), bv.data().data(), ga->data().data(),
                                true);
                  }
                  if (Tensor* gb = sink.slot(self.inputs[1])) {
                    K().gemm_tn(n, k, m, g.data().data(), av.data().data(), gb->data().data(),
                                true);
                  }
                });
}

Var spmm(std::shared_ptr<const CsrMatrix> m, const Var& x) {
  Tensor out = m->multiply(x.value());
  return record("spmm", std::move(out), {x.node()},
                [m](const Node& self, const Tensor& g, GradSink& sink) {
                  if (sink.slot(self.inputs[0])) sink.add(self.inputs[0], m->multiply_transposed(g));
                });
}

Var transpose(const Var& a) {
  return record("transpose", a.value().transposed(), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  if (sink.slot(self.inputs[0])) sink.add(self.inputs[0], g.transposed());
                });
}

Var add(const Var& a, const Var& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Var scale(const Var& a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        const double z = std::clamp(x, -kSigmoidClamp, kSigmoidClamp);
        return 1.0 / (1.0 + std::exp(-z));
      },
      [](double x, double o) { return std::abs(x) <= kSigmoidClamp ? o * (1.0 - o) : 0.0; });
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(std::clamp(x, -kExpClamp, kExpClamp)); },
      [](double x, double o) { return std::abs(x) <= kExpClamp ? o : 0.0; });
}

Var log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(v));
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var pow(const Var& a, double p) {
  const bool integral = std::floor(p) == p;
  for (double v : a.value().data()) {
    if ((!integral && v < 0.0) || (p < 0.0 && v == 0.0)) {
      throw DomainError("pow: argument " + std::to_string(v) + " outside domain for exponent " +
                        std::to_string(p));
    }
  }
  return unary(
      "pow", a, [p](double x) { return std::pow(x, p); },
      [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return record("sum", Tensor::scalar(s), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    const double u = g.item();
                    for (double& v : ga->data()) v += u;
                  }
                });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sum_squares(const Var& a) {
  const auto d = a.value().data();
  const double s = K().sum_squares(d.data(), d.size());
  return record("sum_squares", Tensor::scalar(s), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    auto x = self.inputs[0]->value.data();
                    K().axpy(2.0 * g.item(), x.data(), ga->data().data(), x.size());
                  }
                });
}

Var row_sum(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v;
    out(i, 0) = s;
  }
  return record("row_sum", std::move(out), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    for (std::size_t i = 0; i < ga->rows(); ++i)
                      for (double& v : ga->row(i)) v += g(i, 0);
                  }
                });
}

Var col_sum(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    K().axpy(1.0, x.row(i).data(), out.data().data(), x.cols());
  }
  return record("col_sum", std::move(out), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    for (std::size_t i = 0; i < ga->rows(); ++i)
                      K().axpy(1.0, g.data().data(), ga->row(i).data(), ga->cols());
                  }
                });
}

Var col_mean(const Var& a) {
  if (a.rows() == 0) throw DimensionError("col_mean of tensor with no rows");
  return scale(col_sum(a), 1.0 / static_cast<double>(a.rows()));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  std::vector<NodePtr> inputs;
  for (const Var& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: column mismatch");
    r += p.rows();
    inputs.push_back(p.node());
  }
  Tensor out(r, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + off * c);
    off += p.rows();
  }
  return record("concat_rows", std::move(out), std::move(inputs),
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  std::size_t off = 0;
                  for (const NodePtr& in : self.inputs) {
                    const std::size_t n = in->value.size();
                    if (Tensor* gi = sink.slot(in)) {
                      auto src = g.data().subspan(off, n);
                      auto dst = gi->data();
                      for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
                    }
                    off += n;
                  }
                });
}

Var index_rows(const Var& a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  Tensor out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw DimensionError("index_rows: row index out of range");
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return record("index_rows", std::move(out), {a.node()},
                [idx = std::move(idx)](const Node& self, const Tensor& g, GradSink& sink) {
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    for (std::size_t i = 0; i < idx.size(); ++i)
                      K().axpy(1.0, g.row(i).data(), ga->row(idx[i]).data(), g.cols());
                  }
                });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) throw DimensionError("slice_rows: bad range");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return index_rows(a, idx);
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) throw DimensionError("reshape: size mismatch");
  Tensor out(rows, cols, std::vector<double>(a.value().data().begin(), a.value().data().end()));
  return record("reshape", std::move(out), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  if (Tensor* ga = sink.slot(self.inputs[0])) {
                    auto dst = ga->data();
                    auto src = g.data();
                    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                  }
                });
}

Var row_softmax(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    auto oi = out.row(i);
    const double mx = *std::max_element(xi.begin(), xi.end());
    double z = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j) z += (oi[j] = std::exp(xi[j] - mx));
    for (double& v : oi) v /= z;
  }
  return record("row_softmax", std::move(out), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  Tensor* ga = sink.slot(self.inputs[0]);
                  if (!ga) return;
                  for (std::size_t i = 0; i < g.rows(); ++i) {
                    auto y = self.value.row(i);
                    auto gi = g.row(i);
                    const double d = K().dot(gi.data(), y.data(), y.size());
                    auto dst = ga->row(i);
                    for (std::size_t j = 0; j < y.size(); ++j) dst[j] += y[j] * (gi[j] - d);
                  }
                });
}

Var cross_entropy_with_logits(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (labels.size() != z.rows()) throw DimensionError("cross_entropy: label count mismatch");
  if (z.rows() == 0) throw DimensionError("cross_entropy: no rows");
  Tensor probs(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols()) {
      throw DimensionError("cross_entropy: label " + std::to_string(y) + " outside [0," +
                           std::to_string(z.cols()) + ")");
    }
    auto zi = z.row(i);
    const double mx = *std::max_element(zi.begin(), zi.end());
    double s = 0.0;
    for (std::size_t j = 0; j < zi.size(); ++j) s += (probs(i, j) = std::exp(zi[j] - mx));
    for (std::size_t j = 0; j < zi.size(); ++j) probs(i, j) /= s;
    loss += mx + std::log(s) - zi[y];
  }
  const double inv = 1.0 / static_cast<double>(z.rows());
  std::vector<int> ys(labels.begin(), labels.end());
  return record(
      "cross_entropy", Tensor::scalar(loss * inv), {logits.node()},
      [probs = std::move(probs), ys = std::move(ys), inv](const Node& self, const Tensor& g,
                                                           GradSink& sink) {
        Tensor* ga = sink.slot(self.inputs[0]);
        if (!ga) return;
        const double u = g.item() * inv;
        for (std::size_t i = 0; i < probs.rows(); ++i) {
          auto dst = ga->row(i);
          auto p = probs.row(i);
          for (std::size_t j = 0; j < p.size(); ++j) dst[j] += u * p[j];
          dst[ys[i]] -= u;
        }
      });
}

Var cosine_similarity_matrix(const Var& a, const Var& b) {
  require_same_cols(a.value(), b.value(), "cosine_similarity_matrix");
  auto normalise = [](const Tensor& x, std::vector<double>& norms) {
    Tensor u(x.rows(), x.cols());
    norms.assign(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double n = std::sqrt(K().sum_squares(x.row(i).data(), x.cols()));
      norms[i] = n;
      if (n > 0.0)
        for (std::size_t j = 0; j < x.cols(); ++j) u(i, j) = x(i, j) / n;
    }
    return u;
  };
  std::vector<double> na, nb;
  Tensor ua = normalise(a.value(), na);
  Tensor ub = normalise(b.value(), nb);
  Tensor out = matmul_nt(ua, ub);
  return record(
      "cosine_similarity_matrix", std::move(out), {a.node(), b.node()},
      [ua = std::move(ua), ub = std::move(ub), na = std::move(na), nb = std::move(nb)](
          const Node& self, const Tensor& g, GradSink& sink) {
        // d/dx of x/|x| applied to v is (v - (v.u)u)/|x|.
        auto project = [](const Tensor& du, const Tensor& u, const std::vector<double>& n,
                          Tensor& dst) {
          for (std::size_t i = 0; i < u.rows(); ++i) {
            if (n[i] == 0.0) continue;
            const double d = K().dot(du.row(i).data(), u.row(i).data(), u.cols());
            for (std::size_t j = 0; j < u.cols(); ++j)
              dst(i, j) += (du(i, j) - d * u(i, j)) / n[i];
          }
        };
        if (Tensor* ga = sink.slot(self.inputs[0])) project(matmul(g, ub), ua, na, *ga);
        if (Tensor* gb = sink.slot(self.inputs[1])) project(matmul_tn(g, ua), ub, nb, *gb);
      });
}

Var center_rows(const Var& a) {
  const Tensor& x = a.value();
  if (x.rows() == 0) throw DimensionError("center_rows: no rows");
  std::vector<double> mu(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) K().axpy(1.0, x.row(i).data(), mu.data(), x.cols());
  for (double& v : mu) v /= static_cast<double>(x.rows());
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) - mu[j];
  return record("center_rows", std::move(out), {a.node()},
                [](const Node& self, const Tensor& g, GradSink& sink) {
                  Tensor* ga = sink.slot(self.inputs[0]);
                  if (!ga) return;
                  std::vector<double> gm(g.cols(), 0.0);
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    K().axpy(1.0, g.row(i).data(), gm.data(), g.cols());
                  const double inv = 1.0 / static_cast<double>(g.rows());
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                      (*ga)(i, j) += g(i, j) - gm[j] * inv;
                });
}

Var pairwise_sum(const Var& u, const Var& v) {
  require_same_cols(u.value(), v.value(), "pairwise_sum");
  const Tensor& x = u.value();
  const Tensor& y = v.value();
  const std::size_t nu = x.rows(), nv = y.rows(), h = x.cols();
  Tensor out(nu * nv, h);
  for (std::size_t i = 0; i < nu; ++i) {
    for (std::size_t j = 0; j < nv; ++j) {
      double* dst = out.row(i * nv + j).data();
      const double* xi = x.row(i).data();
      const double* yj = y.row(j).data();
      for (std::size_t c = 0; c < h; ++c) dst[c] = xi[c] + yj[c];
    }
  }
  return record("pairwise_sum", std::move(out), {u.node(), v.node()},
                [nu, nv, h](const Node& self, const Tensor& g, GradSink& sink) {
                  Tensor* gu = sink.slot(self.inputs[0]);
                  Tensor* gv = sink.slot(self.inputs[1]);
                  for (std::size_t i = 0; i < nu; ++i) {
                    for (std::size_t j = 0; j < nv; ++j) {
                      const double* src = g.row(i * nv + j).data();
                      if (gu) K().axpy(1.0, src, gu->row(i).data(), h);
                      if (gv) K().axpy(1.0, src, gv->row(j).data(), h);
                    }
                  }
                });
}

}  // namespace tcgu::ad
