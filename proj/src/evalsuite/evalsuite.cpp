#include "tcgu/evalsuite/evalsuite.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "tcgu/graphdata/deletion.hpp"
#include "tcgu/numerics/ops.hpp"

namespace tcgu {

double utility_report(const GnnModel& model, const AttributedGraph& graph) {
  const std::vector<std::size_t> test = graph.test_nodes();
  if (test.empty()) throw ValidationError("utility needs a non-empty test mask");
  const GnnOutput out = infer(model, graph_propagator(graph, model.arch.w_loop), graph.features);
  return micro_f1(out.logits.value(), graph.labels, test);
}

Tensor posteriors(const GnnModel& model, const AttributedGraph& graph) {
  const GnnOutput out = infer(model, graph_propagator(graph, model.arch.w_loop), graph.features);
  return ad::row_softmax(out.logits).value();
}

double auc_score(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Rank sum of positives with mid-ranks for ties.
  double rank_sum = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += mid;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw ValidationError("auc needs both positives and negatives");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(neg));
}

Tensor mia_features(const Tensor& post_original, const Tensor& post_unlearned) {
  if (!post_original.same_shape(post_unlearned)) throw DimensionError("mia_features: posterior shapes differ");
  const std::size_t n = post_original.rows(), c = post_original.cols();
  Tensor f(n, 3 * c + 1);
  std::vector<double> a(c), b(c);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(post_original.row(i).begin(), c, a.begin());
    std::copy_n(post_unlearned.row(i).begin(), c, b.begin());
    std::sort(a.rbegin(), a.rend());
    std::sort(b.rbegin(), b.rend());
    double sq = 0;
    for (std::size_t k = 0; k < c; ++k) {
      f(i, k) = a[k];
      f(i, c + k) = b[k];
      f(i, 2 * c + k) = a[k] - b[k];
      sq += (a[k] - b[k]) * (a[k] - b[k]);
    }
    f(i, 3 * c) = std::sqrt(sq);
  }
  return f;
}

namespace {

constexpr double kRidge = 1.0;
constexpr int kNewtonIters = 30;

// Solves m x = v in place by Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<double> m, std::vector<double> v) {
  const std::size_t d = v.size();
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(m[r * d + col]) > std::abs(m[piv * d + col])) piv = r;
    if (piv != col) {
      for (std::size_t k = 0; k < d; ++k) std::swap(m[col * d + k], m[piv * d + k]);
      std::swap(v[col], v[piv]);
    }
    const double p = m[col * d + col];
    for (std::size_t r = col + 1; r < d; ++r) {
      const double f = m[r * d + col] / p;
      if (f == 0) continue;
      for (std::size_t k = col; k < d; ++k) m[r * d + k] -= f * m[col * d + k];
      v[r] -= f * v[col];
    }
  }
  for (std::size_t col = d; col-- > 0;) {
    double s = v[col];
    for (std::size_t k = col + 1; k < d; ++k) s -= m[col * d + k] * v[k];
    v[col] = s / m[col * d + col];
  }
  return v;
}

// Ridge logistic regression by Newton's method; the intercept (last weight)
// is not penalised.
std::vector<double> fit_logistic(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
  const std::size_t d = x.front().size() + 1;
  std::vector<double> w(d, 0.0);
  for (int it = 0; it < kNewtonIters; ++it) {
    std::vector<double> g(d, 0.0), h(d * d, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double z = w[d - 1];
      for (std::size_t k = 0; k + 1 < d; ++k) z += w[k] * x[i][k];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double r = p - y[i], s = std::max(p * (1 - p), 1e-12);
      for (std::size_t a = 0; a < d; ++a) {
        const double xa = a + 1 < d ? x[i][a] : 1.0;
        g[a] += r * xa;
        for (std::size_t b = 0; b <= a; ++b) h[a * d + b] += s * xa * (b + 1 < d ? x[i][b] : 1.0);
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < a; ++b) h[b * d + a] = h[a * d + b];
      if (a + 1 < d) {
        g[a] += kRidge * w[a];
        h[a * d + a] += kRidge;
      } else {
        h[a * d + a] += 1e-9;
      }
    }
    const std::vector<double> step = solve(std::move(h), g);
    double change = 0;
    for (std::size_t a = 0; a < d; ++a) {
      w[a] -= step[a];
      change = std::max(change, std::abs(step[a]));
    }
    if (change < 1e-10) break;
  }
  return w;
}

}  // namespace

MiaReport mia_cross_validate(const Tensor& features, std::span<const int> membership, std::uint64_t seed,
                             std::size_t folds) {
  const std::size_t n = features.rows(), d = features.cols();
  if (membership.size() != n) throw DimensionError("mia: membership count differs from feature rows");
  if (folds < 2) throw ValidationError("mia needs at least two folds");
  if (!features.all_finite()) throw NumericError("mia: non-finite attack features");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (membership[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < folds || neg.size() < folds) {
    throw ValidationError("mia needs at least " + std::to_string(folds) + " positives and negatives");
  }
  bool varied = false;
  for (std::size_t i = 1; i < n && !varied; ++i) {
    for (std::size_t k = 0; k < d && !varied; ++k) varied = features(i, k) != features(0, k);
  }
  if (!varied) throw ValidationError("mia: degenerate posteriors, every node has identical attack features");

  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < pos.size(); ++i) fold_of[pos[i]] = i % folds;
  for (std::size_t i = 0; i < neg.size(); ++i) fold_of[neg[i]] = i % folds;

  MiaReport rep;
  rep.n_positives = pos.size();
  rep.n_negatives = neg.size();
  rep.seed = seed;
  rep.attacker = "logistic regression (ridge 1.0, standardised) on sorted posteriors of both models, their "
                 "difference and its L2 norm; " +
                 std::to_string(folds) + "-fold stratified cross-validation";
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) continue;
      ++m;
      for (std::size_t k = 0; k < d; ++k) mu[k] += features(i, k);
    }
    for (double& v : mu) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) continue;
      for (std::size_t k = 0; k < d; ++k) sd[k] += (features(i, k) - mu[k]) * (features(i, k) - mu[k]);
    }
    for (double& v : sd) {
      v = std::sqrt(v / static_cast<double>(m));
      if (v < 1e-12) v = 1.0;
    }
    auto standard = [&](std::size_t i) {
      std::vector<double> r(d);
      for (std::size_t k = 0; k < d; ++k) r[k] = (features(i, k) - mu[k]) / sd[k];
      return r;
    };
    std::vector<std::vector<double>> xtr;
    std::vector<int> ytr;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) continue;
      xtr.push_back(standard(i));
      ytr.push_back(membership[i]);
    }
    const std::vector<double> w = fit_logistic(xtr, ytr);
    std::vector<double> scores;
    std::vector<int> yte;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] != f) continue;
      const std::vector<double> x = standard(i);
      double z = w[d];
      for (std::size_t k = 0; k < d; ++k) z += w[k] * x[k];
      scores.push_back(z);
      yte.push_back(membership[i]);
    }
    rep.fold_aucs.push_back(auc_score(scores, yte));
  }
  rep.auc = mean_std(rep.fold_aucs).mean;
  return rep;
}

MiaReport mia_attack(const GnnModel& original, const GnnModel& unlearned, const AttributedGraph& graph,
                     std::span<const std::uint32_t> deleted, std::span<const std::size_t> heldout, std::uint64_t seed) {
  if (deleted.size() < 10 || heldout.size() < 10) {
    throw ValidationError("mia needs at least 10 deleted and 10 held-out nodes");
  }
  if (original.arch.out_dim < 2) throw ValidationError("mia: degenerate single-class posteriors");
  const Tensor po = posteriors(original, graph), pu = posteriors(unlearned, graph);
  std::vector<std::size_t> rows;
  std::vector<int> membership;
  for (std::uint32_t v : deleted) {
    if (v >= graph.num_nodes()) throw ValidationError("mia: deleted node id out of range");
    rows.push_back(v);
    membership.push_back(1);
  }
  for (std::size_t v : heldout) {
    if (v >= graph.num_nodes()) throw ValidationError("mia: held-out node id out of range");
    rows.push_back(v);
    membership.push_back(0);
  }
  Tensor so(rows.size(), po.cols()), su(rows.size(), pu.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(po.row(rows[i]).begin(), po.cols(), so.row(i).begin());
    std::copy_n(pu.row(rows[i]).begin(), pu.cols(), su.row(i).begin());
  }
  return mia_cross_validate(mia_features(so, su), membership, seed);
}

std::vector<EdgeAttackPoint> edge_attack_eval(const AttributedGraph& clean, std::span<const double> ratios,
                                              std::span<const std::uint64_t> seeds, const EdgeAttackConfig& cfg) {
  std::vector<EdgeAttackPoint> out;
  const std::vector<Edge> clean_edges = clean.edges();
  for (double ratio : ratios) {
    if (!(ratio > 0 && ratio <= 1)) throw ValidationError("attack ratios must lie in (0, 1]");
    for (std::uint64_t seed : seeds) {
      EdgeInjection inj;
      try {
        inj = inject_adversarial_edges(clean, ratio, seed);
      } catch (const ValidationError& e) {
        spdlog::warn("edge attack at ratio {} seed {} skipped: {}", ratio, seed, e.what());
        continue;
      }
      TrainConfig train = cfg.train;
      train.seed += seed;
      CondenseConfig cond = cfg.condense;
      cond.seed += seed;
      TransferConfig tr = cfg.transfer;
      tr.seed += seed;

      const Precondensed pre = precondense(inj.corrupted, cfg.arch, train, cond);
      DeletionRequest req;
      req.kind = DeletionKind::kEdge;
      req.edges = inj.edges;
      const AttributedGraph remaining = apply_deletion(inj.corrupted, req);
      if (req.edges != inj.edges || remaining.edges() != clean_edges) {
        throw std::logic_error("edge attack: unlearning target differs from the injected edge set");
      }
      const UnlearnRun run = unlearn(pre.original, pre.condensed, remaining, tr, train);

      EdgeAttackPoint p;
      p.ratio = ratio;
      p.seed = seed;
      p.injected = inj.edges.size();
      p.corrupted_f1 = utility_report(pre.original, inj.corrupted);
      p.unlearned_f1 = utility_report(run.unlearned, remaining);
      p.unlearning_seconds = run.timings.unlearning();
      out.push_back(p);
    }
  }
  return out;
}

void write_edge_attack_tsv(const std::filesystem::path& path, std::span<const EdgeAttackPoint> points) {
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_ratio;
  for (const auto& p : points) {
    by_ratio[p.ratio].first.push_back(p.corrupted_f1);
    by_ratio[p.ratio].second.push_back(p.unlearned_f1);
  }
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# ratio\truns\tcorrupted_f1_mean\tcorrupted_f1_std\tunlearned_f1_mean\tunlearned_f1_std\n";
  for (const auto& [ratio, v] : by_ratio) {
    const MeanStd c = mean_std(v.first), u = mean_std(v.second);
    f << ratio << '\t' << v.first.size() << '\t' << c.mean << '\t' << c.std << '\t' << u.mean << '\t' << u.std << '\n';
  }
}

nlohmann::json to_json(const MiaReport& r) {
  return {{"auc", r.auc},           {"fold_aucs", r.fold_aucs}, {"n_positives", r.n_positives},
          {"n_negatives", r.n_negatives}, {"attacker", r.attacker},   {"seed", r.seed},
          {"random_guess_auc", 0.5}};
}

nlohmann::json to_json(const EdgeAttackPoint& p) {
  return {{"ratio", p.ratio},
          {"seed", p.seed},
          {"injected_edges", p.injected},
          {"corrupted_f1", p.corrupted_f1},
          {"unlearned_f1", p.unlearned_f1},
          {"unlearning_seconds", p.unlearning_seconds}};
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return r;
}

}  // namespace tcgu
