#pragma once

// Laplacian Score, Marginal Laplacian Score and score-based selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mls/common.hpp"
#include "mls/data.hpp"
#include "mls/margins.hpp"

namespace mls {

enum class Method { LS, MLS, DUFS, DUFS_MLS };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::LS: return "ls";
    case Method::MLS: return "mls";
    case Method::DUFS: return "dufs";
    case Method::DUFS_MLS: return "dufs-mls";
  }
  return "?";
}

/// Gate methods rank by largest gate mean; score methods by smallest score.
inline bool higher_is_better(Method m) { return m == Method::DUFS || m == Method::DUFS_MLS; }

enum class KernelMode {
  Heat,       // exp(-||xi - xj||^2 / t)
  BinaryKnn,  // 1 for symmetrized k-nearest neighbours, 0 otherwise
  Printed,    // exp(+||xi - xj|| / t), the literal kernel some texts print; for comparison only
};

struct KernelConfig {
  KernelMode mode = KernelMode::Heat;
  std::optional<double> bandwidth;  // default: mean squared pairwise distance
  int neighbors = 5;
};

using Params = std::vector<std::pair<std::string, std::string>>;

struct ScoreReport {
  Method method = Method::MLS;
  Vector scores;
  std::vector<std::string> feature_names;
  std::vector<bool> constant_feature;
  Params params;
};

struct Selection {
  std::vector<Index> indices;  // best first
  bool degenerate = false;     // every candidate carried the worst-score sentinel
};

inline constexpr double kWorstScore = std::numeric_limits<double>::infinity();

/// Squared Euclidean distances between rows.
inline Matrix pairwise_sq_distances(const Matrix& rows) {
  const Index n = rows.rows();
  const Matrix xt = rows.transpose();
  Matrix dist = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 1; i < n; ++i) {
      const double v = (xt.col(i) - xt.col(j)).squaredNorm();
      dist(i, j) = v;
      dist(j, i) = v;
    }
  return dist;
}

/// Mean of ||xi - xj||^2 over distinct pairs; 1 if every row coincides.
inline double mean_sq_distance(const Matrix& sq_dist) {
  const Index n = sq_dist.rows();
  const double mean = sq_dist.sum() / static_cast<double>(n * (n - 1));
  return mean > 0.0 ? mean : 1.0;
}

/// Sample affinity graph S for the Laplacian Score.
inline Matrix ls_affinity(const Matrix& x, const KernelConfig& kc, double* bandwidth_used = nullptr) {
  const Index n = x.rows();
  const Matrix sq = pairwise_sq_distances(x);
  if (kc.mode == KernelMode::BinaryKnn) {
    require(kc.neighbors >= 1 && kc.neighbors <= n - 1, "neighbor count must be in [1, n-1]");
    Matrix s = Matrix::Zero(n, n);
    std::vector<Index> order(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
      std::iota(order.begin(), order.end(), Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sq(i, a) < sq(i, b); });
      int taken = 0;
      for (Index j : order) {
        if (j == i) continue;
        s(i, j) = 1.0;
        s(j, i) = 1.0;
        if (++taken == kc.neighbors) break;
      }
    }
    if (bandwidth_used) *bandwidth_used = 0.0;
    return s;
  }
  const double t = kc.bandwidth ? *kc.bandwidth : mean_sq_distance(sq);
  require(t > 0.0, "kernel bandwidth must be positive");
  if (bandwidth_used) *bandwidth_used = t;
  if (kc.mode == KernelMode::Printed) return (sq.array().sqrt() / t).exp().matrix();
  return (-sq.array() / t).exp().matrix();
}

/// Laplacian Score per feature: (f~' L f~) / (f~' D f~) with D-weighted centering.
/// Lower is better; constant features get +inf.
inline ScoreReport laplacian_score(const Dataset& ds, const KernelConfig& kc = {}) {
  const Matrix& x = ds.values();
  const Index d = x.cols();
  const auto constant = constant_columns(x);
  if (std::all_of(constant.begin(), constant.end(), [](bool c) { return c; }))
    throw DataError("all features are constant");

  double t = 0.0;
  const Matrix s = ls_affinity(x, kc, &t);
  const Vector deg = s.rowwise().sum();
  const double vol = deg.sum();
  if (!(vol > 0.0)) throw NumericError("affinity graph has zero volume");

  Matrix centered = x;
  for (Index r = 0; r < d; ++r) centered.col(r).array() -= deg.dot(x.col(r)) / vol;
  const Matrix sf = s * centered;

  ScoreReport rep;
  rep.method = Method::LS;
  rep.feature_names = ds.feature_names();
  rep.constant_feature = constant;
  rep.scores.resize(d);
  for (Index r = 0; r < d; ++r) {
    if (constant[static_cast<size_t>(r)]) {
      rep.scores[r] = kWorstScore;
      continue;
    }
    const auto f = centered.col(r);
    const double fdf = (deg.array() * f.array().square()).sum();
    const double fsf = f.dot(sf.col(r));
    rep.scores[r] = fdf > 0.0 ? (fdf - fsf) / fdf : kWorstScore;
  }
  const char* mode = kc.mode == KernelMode::Heat ? "heat" : kc.mode == KernelMode::Printed ? "printed" : "knn";
  rep.params = {{"kernel", mode}, {"bandwidth", format_real(t)}};
  if (kc.mode == KernelMode::BinaryKnn) rep.params.emplace_back("neighbors", std::to_string(kc.neighbors));
  return rep;
}

/// Direct double sum  sum_i sum_j (f_i - f_j)^2 w_ij u_i / Var(f).
inline double mls_naive(const Eigen::Ref<const Vector>& f, const Matrix& w, const Eigen::Ref<const Vector>& u) {
  const double var = variance(f);
  if (!(var > 0.0)) throw DataError("marginal Laplacian score undefined for a zero-variance feature");
  const Index n = f.size();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (u[i] == 0.0) continue;
    double row = 0.0;
    for (Index j = 0; j < n; ++j) row += (f[i] - f[j]) * (f[i] - f[j]) * w(i, j);
    total += row * u[i];
  }
  return total / var;
}

/// Column-wise numerators  f'UDf + 1'UW f^2 - 2 f'WUf  for every column of f.
inline Vector mls_numerators(const Matrix& f, const Matrix& w, const Vector& u) {
  const Vector deg = w.rowwise().sum();
  const Vector ud = u.cwiseProduct(deg);
  const Vector wtu = w.transpose() * u;
  const Matrix wuf = w * (u.asDiagonal() * f);
  const Matrix f2 = f.array().square().matrix();
  Vector num(f.cols());
  for (Index r = 0; r < f.cols(); ++r)
    num[r] = ud.dot(f2.col(r)) + wtu.dot(f2.col(r)) - 2.0 * f.col(r).dot(wuf.col(r));
  return num;
}

/// Marginal Laplacian Score via the matrix form. `ds` must be the matrix the model
/// was built from. Lower is better; constant features get +inf.
inline ScoreReport mls(const Dataset& ds, const MarginModel& model, const InteractionWeights* weights = nullptr) {
  const Matrix& x = ds.values();
  const Index d = x.cols();
  require(model.n_samples() == x.rows() && model.n_features() == d, "margin model does not match dataset");
  const auto constant = constant_columns(x);
  if (std::all_of(constant.begin(), constant.end(), [](bool c) { return c; }))
    throw DataError("all features are constant");

  InteractionWeights local;
  if (!weights) {
    local = interaction_weights(model);
    weights = &local;
  }
  const Vector num = mls_numerators(x, weights->w, model.u);

  ScoreReport rep;
  rep.method = Method::MLS;
  rep.feature_names = ds.feature_names();
  rep.constant_feature = constant;
  rep.scores.resize(d);
  for (Index r = 0; r < d; ++r) {
    const double var = constant[static_cast<size_t>(r)] ? 0.0 : variance(x.col(r));
    rep.scores[r] = var > 0.0 ? num[r] / var : kWorstScore;
  }
  rep.params = {{"temperature", format_real(weights->t)},
                {"marginal_samples", std::to_string(model.n_marginal())}};
  return rep;
}

/// Best `count` features, ties broken by lowest index.
inline Selection select_top(const ScoreReport& report, Index count) {
  const Index d = report.scores.size();
  if (count < 1 || count > d)
    throw ConfigError("number of features must be in [1, " + std::to_string(d) + "]");
  std::vector<Index> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  const bool desc = higher_is_better(report.method);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return desc ? report.scores[a] > report.scores[b] : report.scores[a] < report.scores[b];
  });
  Selection sel;
  sel.indices.assign(order.begin(), order.begin() + count);
  if (!desc)
    sel.degenerate = std::all_of(sel.indices.begin(), sel.indices.end(),
                                 [&](Index r) { return report.scores[r] == kWorstScore; });
  return sel;
}

/// 1-based rank of every feature under select_top's ordering.
inline std::vector<Index> ranks(const ScoreReport& report) {
  const auto sel = select_top(report, report.scores.size());
  std::vector<Index> rank(sel.indices.size());
  for (size_t pos = 0; pos < sel.indices.size(); ++pos) rank[static_cast<size_t>(sel.indices[pos])] = static_cast<Index>(pos) + 1;
  return rank;
}

}  // namespace mls
