#pragma once

// Margin model: which side of each feature is "of interest", which samples fall
// in it, per-sample weights u and the margin-space interaction weights W.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mls/common.hpp"
#include "mls/data.hpp"

namespace mls {

enum class MarginKind { Right, TwoSided, Left };

inline const char* to_string(MarginKind k) {
  switch (k) {
    case MarginKind::Right: return "right";
    case MarginKind::TwoSided: return "two-sided";
    case MarginKind::Left: return "left";
  }
  return "?";
}

struct MarginConfig {
  double quantile = 0.05;
  double skew_right = 0.5;
  double skew_left = -0.5;
  int k = 1;
  std::optional<double> temperature_override;

  void validate() const {
    require(quantile > 0.0 && quantile < 0.5, "quantile must be in (0, 0.5)");
    require(skew_left < skew_right, "skew_left must be below skew_right");
    require(k >= 1, "k must be >= 1");
    require(!temperature_override || *temperature_override > 0.0, "temperature must be positive");
  }
};

/// Lower/upper cutoffs for one feature. Samples strictly below `lower` or strictly
/// above `upper` are in the margin; an absent side never matches.
struct MarginCutoffs {
  std::optional<double> lower;
  std::optional<double> upper;
};

struct MarginModel {
  std::vector<MarginKind> kinds;
  std::vector<MarginCutoffs> cutoffs;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> membership;  // n x d
  Eigen::VectorXi counts;                                          // c_i
  std::vector<bool> in_dataset_margin;                             // c_i >= k
  Vector u;
  Matrix margin_rep;  // n x d
  double t = 1.0;

  Index n_samples() const { return margin_rep.rows(); }
  Index n_features() const { return margin_rep.cols(); }
  Index n_marginal() const {
    return static_cast<Index>(std::count(in_dataset_margin.begin(), in_dataset_margin.end(), true));
  }
};

struct InteractionWeights {
  Matrix w;
  double t = 1.0;
};

/// Fisher-Pearson skewness g1 = m3 / m2^{3/2}, central moments with divisor n.
inline double skewness(const Eigen::Ref<const Vector>& f) {
  const Index n = f.size();
  if (n < 3) throw DataError("skewness needs at least 3 values");
  const double mean = f.mean();
  double m2 = 0.0;
  double m3 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double c = f[i] - mean;
    m2 += c * c;
    m3 += c * c * c;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (!(m2 > 0.0)) throw DataError("skewness undefined for a zero-variance feature");
  return m3 / std::pow(m2, 1.5);
}

inline MarginKind classify_skew(double s, const MarginConfig& cfg) {
  if (s >= cfg.skew_right) return MarginKind::Right;
  if (s <= cfg.skew_left) return MarginKind::Left;
  return MarginKind::TwoSided;
}

/// Empirical quantile of already-sorted values, linear interpolation between order
/// statistics at position p * (n - 1).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double empirical_quantile(const Eigen::Ref<const Vector>& f, double p) {
  std::vector<double> s(f.data(), f.data() + f.size());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, p);
}

inline MarginCutoffs margin_cutoffs(const Eigen::Ref<const Vector>& f, MarginKind kind, double q) {
  std::vector<double> s(f.data(), f.data() + f.size());
  std::sort(s.begin(), s.end());
  switch (kind) {
    case MarginKind::Right: return {std::nullopt, quantile_sorted(s, 1.0 - q)};
    case MarginKind::Left: return {quantile_sorted(s, q), std::nullopt};
    case MarginKind::TwoSided: return {quantile_sorted(s, q / 2.0), quantile_sorted(s, 1.0 - q / 2.0)};
  }
  return {};
}

inline bool in_margin(double v, const MarginCutoffs& c) {
  return (c.lower && v < *c.lower) || (c.upper && v > *c.upper);
}

/// Samples of f inside its margin of the given kind at quantile q.
inline std::vector<bool> feature_margin(const Eigen::Ref<const Vector>& f, MarginKind kind, double q) {
  require(q > 0.0 && q < 0.5, "quantile must be in (0, 0.5)");
  const auto cut = margin_cutoffs(f, kind, q);
  std::vector<bool> mask(static_cast<size_t>(f.size()));
  for (Index i = 0; i < f.size(); ++i) mask[static_cast<size_t>(i)] = in_margin(f[i], cut);
  return mask;
}

/// Kernel temperature max(1, 2 sqrt(n_f) / 10): a tenth of the largest distance
/// between margin rows when values lie in [-1, 1].
inline double temperature(Index n_features) {
  require(n_features >= 1, "temperature needs at least one feature");
  return std::max(1.0, 2.0 * std::sqrt(static_cast<double>(n_features)) / 10.0);
}

/// Expects the standardized matrix.
inline MarginModel build_margin_model(const Dataset& ds, const MarginConfig& cfg) {
  cfg.validate();
  const Matrix& x = ds.values();
  const Index n = x.rows();
  const Index d = x.cols();
  MarginModel m;
  m.kinds.resize(static_cast<size_t>(d));
  m.cutoffs.resize(static_cast<size_t>(d));
  m.membership.setConstant(n, d, false);
  for (Index r = 0; r < d; ++r) {
    const auto col = x.col(r);
    if (col.maxCoeff() == col.minCoeff()) {
      m.kinds[static_cast<size_t>(r)] = MarginKind::TwoSided;
      continue;  // empty margin
    }
    const MarginKind kind = classify_skew(skewness(col), cfg);
    const auto cut = margin_cutoffs(col, kind, cfg.quantile);
    m.kinds[static_cast<size_t>(r)] = kind;
    m.cutoffs[static_cast<size_t>(r)] = cut;
    for (Index i = 0; i < n; ++i) m.membership(i, r) = in_margin(col[i], cut);
  }
  m.counts = m.membership.cast<int>().rowwise().sum();
  m.in_dataset_margin.resize(static_cast<size_t>(n));
  m.u = Vector::Zero(n);
  m.margin_rep = Matrix::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    const bool marginal = m.counts[i] >= cfg.k;
    m.in_dataset_margin[static_cast<size_t>(i)] = marginal;
    if (!marginal) continue;
    m.u[i] = std::log(static_cast<double>(m.counts[i]) + 1.0);
    for (Index r = 0; r < d; ++r)
      if (m.membership(i, r)) m.margin_rep(i, r) = x(i, r);
  }
  m.t = cfg.temperature_override ? *cfg.temperature_override : temperature(d);
  return m;
}

/// Pairwise Euclidean distances between the rows of `rows` (unsquared).
inline Matrix pairwise_distances(const Matrix& rows) {
  const Index n = rows.rows();
  const Matrix xt = rows.transpose();  // column access is contiguous
  Matrix dist = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const double v = std::sqrt((xt.col(i) - xt.col(j)).squaredNorm());
      dist(i, j) = v;
      dist(j, i) = v;
    }
  }
  return dist;
}

/// w_ij = exp(-||m_i - m_j|| / t) over the margin representation.
inline InteractionWeights interaction_weights(const MarginModel& model) {
  require(model.t > 0.0, "temperature must be positive");
  InteractionWeights iw;
  iw.t = model.t;
  iw.w = (-pairwise_distances(model.margin_rep).array() / model.t).exp().matrix();
  return iw;
}

}  // namespace mls
