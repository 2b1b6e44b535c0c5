#pragma once

// Stochastic-gate feature selection. Each feature r is multiplied by a gate
// z_r = clamp(0.5 + mu_r + eps_r, 0, 1), eps_r ~ N(0, sigma^2); the gate means mu
// are trained against a Laplacian-style objective divided by the expected number
// of open gates.
//
//   dufs:      -Tr[F~' (I - D~^-1 W~) F~] / (m sum_r P(Z_r >= 0) + delta)
//   dufs-mls:  -sum_r nu_r / (m sum_r P(Z_r >= 0) + delta)
//
// where nu_r = z_r^2 N_r / Var(f_r), N_r the marginal Laplacian numerator of f_r
// under the fixed margin weights U and W.
// Both losses are negated again when sign_flip is set.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mls/common.hpp"
#include "mls/data.hpp"
#include "mls/margins.hpp"
#include "mls/scores.hpp"
#include "mls/synth.hpp"

namespace mls {

struct GateState {
  Vector mu;
  double sigma = 0.5;
  double delta = 1e-4;
  std::optional<Index> m_gates;  // defaults to the feature count
  bool sign_flip = false;

  static GateState zeros(Index d) {
    GateState s;
    s.mu = Vector::Zero(d);
    return s;
  }

  double gate_count() const { return static_cast<double>(m_gates ? *m_gates : mu.size()); }

  void validate() const {
    require(sigma > 0.0, "sigma must be positive");
    require(delta > 0.0, "delta must be positive");
    require(!m_gates || *m_gates >= 1, "gate count must be positive");
    require(mu.allFinite(), "gate means must be finite");
  }
};

enum class LossVariant { Dufs, DufsMls };
enum class Optimizer { GradientDescent, Adam };

inline const char* to_string(LossVariant v) { return v == LossVariant::Dufs ? "dufs" : "dufs-mls"; }
inline const char* to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "gd"; }

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 0.1;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
  LossVariant loss_variant = LossVariant::DufsMls;

  void validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(learning_rate > 0.0, "learning rate must be positive");
  }
};

struct TrainTrace {
  std::vector<double> loss_history;
  Vector mu;
  Vector open_probabilities;
  bool no_margin_signal = false;
};

struct LossAndGradient {
  double loss = 0.0;
  Vector gradient;          // dLoss / dmu
  double bandwidth = 0.0;   // kernel temperature used (frozen for the gradient)
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); }

/// P(Z_r >= 0) = Phi((mu_r + 0.5) / sigma).
inline Vector open_prob(const GateState& state) {
  Vector p(state.mu.size());
  for (Index r = 0; r < p.size(); ++r) p[r] = normal_cdf((state.mu[r] + 0.5) / state.sigma);
  return p;
}

inline Vector sample_noise(const GateState& state, Rng& rng) {
  std::normal_distribution<double> normal(0.0, state.sigma);
  Vector eps(state.mu.size());
  for (Index r = 0; r < eps.size(); ++r) eps[r] = normal(rng);
  return eps;
}

inline Vector gates_from_noise(const Vector& mu, const Vector& eps) {
  return (mu.array() + 0.5 + eps.array()).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

inline Vector sample_gates(const GateState& state, Rng& rng) {
  return gates_from_noise(state.mu, sample_noise(state, rng));
}

namespace detail {

inline double gate_denominator(const GateState& state) {
  return state.gate_count() * open_prob(state).sum() + state.delta;
}

inline double loss_sign(const GateState& state) { return state.sign_flip ? 1.0 : -1.0; }

/// d(denominator)/d(mu_r) = m * phi((mu_r + 0.5) / sigma) / sigma.
inline Vector gate_denominator_grad(const GateState& state) {
  Vector g(state.mu.size());
  for (Index r = 0; r < g.size(); ++r)
    g[r] = state.gate_count() * normal_pdf((state.mu[r] + 0.5) / state.sigma) / state.sigma;
  return g;
}

/// Mean squared distance between gated rows, the per-epoch kernel bandwidth.
inline double dufs_bandwidth(const Matrix& gated) {
  const Index n = gated.rows();
  const Vector mean = gated.colwise().mean();
  const double spread = (gated.rowwise() - mean.transpose()).squaredNorm();
  const double t = 2.0 * spread / static_cast<double>(n - 1);
  return t > 0.0 ? t : 1.0;
}

struct DufsGraph {
  Matrix p;      // D^-1 K
  Vector degree;
};

inline DufsGraph dufs_graph(const Matrix& gated, double t) {
  const Matrix k = (-pairwise_sq_distances(gated).array() / t).exp().matrix();
  DufsGraph g;
  g.degree = k.rowwise().sum();
  for (Index i = 0; i < g.degree.size(); ++i)
    if (!(g.degree[i] > 0.0) || !std::isfinite(g.degree[i]))
      throw NumericError("degenerate kernel row " + std::to_string(i) + " (isolated sample)");
  g.p = g.degree.cwiseInverse().asDiagonal() * k;
  return g;
}

inline Matrix gated_columns(const Matrix& x, const Vector& z) { return x * z.asDiagonal(); }

constexpr double kClosedVariance = 1e-12;

}  // namespace detail

/// DUFS objective for a fixed gate sample. `bandwidth` freezes the kernel
/// temperature; by default it is the mean squared distance between gated rows.
inline double dufs_loss(const Dataset& ds, const Vector& z, const GateState& state,
                        std::optional<double> bandwidth = std::nullopt) {
  state.validate();
  require(z.size() == ds.n_features() && state.mu.size() == ds.n_features(), "gate size mismatch");
  const Matrix gated = detail::gated_columns(ds.values(), z);
  const double t = bandwidth ? *bandwidth : detail::dufs_bandwidth(gated);
  const auto g = detail::dufs_graph(gated, t);
  // Tr[X' (I - P) X] = sum ||x_i||^2 - sum_ij P_ij <x_i, x_j>
  const double trace = gated.squaredNorm() - (g.p * gated).cwiseProduct(gated).sum();
  return detail::loss_sign(state) * trace / detail::gate_denominator(state);
}

/// Analytic loss and gradient for gates z = clamp(0.5 + mu + eps). The bandwidth is
/// computed from the current gated data and held constant when differentiating.
inline LossAndGradient dufs_loss_grad(const Dataset& ds, const Vector& eps, const GateState& state,
                                      std::optional<double> bandwidth = std::nullopt) {
  state.validate();
  const Matrix& x = ds.values();
  const Index d = x.cols();
  const Vector z = gates_from_noise(state.mu, eps);
  const Matrix gated = detail::gated_columns(x, z);
  const double t = bandwidth ? *bandwidth : detail::dufs_bandwidth(gated);
  const auto g = detail::dufs_graph(gated, t);

  const Matrix gram = gated * gated.transpose();
  const Vector pg = g.p.cwiseProduct(gram).rowwise().sum();  // g_i = sum_j P_ij G_ij
  const double trace = gram.trace() - pg.sum();

  // A_ij = P_ij (G_ij - g_i); its rows sum to zero.
  const Matrix a = g.p.cwiseProduct(gram - pg.replicate(1, gram.cols()));
  const Vector a_colsum = a.colwise().sum().transpose();
  const Matrix px = g.p * x;
  const Matrix ax = a * x;

  const double den = detail::gate_denominator(state);
  const Vector dden = detail::gate_denominator_grad(state);
  const double sign = detail::loss_sign(state);

  LossAndGradient out;
  out.bandwidth = t;
  out.loss = sign * trace / den;
  out.gradient.resize(d);
  for (Index r = 0; r < d; ++r) {
    const double pre = 0.5 + state.mu[r] + eps[r];
    double dtrace = 0.0;
    if (pre > 0.0 && pre < 1.0) {
      const auto f = x.col(r);
      const double smooth = f.squaredNorm() - f.dot(px.col(r));
      const double kernel = a_colsum.dot(f.cwiseProduct(f)) - 2.0 * f.dot(ax.col(r));
      dtrace = 2.0 * z[r] * (smooth + kernel / t);
    }
    out.gradient[r] = sign * (dtrace * den - trace * dden[r]) / (den * den);
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite dufs loss");
  return out;
}

namespace detail {

/// Per-feature nu_r = z_r^2 N_r / Var(f_r): the marginal numerator of the gated
/// column over the variance of the ungated column. Constant columns contribute 0.
struct GatedMlsTerms {
  Vector nu;
  Vector unit_nu;   // N_r / Var(f_r), the batch MLS score
  Vector inv_var;   // 1 / Var(f_r), 0 for constant columns
};

inline GatedMlsTerms gated_mls_terms(const Matrix& x, const Vector& z, const Matrix& w, const Vector& u) {
  const Index d = x.cols();
  const Vector num = mls_numerators(x, w, u);
  GatedMlsTerms t{Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
  for (Index r = 0; r < d; ++r) {
    const double v = variance(x.col(r));
    if (v < kClosedVariance) continue;
    t.inv_var[r] = 1.0 / v;
    t.unit_nu[r] = num[r] / v;
    t.nu[r] = z[r] * z[r] * t.unit_nu[r];
  }
  return t;
}

}  // namespace detail

/// DUFS-MLS objective. U and W come from the margin model built once on the
/// ungated standardized data and stay fixed; at z = 1 the summed nu_r equals the
/// batch MLS scores. Pass precomputed `weights` to avoid rebuilding W.
inline double dufs_mls_loss(const Dataset& ds, const Vector& z, const GateState& state, const MarginModel& model,
                            const InteractionWeights* weights = nullptr) {
  state.validate();
  require(z.size() == ds.n_features() && state.mu.size() == ds.n_features(), "gate size mismatch");
  require(model.n_samples() == ds.n_samples() && model.n_features() == ds.n_features(),
          "margin model does not match dataset");
  InteractionWeights local;
  if (!weights) {
    local = interaction_weights(model);
    weights = &local;
  }
  const Vector nu = detail::gated_mls_terms(ds.values(), z, weights->w, model.u).nu;
  return detail::loss_sign(state) * nu.sum() / detail::gate_denominator(state);
}

inline LossAndGradient dufs_mls_loss_grad(const Dataset& ds, const Vector& eps, const GateState& state,
                                          const MarginModel& model, const InteractionWeights* weights = nullptr) {
  state.validate();
  InteractionWeights local;
  if (!weights) {
    local = interaction_weights(model);
    weights = &local;
  }
  const Matrix& x = ds.values();
  const Index d = x.cols();
  const Vector z = gates_from_noise(state.mu, eps);
  const auto terms = detail::gated_mls_terms(x, z, weights->w, model.u);
  const double total = terms.nu.sum();

  const double den = detail::gate_denominator(state);
  const Vector dden = detail::gate_denominator_grad(state);
  const double sign = detail::loss_sign(state);

  LossAndGradient out;
  out.bandwidth = weights->t;
  out.loss = sign * total / den;
  out.gradient.resize(d);
  for (Index r = 0; r < d; ++r) {
    const double pre = 0.5 + state.mu[r] + eps[r];
    const double dtotal = pre > 0.0 && pre < 1.0 ? 2.0 * z[r] * terms.unit_nu[r] : 0.0;
    out.gradient[r] = sign * (dtotal * den - total * dden[r]) / (den * den);
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite dufs-mls loss");
  return out;
}

/// Dispatches on the loss variant; `model` is required for dufs-mls.
inline LossAndGradient loss_gradient(LossVariant variant, const Dataset& ds, const Vector& eps,
                                     const GateState& state, const MarginModel* model = nullptr,
                                     const InteractionWeights* weights = nullptr) {
  if (variant == LossVariant::Dufs) return dufs_loss_grad(ds, eps, state);
  require(model != nullptr, "dufs-mls requires a margin model");
  return dufs_mls_loss_grad(ds, eps, state, *model, weights);
}

/// First-order training of the gate means with one noise sample per epoch.
inline TrainTrace train(const Dataset& ds, const TrainConfig& cfg, const GateState& state0,
                        const MarginModel* model = nullptr) {
  cfg.validate();
  state0.validate();
  require(state0.mu.size() == ds.n_features(), "gate size mismatch");
  require(cfg.loss_variant == LossVariant::Dufs || model != nullptr, "dufs-mls requires a margin model");

  Rng rng = make_rng(cfg.seed);
  GateState state = state0;
  const Index d = state.mu.size();
  Vector m1 = Vector::Zero(d);
  Vector m2 = Vector::Zero(d);
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double adam_eps = 1e-8;

  TrainTrace trace;
  trace.loss_history.reserve(static_cast<size_t>(cfg.epochs));
  trace.no_margin_signal = cfg.loss_variant == LossVariant::DufsMls && model->n_marginal() == 0;
  InteractionWeights weights;
  if (cfg.loss_variant == LossVariant::DufsMls) weights = interaction_weights(*model);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Vector eps = sample_noise(state, rng);
    LossAndGradient lg;
    try {
      lg = loss_gradient(cfg.loss_variant, ds, eps, state, model, &weights);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
    trace.loss_history.push_back(lg.loss);
    if (cfg.optimizer == Optimizer::Adam) {
      m1 = beta1 * m1 + (1.0 - beta1) * lg.gradient;
      m2 = beta2 * m2 + (1.0 - beta2) * lg.gradient.cwiseProduct(lg.gradient);
      const double c1 = 1.0 - std::pow(beta1, epoch + 1);
      const double c2 = 1.0 - std::pow(beta2, epoch + 1);
      state.mu.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps);
    } else {
      state.mu -= cfg.learning_rate * lg.gradient;
    }
  }
  trace.mu = state.mu;
  trace.open_probabilities = open_prob(state);
  return trace;
}

/// Wraps trained gate means as a report ranked by largest mean.
inline ScoreReport gate_report(const Dataset& ds, const TrainTrace& trace, LossVariant variant) {
  ScoreReport rep;
  rep.method = variant == LossVariant::Dufs ? Method::DUFS : Method::DUFS_MLS;
  rep.scores = trace.mu;
  rep.feature_names = ds.feature_names();
  rep.constant_feature = constant_columns(ds.values());
  return rep;
}

}  // namespace mls
