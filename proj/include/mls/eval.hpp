#pragma once

// Recovery accuracy, AUC-ROC, two-sample KS, the u-separation sweep, a small
// logistic regression and the synthetic-benchmark driver.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mls/common.hpp"
#include "mls/data.hpp"
#include "mls/gates.hpp"
#include "mls/margins.hpp"
#include "mls/scores.hpp"
#include "mls/synth.hpp"

namespace mls {

struct KsResult {
  double quantile = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  Index n_pos = 0;
  Index n_neg = 0;
};

/// One (setup, rho, method) cell of the benchmark grid; accuracies are fractions.
struct BenchCell {
  Setup setup = Setup::I;
  double rho = 0.9;
  Method method = Method::MLS;
  std::vector<double> accuracies;
  std::vector<std::uint64_t> seeds;
  double mean = 0.0;  // x100
  double std = 0.0;   // x100, population
};

struct EvalReport {
  std::string method;
  std::optional<double> selection_accuracy;
  std::optional<double> auc;
  std::vector<KsResult> ks;
  int repetitions = 0;
  std::vector<BenchCell> cells;
  std::optional<Index> best_quantile;  // index into ks with the largest D
};

/// |selected & truth| / min(|selected|, |truth|).
inline double selection_accuracy(const std::vector<Index>& selected, const std::vector<Index>& truth) {
  if (truth.empty()) throw ConfigError("ground-truth feature set is empty");
  if (selected.empty()) return 0.0;
  std::vector<Index> a = selected, b = truth;
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<Index> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / static_cast<double>(std::min(a.size(), b.size()));
}

/// Survival function of the Kolmogorov distribution, P(K > x).
inline double kolmogorov_sf(double x) {
  if (!(x > 0.0)) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  if (x < 1.0) {
    // Jacobi form of the CDF converges fast for small x.
    const double w = -pi * pi / (8.0 * x * x);
    double cdf = 0.0;
    for (int k = 1; k <= 50; k += 2) cdf += std::exp(w * k * k);
    cdf *= std::sqrt(2.0 * pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sf += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

/// Two-sample KS: exact sup |ECDF_a - ECDF_b| and the asymptotic p-value at
/// sqrt(n_e) * D, n_e = |a||b| / (|a| + |b|).
inline KsResult ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("KS test needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) x = a[i];
    else x = b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_sf(std::sqrt(na * nb / (na + nb)) * d);
  r.n_pos = static_cast<Index>(a.size());
  r.n_neg = static_cast<Index>(b.size());
  return r;
}

inline void require_two_classes(const std::vector<int>& labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw DataError("labels contain a single class");
}

/// Mann-Whitney AUC from midranks; ties count one half.
inline double auc_roc(const Eigen::Ref<const Vector>& scores, const std::vector<int>& labels) {
  const Index n = scores.size();
  require(static_cast<Index>(labels.size()) == n, "score and label counts differ");
  require_two_classes(labels);
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return scores[x] < scores[y]; });
  double rank_sum = 0.0;
  double n_pos = 0.0;
  for (Index lo = 0; lo < n;) {
    Index hi = lo;
    while (hi + 1 < n && scores[order[static_cast<size_t>(hi + 1)]] == scores[order[static_cast<size_t>(lo)]]) ++hi;
    const double mid = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (Index k = lo; k <= hi; ++k)
      if (labels[static_cast<size_t>(order[static_cast<size_t>(k)])] == 1) {
        rank_sum += mid;
        n_pos += 1.0;
      }
    lo = hi + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct LogisticConfig {
  int iterations = 1000;
  double l2 = 1e-3;
  double learning_rate = 0.1;
};

/// Weights are the d coefficients followed by the intercept.
inline Vector logistic_predict(const Vector& weights, const Matrix& x) {
  require(weights.size() == x.cols() + 1, "weight vector must have d + 1 entries");
  const Vector z = (x * weights.head(x.cols())).array() + weights[x.cols()];
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

/// Mean log-loss plus (l2 / 2) ||beta||^2; the intercept is not penalized.
inline double logistic_loss(const Vector& weights, const Matrix& x, const std::vector<int>& y, double l2) {
  const Vector z = (x * weights.head(x.cols())).array() + weights[x.cols()];
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    // log(1 + e^z) - y z, written to avoid overflow
    const double zi = z[i];
    loss += (zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - y[static_cast<size_t>(i)] * zi;
  }
  return loss / static_cast<double>(x.rows()) + 0.5 * l2 * weights.head(x.cols()).squaredNorm();
}

inline Vector logistic_gradient(const Vector& weights, const Matrix& x, const std::vector<int>& y, double l2) {
  const Index n = x.rows();
  Vector resid = logistic_predict(weights, x);
  for (Index i = 0; i < n; ++i) resid[i] -= y[static_cast<size_t>(i)];
  Vector g(x.cols() + 1);
  g.head(x.cols()) = x.transpose() * resid / static_cast<double>(n) + l2 * weights.head(x.cols());
  g[x.cols()] = resid.sum() / static_cast<double>(n);
  return g;
}

inline Vector logistic_fit(const Matrix& x, const std::vector<int>& y, const LogisticConfig& cfg = {}) {
  require(static_cast<Index>(y.size()) == x.rows(), "label count does not match rows");
  require(cfg.iterations >= 0 && cfg.l2 >= 0.0 && cfg.learning_rate > 0.0, "invalid logistic configuration");
  if (!x.allFinite()) throw DataError("non-finite value in logistic regression input");
  require_two_classes(y);
  Vector w = Vector::Zero(x.cols() + 1);
  for (int it = 0; it < cfg.iterations; ++it) w -= cfg.learning_rate * logistic_gradient(w, x, y, cfg.l2);
  return w;
}

/// Training AUC of a logistic model on the standardized chosen columns.
inline double selected_features_auc(const Dataset& ds, const std::vector<Index>& selected,
                                    const LogisticConfig& cfg = {}) {
  if (!ds.has_labels()) throw DataError("AUC evaluation needs labels");
  Matrix x(ds.n_samples(), static_cast<Index>(selected.size()));
  for (size_t c = 0; c < selected.size(); ++c) x.col(static_cast<Index>(c)) = ds.values().col(selected[c]);
  const Matrix z = standardize(ds.with_values(x).with_labels(std::nullopt)).first.values();
  const Vector w = logistic_fit(z, *ds.labels(), cfg);
  return auc_roc(logistic_predict(w, z), *ds.labels());
}

/// KS distance between the u weights of positives and negatives, one margin
/// model per quantile. `ds` should already be standardized.
inline EvalReport margin_weight_separation(const Dataset& ds, const MarginConfig& base,
                                           const std::vector<double>& quantiles) {
  if (!ds.has_labels()) throw DataError("margin validation needs labels");
  const auto& y = *ds.labels();
  require_two_classes(y);
  require(!quantiles.empty(), "quantile list is empty");
  EvalReport rep;
  rep.method = "margin-separation";
  rep.repetitions = 1;
  for (double q : quantiles) {
    MarginConfig cfg = base;
    cfg.quantile = q;
    const MarginModel m = build_margin_model(ds, cfg);
    std::vector<double> pos, neg;
    for (Index i = 0; i < ds.n_samples(); ++i) (y[static_cast<size_t>(i)] ? pos : neg).push_back(m.u[i]);
    KsResult r = ks_statistic(pos, neg);
    r.quantile = q;
    rep.ks.push_back(r);
  }
  Index best = 0;
  for (Index i = 1; i < static_cast<Index>(rep.ks.size()); ++i)
    if (rep.ks[static_cast<size_t>(i)].statistic > rep.ks[static_cast<size_t>(best)].statistic) best = i;
  rep.best_quantile = best;
  return rep;
}

struct BenchConfig {
  std::vector<Setup> setups{Setup::I, Setup::II, Setup::III};
  std::vector<double> rhos{0.9, 0.95, 0.97};
  std::vector<Method> methods{Method::MLS, Method::LS};
  int reps = 100;
  std::uint64_t seed = 0;
  Index n_samples = 1000;
  Index num_features = 5;
  bool standardize_data = true;
  MarginConfig margin;
  KernelConfig kernel;
  TrainConfig train;
  GateState gates;  // sigma, delta, sign_flip; mu is reset per dataset
  unsigned threads = 1;

  void validate() const {
    require(!setups.empty() && !rhos.empty() && !methods.empty(), "benchmark lists must be non-empty");
    require(reps >= 1, "reps must be >= 1");
    require(threads >= 1, "threads must be >= 1");
    for (double r : rhos) require(r > 0.0 && r < 1.0, "rho must be in (0, 1)");
    margin.validate();
    train.validate();
  }
};

/// Generator seed for repetition `rep`; independent of scheduling.
inline std::uint64_t rep_seed(std::uint64_t seed, int rep) {
  return make_rng(seed, static_cast<std::uint64_t>(rep))();
}

/// Top-k selection for one method on one (unstandardized) dataset.
inline std::vector<Index> run_method(Method method, const Dataset& raw, const BenchConfig& cfg, std::uint64_t seed) {
  const Dataset ds = cfg.standardize_data ? standardize(raw).first : raw;
  ScoreReport rep;
  if (method == Method::LS) {
    rep = laplacian_score(ds, cfg.kernel);
  } else if (method == Method::MLS) {
    rep = mls(ds, build_margin_model(ds, cfg.margin));
  } else {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.loss_variant = method == Method::DUFS ? LossVariant::Dufs : LossVariant::DufsMls;
    GateState st = cfg.gates;
    st.mu = Vector::Zero(ds.n_features());
    std::optional<MarginModel> model;
    if (tc.loss_variant == LossVariant::DufsMls) model = build_margin_model(ds, cfg.margin);
    rep = gate_report(ds, train(ds, tc, st, model ? &*model : nullptr), tc.loss_variant);
  }
  return select_top(rep, cfg.num_features).indices;
}

/// Synthetic recovery benchmark: every (setup, rho, method) cell over `reps`
/// generated datasets. Methods share the dataset of a given repetition.
inline EvalReport run_table1_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  EvalReport out;
  out.method = "benchmark";
  out.repetitions = cfg.reps;
  for (Setup s : cfg.setups)
    for (double rho : cfg.rhos)
      for (Method m : cfg.methods) {
        BenchCell c;
        c.setup = s;
        c.rho = rho;
        c.method = m;
        c.accuracies.assign(static_cast<size_t>(cfg.reps), 0.0);
        c.seeds.assign(static_cast<size_t>(cfg.reps), 0);
        out.cells.push_back(std::move(c));
      }

  const size_t per_rep = cfg.methods.size();
  const size_t n_jobs = cfg.setups.size() * cfg.rhos.size() * static_cast<size_t>(cfg.reps);
  auto job = [&](size_t idx) {
    const size_t rep = idx % static_cast<size_t>(cfg.reps);
    const size_t grid = idx / static_cast<size_t>(cfg.reps);
    const size_t s_idx = grid / cfg.rhos.size();
    const size_t r_idx = grid % cfg.rhos.size();
    SynthSpec spec;
    spec.setup = cfg.setups[s_idx];
    spec.rho = cfg.rhos[r_idx];
    spec.n_samples = cfg.n_samples;
    spec.seed = rep_seed(cfg.seed, static_cast<int>(rep));
    const SynthDataset data = gen_setup(spec);
    for (size_t k = 0; k < per_rep; ++k) {
      BenchCell& cell = out.cells[grid * per_rep + k];
      cell.seeds[rep] = spec.seed;
      cell.accuracies[rep] =
          selection_accuracy(run_method(cfg.methods[k], data.dataset, cfg, spec.seed), data.marginal_features);
    }
  };

  const unsigned n_threads = static_cast<unsigned>(std::min<size_t>(cfg.threads, n_jobs));
  if (n_threads <= 1) {
    for (size_t i = 0; i < n_jobs; ++i) job(i);
  } else {
    // strided partition; every job writes only its own slots
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_threads);
    for (unsigned t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (size_t i = t; i < n_jobs; i += n_threads) job(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (auto& c : out.cells) {
    const double n = static_cast<double>(c.accuracies.size());
    const double mean = std::accumulate(c.accuracies.begin(), c.accuracies.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : c.accuracies) ss += (a - mean) * (a - mean);
    c.mean = 100.0 * mean;
    c.std = 100.0 * std::sqrt(ss / n);
  }
  return out;
}

}  // namespace mls
