#pragma once

// Synthetic benchmarks: marginal features hidden among independent and
// correlated Gaussian noise, plus the noisy-augmentation transform.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mls/common.hpp"
#include "mls/data.hpp"

namespace mls {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream index); used for per-repetition generators.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

enum class Setup { I = 1, II = 2, III = 3 };

struct SynthSpec {
  Setup setup = Setup::I;
  double rho = 0.9;
  Index n_samples = 1000;
  std::uint64_t seed = 0;
  double marginal_shift = 5.0;
  double marginal_spread = 0.5;
  double corr = 0.9;

  void validate() const {
    require(rho > 0.0 && rho < 1.0, "rho must be in (0, 1)");
    require(n_samples >= 20, "n_samples must be >= 20");
    require(marginal_spread > 0.0, "marginal_spread must be positive");
    require(corr > -1.0 && corr < 1.0, "corr must be in (-1, 1)");
  }
};

struct SynthDataset {
  Dataset dataset;
  std::vector<Index> marginal_features;
};

inline constexpr const char* kNoisePrefix = "noise_";
inline constexpr Index kNoisyWidth = 309;
inline constexpr Index kNoisyCorrelated = 10;

/// n x d_block rows drawn i.i.d. from N(0, C), C with unit diagonal and off-diagonal corr.
inline Matrix gen_correlated_block(Index n, Index d_block, double corr, Rng& rng) {
  require(d_block >= 1, "block needs at least one column");
  Matrix cov = Matrix::Constant(d_block, d_block, corr);
  cov.diagonal().setOnes();
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success || (d_block > 1 && !(corr > -1.0 / static_cast<double>(d_block - 1))))
    throw ConfigError("equicorrelation matrix with corr " + format_real(corr) + " is not positive definite");
  const Matrix lower = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n, d_block);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d_block; ++j) z(i, j) = normal(rng);
  return z * lower.transpose();
}

/// Column layout: the noise block (5 independent for Setup I, 5 correlated otherwise),
/// Setup III's 90 extra independent columns, then the 5 marginal columns.
inline SynthDataset gen_setup(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = spec.n_samples;
  const auto n_pos = static_cast<Index>(std::llround(static_cast<double>(n) * (1.0 - spec.rho)));

  std::vector<int> labels(static_cast<size_t>(n), 0);
  std::fill(labels.begin(), labels.begin() + n_pos, 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  const Index n_extra = spec.setup == Setup::III ? 90 : 0;
  const Index d = 5 + n_extra + 5;
  Matrix x(n, d);
  std::vector<std::string> names;

  if (spec.setup == Setup::I) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < 5; ++j) x(i, j) = normal(rng);
  } else {
    x.leftCols(5) = gen_correlated_block(n, 5, spec.corr, rng);
  }
  for (Index j = 0; j < 5; ++j) names.push_back((spec.setup == Setup::I ? "noise" : "corr") + std::to_string(j));

  for (Index i = 0; i < n; ++i)
    for (Index j = 5; j < 5 + n_extra; ++j) x(i, j) = normal(rng);
  for (Index j = 0; j < n_extra; ++j) names.push_back("extra" + std::to_string(j));

  SynthDataset out;
  for (Index j = 0; j < 5; ++j) {
    const Index col = 5 + n_extra + j;
    for (Index i = 0; i < n; ++i) {
      const double z = normal(rng);
      x(i, col) = labels[static_cast<size_t>(i)] ? spec.marginal_shift + spec.marginal_spread * z : z;
    }
    names.push_back("marginal" + std::to_string(j));
    out.marginal_features.push_back(col);
  }
  out.dataset = Dataset(std::move(x), std::move(names), std::move(labels));
  return out;
}

/// Appends a 0.9-equicorrelated Gaussian block of (up to) 10 columns and then
/// independent N(0,1) columns until the dataset has 309 features.
inline Dataset add_noise_features(const Dataset& ds, Rng& rng) {
  const Index d = ds.n_features();
  if (d >= kNoisyWidth)
    throw ConfigError("dataset already has " + std::to_string(d) + " >= " + std::to_string(kNoisyWidth) +
                      " features");
  const Index n = ds.n_samples();
  const Index n_corr = std::min(kNoisyCorrelated, kNoisyWidth - d);
  const Index n_indep = kNoisyWidth - d - n_corr;

  Matrix x(n, kNoisyWidth);
  x.leftCols(d) = ds.values();
  x.middleCols(d, n_corr) = gen_correlated_block(n, n_corr, 0.9, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n_indep; ++j) x(i, d + n_corr + j) = normal(rng);

  auto names = ds.feature_names();
  for (Index j = 0; j < n_corr; ++j) names.push_back(std::string(kNoisePrefix) + "corr" + std::to_string(j));
  for (Index j = 0; j < n_indep; ++j) names.push_back(std::string(kNoisePrefix) + "indep" + std::to_string(j));
  return Dataset(std::move(x), std::move(names), ds.labels());
}

/// Indices of columns not introduced by add_noise_features.
inline std::vector<Index> original_features(const Dataset& ds) {
  std::vector<Index> out;
  for (Index r = 0; r < ds.n_features(); ++r)
    if (ds.feature_names()[static_cast<size_t>(r)].rfind(kNoisePrefix, 0) != 0) out.push_back(r);
  return out;
}

}  // namespace mls
