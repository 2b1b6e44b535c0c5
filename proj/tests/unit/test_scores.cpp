#include <gtest/gtest.h>

#include "mls/scores.hpp"
#include "mls/synth.hpp"
#include "oracles.hpp"

using namespace mls;

namespace {

ScoreReport report_of(std::initializer_list<double> s, Method m = Method::MLS) {
  ScoreReport r;
  r.method = m;
  r.scores.resize(static_cast<Index>(s.size()));
  Index i = 0;
  for (double v : s) {
    r.scores[i] = v;
    r.feature_names.push_back("f" + std::to_string(i));
    ++i;
  }
  return r;
}

}  // namespace

TEST(NaiveMls, TwoSampleHandValue) {
  Vector f(2);
  f << 0, 1;
  Matrix w(2, 2);
  w << 1, std::exp(-1.0), std::exp(-1.0), 1;
  Vector u(2);
  u << std::log(2.0), 0;
  EXPECT_NEAR(mls_naive(f, w, u), 0.5099891948679071, 1e-15);
  EXPECT_NEAR(mls_numerators(f, w, u)[0] / variance(f), 0.5099891948679071, 1e-15);
}

TEST(Mls, MatrixFormMatchesNaive) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset ds = standardize(Dataset::from_matrix(oracle::random_matrix(40, 6, rng))).first;
    const auto model = build_margin_model(ds, MarginConfig{});
    const auto iw = interaction_weights(model);
    const auto rep = mls::mls(ds, model, &iw);
    for (Index r = 0; r < 6; ++r) {
      const double naive = mls_naive(ds.values().col(r), iw.w, model.u);
      EXPECT_LE(std::abs(rep.scores[r] - naive), 1e-9 * std::max(1.0, std::abs(naive)));
    }
  }
}

TEST(Mls, ConstantFeatureGetsWorstScore) {
  std::mt19937_64 rng(2);
  Matrix x = oracle::random_matrix(30, 3, rng);
  x.col(1).setConstant(4.0);
  const Dataset ds = Dataset::from_matrix(x);
  const auto rep = mls::mls(ds, build_margin_model(ds, MarginConfig{}));
  EXPECT_EQ(rep.scores[1], kWorstScore);
  EXPECT_TRUE(rep.constant_feature[1]);
  EXPECT_TRUE(std::isfinite(rep.scores[0]));
  EXPECT_THROW(mls::mls(Dataset::from_matrix(Matrix::Ones(5, 2)), build_margin_model(Dataset::from_matrix(Matrix::Ones(5, 2)), {})),
               DataError);
}

TEST(Mls, MarginalFeaturesRankFirstOnSetupI) {
  SynthSpec spec;
  spec.seed = 4;
  const auto data = gen_setup(spec);
  const Dataset ds = standardize(data.dataset).first;
  const auto rep = mls::mls(ds, build_margin_model(ds, MarginConfig{}));
  double worst_marginal = -kWorstScore, best_noise = kWorstScore;
  for (Index r = 0; r < ds.n_features(); ++r) {
    const bool marginal = std::find(data.marginal_features.begin(), data.marginal_features.end(), r) !=
                          data.marginal_features.end();
    if (marginal) worst_marginal = std::max(worst_marginal, rep.scores[r]);
    else best_noise = std::min(best_noise, rep.scores[r]);
  }
  EXPECT_LT(worst_marginal, best_noise);
}

TEST(Mls, IdenticalMarginValuesContributeNothing) {
  // feature constant on the margin rows and their partners: every (i, j) term with u_i > 0 vanishes
  Matrix w = Matrix::Ones(4, 4);
  Vector u(4);
  u << 1, 0, 0, 0;
  Vector f(4);
  f << 2, 2, 2, 5;
  w(0, 3) = w(3, 0) = 0.0;
  EXPECT_EQ(mls_numerators(f, w, u)[0], 0.0);
}

TEST(LaplacianScore, MatchesDenseOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = oracle::zscore(oracle::random_matrix(25, 4, rng));
    const auto rep = laplacian_score(Dataset::from_matrix(x));
    const auto ref = oracle::laplacian_score(x);
    for (Index r = 0; r < 4; ++r) EXPECT_LE(oracle::rel_err(rep.scores[r], ref[static_cast<size_t>(r)]), 1e-10);
  }
}

TEST(LaplacianScore, SmoothFeatureBeatsNoise) {
  // two clusters visible in f0; f1 is noise
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Matrix x(60, 2);
  for (Index i = 0; i < 60; ++i) {
    x(i, 0) = (i < 30 ? -3.0 : 3.0) + 0.1 * nd(rng);
    x(i, 1) = nd(rng);
  }
  const auto rep = laplacian_score(standardize(Dataset::from_matrix(x)).first);
  EXPECT_LT(rep.scores[0], rep.scores[1]);
}

TEST(LaplacianScore, KernelModes) {
  std::mt19937_64 rng(6);
  const Dataset ds = Dataset::from_matrix(oracle::random_matrix(20, 3, rng));
  KernelConfig knn;
  knn.mode = KernelMode::BinaryKnn;
  knn.neighbors = 3;
  const auto s = ls_affinity(ds.values(), knn);
  EXPECT_TRUE(s.isApprox(s.transpose()));
  EXPECT_EQ(s.diagonal().sum(), 0.0);
  for (Index i = 0; i < 20; ++i) EXPECT_GE(s.row(i).sum(), 3.0);
  EXPECT_TRUE(laplacian_score(ds, knn).scores.allFinite());
  KernelConfig printed;
  printed.mode = KernelMode::Printed;
  EXPECT_TRUE(laplacian_score(ds, printed).scores.allFinite());
  knn.neighbors = 20;
  EXPECT_THROW(ls_affinity(ds.values(), knn), ConfigError);
}

TEST(SelectTop, OrderingTiesAndRange) {
  EXPECT_EQ(select_top(report_of({3, 1, 2}), 2).indices, (std::vector<Index>{1, 2}));
  EXPECT_EQ(select_top(report_of({1, 1, 5}), 1).indices, (std::vector<Index>{0}));
  EXPECT_EQ(select_top(report_of({0.1, 0.7, 0.3}, Method::DUFS), 2).indices, (std::vector<Index>{1, 2}));
  EXPECT_THROW(select_top(report_of({1, 2}), 0), ConfigError);
  EXPECT_THROW(select_top(report_of({1, 2}), 3), ConfigError);
  const auto degenerate = select_top(report_of({kWorstScore, kWorstScore}), 1);
  EXPECT_EQ(degenerate.indices, (std::vector<Index>{0}));
  EXPECT_TRUE(degenerate.degenerate);
  EXPECT_FALSE(select_top(report_of({kWorstScore, 1.0}), 1).degenerate);
}

TEST(Ranks, InverseOfSelection) {
  EXPECT_EQ(ranks(report_of({3, 1, 2})), (std::vector<Index>{3, 1, 2}));
}
