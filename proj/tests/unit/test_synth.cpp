#include <gtest/gtest.h>

#include "mls/margins.hpp"
#include "mls/synth.hpp"

using namespace mls;

namespace {

int positives(const Dataset& ds) { return static_cast<int>(std::count(ds.labels()->begin(), ds.labels()->end(), 1)); }

}  // namespace

TEST(GenSetup, ShapesAndClassCounts) {
  SynthSpec spec;
  spec.setup = Setup::III;
  spec.rho = 0.97;
  spec.seed = 1;
  const auto d = gen_setup(spec);
  EXPECT_EQ(d.dataset.n_samples(), 1000);
  EXPECT_EQ(d.dataset.n_features(), 100);
  EXPECT_EQ(positives(d.dataset), 30);
  EXPECT_EQ(d.marginal_features, (std::vector<Index>{95, 96, 97, 98, 99}));

  spec.setup = Setup::I;
  spec.rho = 0.9;
  const auto one = gen_setup(spec);
  EXPECT_EQ(one.dataset.n_features(), 10);
  EXPECT_EQ(positives(one.dataset), 100);
}

TEST(GenSetup, SameSeedSameBits) {
  SynthSpec spec;
  spec.setup = Setup::II;
  spec.seed = 42;
  const auto a = gen_setup(spec);
  const auto b = gen_setup(spec);
  EXPECT_TRUE((a.dataset.values().array() == b.dataset.values().array()).all());
  EXPECT_EQ(*a.dataset.labels(), *b.dataset.labels());
  spec.seed = 43;
  EXPECT_FALSE((gen_setup(spec).dataset.values().array() == a.dataset.values().array()).all());
}

TEST(GenSetup, RejectsBadSpec) {
  SynthSpec spec;
  spec.rho = 1.5;
  EXPECT_THROW(gen_setup(spec), ConfigError);
  spec.rho = 0.9;
  spec.n_samples = 5;
  EXPECT_THROW(gen_setup(spec), ConfigError);
}

TEST(GenSetup, CorrelatedBlockHasTargetCorrelation) {
  SynthSpec spec;
  spec.setup = Setup::II;
  spec.n_samples = 20000;
  spec.seed = 3;
  const Matrix x = gen_setup(spec).dataset.values().leftCols(5);
  const Matrix c = x.rowwise() - x.colwise().mean();
  const Matrix cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      const double r = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
      EXPECT_NEAR(r, i == j ? 1.0 : 0.9, 0.01);
    }
}

TEST(GenSetup, PositivesSitBeyondNegativeUpperQuantile) {
  SynthSpec spec;
  spec.seed = 5;
  const auto d = gen_setup(spec);
  const auto& y = *d.dataset.labels();
  for (Index col : d.marginal_features) {
    std::vector<double> neg;
    for (Index i = 0; i < d.dataset.n_samples(); ++i)
      if (!y[static_cast<size_t>(i)]) neg.push_back(d.dataset.values()(i, col));
    const double q95 = empirical_quantile(Vector::Map(neg.data(), static_cast<Index>(neg.size())), 0.95);
    int above = 0, pos = 0;
    for (Index i = 0; i < d.dataset.n_samples(); ++i)
      if (y[static_cast<size_t>(i)]) {
        ++pos;
        above += d.dataset.values()(i, col) > q95;
      }
    EXPECT_GE(static_cast<double>(above) / pos, 0.8);
  }
}

TEST(AddNoise, WidthBoundaryAndLabels) {
  Rng rng = make_rng(1);
  SynthSpec spec;
  spec.n_samples = 50;
  const auto base = gen_setup(spec).dataset;
  Matrix x8 = base.values().leftCols(8);
  std::vector<std::string> n8(base.feature_names().begin(), base.feature_names().begin() + 8);
  const Dataset d8(x8, n8, base.labels());
  const Dataset out = add_noise_features(d8, rng);
  EXPECT_EQ(out.n_features(), 309);
  EXPECT_EQ(*out.labels(), *d8.labels());
  EXPECT_EQ(original_features(out).size(), 8u);
  int corr = 0;
  for (const auto& n : out.feature_names()) corr += n.rfind("noise_corr", 0) == 0;
  EXPECT_EQ(corr, 10);
  EXPECT_TRUE((out.values().leftCols(8).array() == x8.array()).all());

  const Dataset d299 = Dataset::from_matrix(Matrix::Zero(50, 299));
  const Dataset o299 = add_noise_features(d299, rng);
  EXPECT_EQ(o299.n_features(), 309);
  EXPECT_EQ(o299.feature_names().back(), "noise_corr9");

  EXPECT_THROW(add_noise_features(o299, rng), ConfigError);
}

TEST(CorrelatedBlock, RejectsNonPositiveDefinite) {
  Rng rng = make_rng(0);
  EXPECT_THROW(gen_correlated_block(10, 5, -0.5, rng), ConfigError);
}
