#include <gtest/gtest.h>

#include "mls/gates.hpp"
#include "oracles.hpp"

using namespace mls;

namespace {

struct Instance {
  Dataset ds;
  MarginModel model;
};

Instance make_instance(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset ds = standardize(Dataset::from_matrix(oracle::random_matrix(n, d, rng))).first;
  MarginModel model = build_margin_model(ds, MarginConfig{});
  return {std::move(ds), std::move(model)};
}

Vector random_mu(Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Vector mu(d);
  for (Index r = 0; r < d; ++r) mu[r] = u(rng);
  return mu;
}

/// Central differences of the loss in mu with eps and bandwidth held fixed.
template <class LossFn>
Vector fd_gradient(const GateState& st, const Vector& eps, LossFn loss, double h = 1e-4) {
  Vector g(st.mu.size());
  for (Index r = 0; r < st.mu.size(); ++r) {
    GateState up = st, dn = st;
    up.mu[r] += h;
    dn.mu[r] -= h;
    g[r] = (loss(up, gates_from_noise(up.mu, eps)) - loss(dn, gates_from_noise(dn.mu, eps))) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(OpenProb, ValuesAndMonotonicity) {
  GateState st = GateState::zeros(3);
  st.mu << 0.0, -0.5, 1.0;
  const Vector p = open_prob(st);
  EXPECT_NEAR(p[0], 0.8413447460685429, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
  EXPECT_GT(p[2], p[0]);
}

TEST(Gates, ClampedSample) {
  Vector mu(3), eps(3);
  mu << 0.0, 2.0, -2.0;
  eps << 0.1, 0.0, 0.0;
  const Vector z = gates_from_noise(mu, eps);
  EXPECT_DOUBLE_EQ(z[0], 0.6);
  EXPECT_EQ(z[1], 1.0);
  EXPECT_EQ(z[2], 0.0);
}

TEST(DufsMlsLoss, AllGatesOpenSumsBatchScores) {
  const auto inst = make_instance(30, 6, 1);
  const auto st = GateState::zeros(6);
  const double den = detail::gate_denominator(st);
  const double loss = dufs_mls_loss(inst.ds, Vector::Ones(6), st, inst.model);
  const double sum = mls::mls(inst.ds, inst.model).scores.sum();
  EXPECT_LE(std::abs(-loss * den - sum), 1e-9 * std::max(1.0, sum));
}

TEST(DufsMlsLoss, ClosedGatesGiveZero) {
  const auto inst = make_instance(30, 6, 2);
  EXPECT_EQ(dufs_mls_loss(inst.ds, Vector::Zero(6), GateState::zeros(6), inst.model), 0.0);
}

TEST(DufsMlsLoss, MatchesNaiveGatedOracle) {
  const auto inst = make_instance(30, 6, 3);
  const auto iw = interaction_weights(inst.model);
  Vector z(6);
  z << 1.0, 0.3, 0.0, 0.75, 0.5, 0.9;
  GateState st = GateState::zeros(6);
  st.mu << 0.1, -0.2, 0.3, 0.0, -0.1, 0.2;
  const std::vector<double> u(inst.model.u.data(), inst.model.u.data() + 30);
  double total = 0.0;
  for (Index r = 0; r < 6; ++r) {
    const auto col = inst.ds.values().col(r);
    total += oracle::gated_mls(std::vector<double>(col.data(), col.data() + 30), z[r], iw.w, u);
  }
  double den = 0.0;
  for (Index r = 0; r < 6; ++r) den += 0.5 * std::erfc(-(st.mu[r] + 0.5) / 0.5 / std::sqrt(2.0));
  den = 6 * den + 1e-4;
  EXPECT_LE(oracle::rel_err(dufs_mls_loss(inst.ds, z, st, inst.model), -total / den), 1e-9);
}

TEST(DufsLoss, MatchesDenseOracle) {
  const auto inst = make_instance(15, 1, 4);
  const auto st = GateState::zeros(1);
  for (double zv : {1.0, 0.5}) {
    const Vector z = Vector::Constant(1, zv);
    const double den = detail::gate_denominator(st);
    const double got = dufs_loss(inst.ds, z, st);
    EXPECT_TRUE(std::isfinite(got));
    EXPECT_LE(oracle::rel_err(got, -oracle::dufs_trace(inst.ds.values(), {zv}) / den), 1e-10);
  }
  const auto wide = make_instance(20, 5, 5);
  const std::vector<double> zs{1.0, 0.2, 0.6, 0.0, 0.9};
  const Vector z = Vector::Map(zs.data(), 5);
  const auto st5 = GateState::zeros(5);
  EXPECT_LE(oracle::rel_err(dufs_loss(wide.ds, z, st5),
                            -oracle::dufs_trace(wide.ds.values(), zs) / detail::gate_denominator(st5)),
            1e-10);
}

TEST(DufsLoss, SignFlipNegates) {
  const auto inst = make_instance(20, 3, 6);
  GateState st = GateState::zeros(3);
  const double a = dufs_loss(inst.ds, Vector::Ones(3), st);
  st.sign_flip = true;
  EXPECT_DOUBLE_EQ(dufs_loss(inst.ds, Vector::Ones(3), st), -a);
}

TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = make_instance(20, 5, 100 + trial);
    GateState st = GateState::zeros(5);
    st.mu = random_mu(5, rng);
    st.sign_flip = trial % 2;
    const Vector eps = sample_noise(st, rng) * 0.2;  // keep gates away from the clamp
    const auto iw = interaction_weights(inst.model);

    const auto lg = dufs_loss_grad(inst.ds, eps, st);
    const Vector fd = fd_gradient(st, eps, [&](const GateState& s, const Vector& z) {
      return dufs_loss(inst.ds, z, s, lg.bandwidth);
    });
    const auto lm = dufs_mls_loss_grad(inst.ds, eps, st, inst.model, &iw);
    const Vector fdm = fd_gradient(st, eps, [&](const GateState& s, const Vector& z) {
      return dufs_mls_loss(inst.ds, z, s, inst.model, &iw);
    });
    for (Index r = 0; r < 5; ++r) {
      EXPECT_LE(std::abs(lg.gradient[r] - fd[r]) / std::max(1e-8, std::abs(fd[r])), 1e-4) << trial << " " << r;
      EXPECT_LE(std::abs(lm.gradient[r] - fdm[r]) / std::max(1e-8, std::abs(fdm[r])), 1e-4) << trial << " " << r;
    }
  }
}

TEST(Gradients, SaturatedGatesKeepOnlyDenominatorTerm) {
  const auto inst = make_instance(20, 3, 12);
  GateState st = GateState::zeros(3);
  st.mu << 3.0, -3.0, 3.0;
  const Vector eps = Vector::Zero(3);
  const auto lm = dufs_mls_loss_grad(inst.ds, eps, st, inst.model);
  const double den = detail::gate_denominator(st);
  const Vector dden = detail::gate_denominator_grad(st);
  for (Index r = 0; r < 3; ++r) EXPECT_NEAR(lm.gradient[r], -lm.loss * dden[r] / den, 1e-12);
}

TEST(Gradients, DuplicatedColumnsGetEqualCoordinates) {
  std::mt19937_64 rng(13);
  Matrix x = oracle::random_matrix(20, 3, rng);
  x.col(2) = x.col(0);
  const Dataset ds = standardize(Dataset::from_matrix(x).with_values(x)).first;
  const auto model = build_margin_model(ds, MarginConfig{});
  GateState st = GateState::zeros(3);
  st.mu << 0.1, -0.2, 0.1;
  Vector eps(3);
  eps << 0.05, 0.0, 0.05;
  const auto g = dufs_loss_grad(ds, eps, st).gradient;
  EXPECT_NEAR(g[0], g[2], 1e-12 * std::max(1.0, std::abs(g[0])));
  const auto gm = dufs_mls_loss_grad(ds, eps, st, model).gradient;
  EXPECT_NEAR(gm[0], gm[2], 1e-12 * std::max(1.0, std::abs(gm[0])));
}

TEST(Train, DeterministicAndFinite) {
  const auto inst = make_instance(60, 6, 14);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 3;
  const auto a = train(inst.ds, cfg, GateState::zeros(6), &inst.model);
  const auto b = train(inst.ds, cfg, GateState::zeros(6), &inst.model);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_TRUE((a.mu.array() == b.mu.array()).all());
  EXPECT_TRUE(a.mu.allFinite());
  EXPECT_EQ(a.loss_history.size(), 40u);
  cfg.loss_variant = LossVariant::Dufs;
  cfg.optimizer = Optimizer::GradientDescent;
  const auto c = train(inst.ds, cfg, GateState::zeros(6));
  EXPECT_TRUE(c.mu.allFinite());
  EXPECT_THROW(train(inst.ds, TrainConfig{}, GateState::zeros(6)), ConfigError);  // dufs-mls without a model
}

TEST(Train, DufsRecoversMarginalFeaturesOnSetupI) {
  // minimizing +trace / open gates: marginal columns are the smooth ones
  SynthSpec spec;
  spec.seed = 7;
  spec.n_samples = 400;
  const auto data = gen_setup(spec);
  const Dataset ds = standardize(data.dataset).first;
  TrainConfig cfg;
  cfg.loss_variant = LossVariant::Dufs;
  cfg.seed = 7;
  cfg.epochs = 300;
  GateState st = GateState::zeros(ds.n_features());
  st.sign_flip = true;
  const auto trace = train(ds, cfg, st);
  auto sel = select_top(gate_report(ds, trace, LossVariant::Dufs), 5).indices;
  std::sort(sel.begin(), sel.end());
  EXPECT_EQ(sel, data.marginal_features);
}

TEST(Train, NoMarginSignalIsFlagged) {
  Matrix x = Matrix::Zero(10, 2);
  x.col(0) << 0, 1, 0, 1, 0, 1, 0, 1, 0, 1;
  x.col(1) << 1, 0, 1, 0, 1, 0, 1, 0, 1, 0;
  const Dataset ds = Dataset::from_matrix(x);
  const auto model = build_margin_model(ds, MarginConfig{});
  ASSERT_EQ(model.n_marginal(), 0);
  TrainConfig cfg;
  cfg.epochs = 5;
  EXPECT_TRUE(train(ds, cfg, GateState::zeros(2), &model).no_margin_signal);
}
