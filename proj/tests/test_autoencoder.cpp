#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "manifold_ad/autoencoder.hpp"
#include "manifold_ad/datagen.hpp"

using namespace manifold_ad;

namespace {

Dataset five_samples(std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.x.resize(5, 2);
  d.t.resize(5, 1);
  d.level_counts = {3};
  d.y.resize(5);
  for (int i = 0; i < 5; ++i) {
    d.x(i, 0) = rng.uniform(-2.0, 2.0);
    d.x(i, 1) = rng.uniform(0.0, 5.0);
    d.t(i, 0) = i % 3;
    d.y(i) = d.x(i, 0) * d.x(i, 1) + rng.normal();
  }
  return d;
}

MlpSpec small_spec(const Dataset& d, Activation a, std::uint64_t seed) {
  MlpSpec s;
  s.layer_widths = {autoencoder_input_width(d), 6, 3, 1};
  s.activation = a;
  s.seed = seed;
  return s;
}

double spread(const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); }

// Reconstruction of y for every sample.
Eigen::VectorXd response_reconstruction(const AeModel& m, const Dataset& d) {
  const Eigen::MatrixXd in = autoencoder_inputs(d);
  return forward(m.net, in).reconstruction().row(in.rows() - 1).transpose();
}

}  // namespace

TEST(Autoencoder, InputWidthAndDefaultSpec) {
  const auto d = five_samples(1);
  EXPECT_EQ(autoencoder_input_width(d), 2 + 3 + 1);
  EXPECT_EQ(default_mlp_spec(d).layer_widths, (std::vector<int>{6, 32, 8, 1}));
}

TEST(Autoencoder, MirroredArchitecture) {
  const auto d = five_samples(1);
  Rng rng(2);
  const auto net = make_autoencoder(default_mlp_spec(d), rng);
  ASSERT_EQ(net.layers.size(), 6u);
  EXPECT_EQ(net.encoder_depth, 3u);
  const int expected[6][2] = {{32, 6}, {8, 32}, {1, 8}, {8, 1}, {32, 8}, {6, 32}};
  for (int k = 0; k < 6; ++k) {
    EXPECT_EQ(net.layers[k].W.rows(), expected[k][0]);
    EXPECT_EQ(net.layers[k].W.cols(), expected[k][1]);
  }
  // Linear bottleneck and linear output.
  EXPECT_FALSE(net.layers[2].activated);
  EXPECT_FALSE(net.layers[5].activated);
  EXPECT_TRUE(net.layers[0].activated);
}

TEST(Autoencoder, RejectsInconsistentSpec) {
  const auto d = five_samples(1);
  auto s = default_mlp_spec(d);
  s.layer_widths.back() = 2;
  EXPECT_THROW(train(d, s), InputError);
  s = default_mlp_spec(d);
  s.layer_widths.front() = 4;
  EXPECT_THROW(train(d, s), InputError);
  s = default_mlp_spec(d);
  s.batch_size = 0;
  EXPECT_THROW(train(d, s), InputError);
}

TEST(Autoencoder, ZeroEpochsLeavesEmptyTrace) {
  const auto d = five_samples(3);
  auto s = small_spec(d, Activation::tanh, 4);
  s.epochs = 0;
  const auto m = train(d, s);
  EXPECT_TRUE(m.training_loss_trace.empty());
  EXPECT_TRUE(m.untrained);
  EXPECT_EQ(m.h1.size(), 5);
  EXPECT_EQ(m.h2.size(), 5);
  EXPECT_TRUE(secondary_manifold(m).untrained);
}

TEST(Autoencoder, IdenticalRowsAreLearned) {
  Dataset d;
  d.x = Eigen::MatrixXd::Constant(12, 3, 2.5);
  d.y = Eigen::VectorXd::Constant(12, -7.0);
  auto s = default_mlp_spec(d);
  s.seed = 5;
  s.epochs = 0;
  const auto before = train(d, s);
  s.epochs = 300;
  const auto after = train(d, s);
  ASSERT_FALSE(after.training_loss_trace.empty());
  EXPECT_LT(after.training_loss_trace.back(), after.initial_loss);
  // All inputs coincide, so h2 has no spread before or after training.
  EXPECT_LE(spread(after.h2), 0.1 * spread(before.h2));
}

TEST(Autoencoder, BackpropMatchesFiniteDifferences) {
  const auto d = five_samples(6);
  const Eigen::MatrixXd batch = autoencoder_inputs(d);
  for (Activation a : {Activation::tanh, Activation::relu}) {
    for (int draw = 0; draw < 20; ++draw) {
      Rng rng(100 + draw);
      auto net = make_autoencoder(small_spec(d, a, 0), rng);
      std::vector<DenseLayer> grads;
      loss_and_gradient(net, batch, grads);
      std::vector<double> analytic, numeric;
      constexpr double h = 1e-6;
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto probe = [&](double& w) {
          const double w0 = w;
          w = w0 + h;
          const double fp = reconstruction_loss(net, batch);
          w = w0 - h;
          const double fm = reconstruction_loss(net, batch);
          w = w0;
          numeric.push_back((fp - fm) / (2 * h));
        };
        for (Eigen::Index i = 0; i < net.layers[k].W.size(); ++i) {
          probe(net.layers[k].W.data()[i]);
          analytic.push_back(grads[k].W.data()[i]);
        }
        for (Eigen::Index i = 0; i < net.layers[k].b.size(); ++i) {
          probe(net.layers[k].b(i));
          analytic.push_back(grads[k].b(i));
        }
      }
      const Eigen::Map<Eigen::VectorXd> ga(analytic.data(), static_cast<Eigen::Index>(analytic.size()));
      const Eigen::Map<Eigen::VectorXd> gn(numeric.data(), static_cast<Eigen::Index>(numeric.size()));
      EXPECT_LT((ga - gn).norm() / gn.norm(), 1e-4) << (a == Activation::tanh ? "tanh" : "relu") << " draw " << draw;
    }
  }
}

TEST(Autoencoder, LossTraceIsMonotone) {
  const auto d = gen_wing({100, 0, 0}, 5.0, 7);
  auto s = default_mlp_spec(d);
  s.seed = 8;
  s.epochs = 150;
  s.step_size = 0.05;  // large enough to force some rejected epochs
  const auto m = train(d, s);
  ASSERT_EQ(m.training_loss_trace.size(), 150u);
  EXPECT_LE(m.training_loss_trace.front(), m.initial_loss);
  for (std::size_t e = 1; e < m.training_loss_trace.size(); ++e)
    EXPECT_LE(m.training_loss_trace[e], m.training_loss_trace[e - 1]);
  EXPECT_GT(m.step_halvings, 0);
  EXPECT_LT(m.final_step_size, s.step_size);
  EXPECT_TRUE((m.h2.array() >= 0.0).all());
}

TEST(Autoencoder, DeterministicGivenSeed) {
  const auto d = gen_wing({60, 0, 0}, 5.0, 9);
  auto s = default_mlp_spec(d);
  s.seed = 10;
  s.epochs = 20;
  const auto a = train(d, s), b = train(d, s);
  EXPECT_EQ(a.h1, b.h1);
  EXPECT_EQ(a.h2, b.h2);
  EXPECT_EQ(a.training_loss_trace, b.training_loss_trace);
}

TEST(Autoencoder, FullBatchIgnoresSampleOrder) {
  const auto d = gen_wing({40, 0, 0}, 5.0, 11);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[17]);
  Dataset p = d;
  for (int i = 0; i < 40; ++i) {
    p.x.row(i) = d.x.row(perm[i]);
    p.y(i) = d.y(perm[i]);
  }
  auto s = default_mlp_spec(d);
  s.seed = 12;
  s.epochs = 50;
  s.batch_size = 40;
  const auto a = train(d, s), b = train(p, s);
  const Eigen::VectorXd ya = response_reconstruction(a, d), yb = response_reconstruction(b, p);
  for (int i = 0; i < 40; ++i) EXPECT_NEAR(yb(i), ya(perm[i]), 1e-9);
}

TEST(SecondaryManifold, NormalizedAxes) {
  const auto d = gen_wing({80, 0, 0}, 5.0, 13);
  auto s = default_mlp_spec(d);
  s.seed = 14;
  s.epochs = 30;
  const auto m = train(d, s);
  const auto man = secondary_manifold(m);
  EXPECT_EQ(man.learner, Learner::autoencoder);
  EXPECT_GE(man.points.minCoeff(), 0.0);
  EXPECT_LE(man.points.maxCoeff(), 1.0);
  Eigen::Index worst = 0;
  m.h2.maxCoeff(&worst);
  EXPECT_EQ(man.points(worst, 1), 1.0);
}

TEST(SecondaryManifold, MatchesHandNormalization) {
  AeModel m;
  m.h1.resize(5);
  m.h2.resize(5);
  m.h1 << -0.5, 0.25, 1.5, 0.0, -1.0;
  m.h2 << 0.2, 0.05, 0.8, 0.45, 0.1;
  const auto man = secondary_manifold(m);
  const double h1[5] = {0.2, 0.5, 1.0, 0.4, 0.0};
  const double h2[5] = {0.2, 0.0, 1.0, 0.533333333333333333, 0.0666666666666666667};
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(man.points(i, 0), h1[i], 1e-15);
    EXPECT_NEAR(man.points(i, 1), h2[i], 1e-15);
  }
  EXPECT_FALSE(man.degenerate_axis);
}

TEST(SecondaryManifold, ConstantAxisIsFlagged) {
  AeModel m;
  m.h1 = Eigen::VectorXd::LinSpaced(4, 0.0, 3.0);
  m.h2 = Eigen::VectorXd::Constant(4, 0.3);
  const auto man = secondary_manifold(m);
  EXPECT_TRUE(man.degenerate_axis);
  EXPECT_EQ(man.points.col(1), Eigen::VectorXd::Zero(4));
}

TEST(OneHot, EachVariableSumsToOne) {
  Eigen::MatrixXi t(6, 2);
  t << 0, 1, 1, 0, 2, 3, 0, 2, 1, 1, 2, 0;
  const std::vector<int> levels = {3, 4};
  const Eigen::MatrixXd oh = grouped_one_hot(t, levels);
  ASSERT_EQ(oh.cols(), 7);
  for (Eigen::Index i = 0; i < 6; ++i) {
    EXPECT_EQ(oh.row(i).head(3).sum(), 1.0);
    EXPECT_EQ(oh.row(i).tail(4).sum(), 1.0);
    EXPECT_EQ(oh(i, t(i, 0)), 1.0);
    EXPECT_EQ(oh(i, 3 + t(i, 1)), 1.0);
  }
}
