#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "manifold_ad/detect.hpp"
#include "manifold_ad/rng.hpp"

using namespace manifold_ad;

namespace {

Manifold make_manifold(const Eigen::MatrixX2d& pts, Learner learner = Learner::lmgp) {
  Manifold m;
  m.points = pts;
  m.learner = learner;
  m.sample_ids.resize(static_cast<std::size_t>(pts.rows()));
  std::iota(m.sample_ids.begin(), m.sample_ids.end(), 0);
  return m;
}

// Points on the positive x axis at the given distances from the origin.
Manifold on_axis(const std::vector<double>& dist) {
  Eigen::MatrixX2d pts = Eigen::MatrixX2d::Zero(static_cast<Eigen::Index>(dist.size()), 2);
  for (std::size_t i = 0; i < dist.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = dist[i];
  return make_manifold(pts);
}

// Every threshold split of the sorted distances, SSE computed directly; the
// smaller side is anomalous, and on equal sizes the farther side is.
std::vector<Label> threshold_oracle(const Eigen::VectorXd& d) {
  const auto n = static_cast<std::size_t>(d.size());
  std::vector<double> s(d.data(), d.data() + n);
  std::sort(s.begin(), s.end());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < n; ++k) {
    double m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < k; ++i) m0 += s[i];
    for (std::size_t i = k; i < n; ++i) m1 += s[i];
    m0 /= static_cast<double>(k);
    m1 /= static_cast<double>(n - k);
    double sse = 0;
    for (std::size_t i = 0; i < k; ++i) sse += (s[i] - m0) * (s[i] - m0);
    for (std::size_t i = k; i < n; ++i) sse += (s[i] - m1) * (s[i] - m1);
    if (sse < best) {
      best = sse;
      best_k = k;
    }
  }
  const double threshold = s[best_k];
  const bool upper_anomalous = (n - best_k) <= best_k;
  std::vector<Label> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool upper = d(static_cast<Eigen::Index>(i)) >= threshold;
    out[i] = upper == upper_anomalous ? Label::anomalous : Label::normal;
  }
  return out;
}

Eigen::MatrixX2d random_manifold(Rng& rng, int n) {
  Eigen::MatrixX2d pts(n, 2);
  const int n_out = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n / 3)));
  for (int i = 0; i < n; ++i) {
    const double sd = i < n_out ? rng.uniform(0.5, 3.0) : rng.uniform(0.05, 0.5);
    pts(i, 0) = rng.normal(0.0, sd);
    pts(i, 1) = rng.normal(0.0, sd);
  }
  return pts;
}

}  // namespace

TEST(Score, PerfectPrediction) {
  const std::vector<Label> t = {Label::normal, Label::anomalous, Label::normal, Label::anomalous};
  const auto s = score(t, t);
  EXPECT_EQ(s.metrics.f1, 1.0);
  EXPECT_EQ(s.metrics.precision, 1.0);
  EXPECT_EQ(s.metrics.gmean, 1.0);
}

TEST(Score, PinnedConfusion) {
  std::vector<Label> truth(500, Label::normal), pred(500, Label::normal);
  for (int i = 0; i < 25; ++i) truth[i] = pred[i] = Label::anomalous;  // TP = 25
  for (int i = 25; i < 50; ++i) pred[i] = Label::anomalous;          // FP = 25
  const auto s = score(pred, truth);
  EXPECT_EQ(s.confusion.tp, 25);
  EXPECT_EQ(s.confusion.fp, 25);
  EXPECT_EQ(s.confusion.fn, 0);
  EXPECT_EQ(s.confusion.tn, 450);
  EXPECT_NEAR(s.metrics.f1, 25.0 / 37.5, 1e-15);
  EXPECT_EQ(s.metrics.precision, 0.5);
  // Evaluated with 50-digit arithmetic: sqrt(450/475).
  EXPECT_NEAR(s.metrics.gmean, 0.9733285267845752289868725, 1e-15);
}

TEST(Score, NothingFlagged) {
  std::vector<Label> truth(500, Label::normal), pred(500, Label::normal);
  for (int i = 0; i < 50; ++i) truth[i] = Label::anomalous;
  const auto s = score(pred, truth);
  EXPECT_EQ(s.confusion.tp, 0);
  EXPECT_EQ(s.metrics.f1, 0.0);
  EXPECT_TRUE(s.metrics.precision_undefined);
  EXPECT_EQ(s.metrics.precision, 0.0);
  EXPECT_FALSE(s.metrics.f1_undefined);
}

TEST(Score, MatchesCountingLoop) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(4 + rng.below(100));
    std::vector<Label> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform() < 0.3 ? Label::anomalous : Label::normal;
      t[i] = rng.uniform() < 0.2 ? Label::anomalous : Label::normal;
    }
    int tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] == Label::anomalous) (t[i] == Label::anomalous ? tp : fp)++;
      else (t[i] == Label::anomalous ? fn : tn)++;
    }
    const auto s = score(p, t);
    ASSERT_EQ(s.confusion.tp, tp);
    ASSERT_EQ(s.confusion.fp, fp);
    ASSERT_EQ(s.confusion.tn, tn);
    ASSERT_EQ(s.confusion.fn, fn);
    ASSERT_EQ(tp + fp + tn + fn, static_cast<int>(n));
    if (tp + fp > 0) {
      ASSERT_DOUBLE_EQ(s.metrics.precision, static_cast<double>(tp) / (tp + fp));
    }
    if (tp + fn > 0 && tn + fp > 0) {
      ASSERT_DOUBLE_EQ(s.metrics.gmean, std::sqrt(static_cast<double>(tp) / (tp + fn) * tn / (tn + fp)));
    }
  }
}

TEST(Score, LengthMismatchThrows) {
  EXPECT_THROW(score({Label::normal}, {Label::normal, Label::anomalous}), InputError);
}

TEST(KMeans, SeparatedOutlier) {
  const auto rep = kmeans2_on_distance(on_axis({0.1, 0.1, 0.1, 0.1, 0.1, 5.0}));
  EXPECT_EQ(rep.cluster_sizes, (std::array<int, 2>{5, 1}));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(rep.predicted[i], Label::normal);
  EXPECT_EQ(rep.predicted[5], Label::anomalous);
  EXPECT_FALSE(rep.degenerate);
}

TEST(KMeans, EqualHalvesFavourNearClusterAsNormal) {
  const auto rep = kmeans2_on_distance(on_axis({1.0, 1.0, 1.0, 3.0, 3.0, 3.0}));
  EXPECT_EQ(rep.cluster_sizes, (std::array<int, 2>{3, 3}));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(rep.predicted[i], Label::normal);
  for (int i = 3; i < 6; ++i) EXPECT_EQ(rep.predicted[i], Label::anomalous);
  EXPECT_EQ(rep.centroids[0], 1.0);
  EXPECT_EQ(rep.centroids[1], 3.0);
}

TEST(KMeans, LargerClusterIsNormalEvenWhenFar) {
  const auto rep = kmeans2_on_distance(on_axis({0.1, 0.12, 4.0, 4.1, 4.2, 4.3, 4.05}));
  EXPECT_EQ(rep.predicted[0], Label::anomalous);
  EXPECT_EQ(rep.predicted[1], Label::anomalous);
  EXPECT_EQ(rep.predicted[2], Label::normal);
}

TEST(KMeans, PinnedTwelvePointsMatchThresholdOracle) {
  Eigen::MatrixX2d pts(12, 2);
  pts << 0.10, 0.05, -0.20, 0.10, 0.15, -0.12, -0.05, -0.30, 0.40, 0.35, 0.02, 0.01, -0.55, 0.60, 1.20, -0.90,
      0.25, 0.20, -1.10, -1.30, 0.05, -0.45, 0.70, 0.10;
  const auto m = make_manifold(pts);
  const auto rep = kmeans2_on_distance(m);
  EXPECT_EQ(rep.predicted, threshold_oracle(rep.distances));
  // Hand check: distances 1.5 and 1.70 stand apart from the rest.
  EXPECT_EQ(rep.predicted[7], Label::anomalous);
  EXPECT_EQ(rep.predicted[9], Label::anomalous);
}

TEST(KMeans, RandomManifoldsMatchThresholdOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(197));
    const auto m = make_manifold(random_manifold(rng, n));
    const auto rep = kmeans2_on_distance(m);
    ASSERT_EQ(rep.predicted, threshold_oracle(rep.distances)) << "trial " << trial;
    ASSERT_EQ(rep.cluster_sizes[0] + rep.cluster_sizes[1], n);
    ASSERT_GE(rep.cluster_sizes[0], rep.cluster_sizes[1]);
    const auto anomalies = std::count(rep.predicted.begin(), rep.predicted.end(), Label::anomalous);
    ASSERT_EQ(anomalies, rep.cluster_sizes[1]);
  }
}

TEST(KMeans, InvariantToRotationAndScale) {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = random_manifold(rng, 60);
    const auto base = kmeans2_on_distance(make_manifold(pts));
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Eigen::Matrix2d rot;
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const double scale = std::exp(rng.uniform(-3.0, 3.0));
    const Eigen::MatrixX2d moved = scale * (pts * rot.transpose());
    EXPECT_EQ(kmeans2_on_distance(make_manifold(moved)).predicted, base.predicted) << "trial " << trial;
  }
}

TEST(KMeans, CentroidRotationInvariantForAutoencoder) {
  Rng rng(23);
  Eigen::MatrixX2d pts = random_manifold(rng, 80);
  pts.rowwise() += Eigen::RowVector2d(0.4, 0.6);
  const auto base = kmeans2_on_distance(make_manifold(pts, Learner::autoencoder));
  const Eigen::RowVector2d c = pts.colwise().mean();
  Eigen::Matrix2d rot;
  rot << 0.0, -1.0, 1.0, 0.0;
  const Eigen::MatrixX2d moved = ((pts.rowwise() - c) * rot.transpose()).rowwise() + c;
  EXPECT_EQ(kmeans2_on_distance(make_manifold(moved, Learner::autoencoder)).predicted, base.predicted);
  EXPECT_NEAR((base.center_used - c.transpose()).norm(), 0.0, 1e-15);
}

TEST(KMeans, CenterModes) {
  Eigen::MatrixX2d pts(4, 2);
  pts << 1, 1, 3, 1, 1, 3, 3, 3;
  auto m = make_manifold(pts);
  EXPECT_EQ(kmeans2_on_distance(m).center_used, Eigen::Vector2d::Zero());
  DetectOptions o;
  o.center = CenterMode::centroid;
  EXPECT_EQ(kmeans2_on_distance(m, o).center_used, Eigen::Vector2d(2, 2));
  m.learner = Learner::autoencoder;
  EXPECT_EQ(kmeans2_on_distance(m).center_used, Eigen::Vector2d(2, 2));
  o.center = CenterMode::origin;
  EXPECT_EQ(kmeans2_on_distance(m, o).center_used, Eigen::Vector2d::Zero());
}

TEST(KMeans, TwoDimensionalOption) {
  Eigen::MatrixX2d pts(7, 2);
  pts << 0.1, 0.0, 0.0, 0.1, -0.1, 0.0, 0.0, -0.1, 0.05, 0.05, 3.0, 3.0, 3.1, 2.9;
  DetectOptions o;
  o.space = ClusterSpace::coordinates_2d;
  const auto rep = kmeans2_on_distance(make_manifold(pts), o);
  EXPECT_EQ(rep.cluster_sizes, (std::array<int, 2>{5, 2}));
  EXPECT_EQ(rep.predicted[5], Label::anomalous);
  EXPECT_EQ(rep.predicted[6], Label::anomalous);
}

TEST(KMeans, IdenticalPointsAreDegenerate) {
  const auto m = make_manifold(Eigen::MatrixX2d::Constant(10, 2, 0.7));
  const auto rep = kmeans2_on_distance(m);
  EXPECT_TRUE(rep.degenerate);
  EXPECT_EQ(rep.cluster_sizes, (std::array<int, 2>{10, 0}));
  for (auto l : rep.predicted) EXPECT_EQ(l, Label::normal);
}

TEST(KMeans, RejectsBadInput) {
  EXPECT_THROW(kmeans2_on_distance(on_axis({1.0, 2.0, 3.0})), InputError);
  auto m = on_axis({1.0, 2.0, 3.0, 4.0});
  m.points(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(kmeans2_on_distance(m), InputError);
}

TEST(Detect, AttachesScoresWhenTruthGiven) {
  std::vector<double> dist(20, 0.2);
  for (int i = 0; i < 20; ++i) dist[i] += 0.01 * i;
  dist[18] = 4.0;
  dist[19] = 4.5;
  std::vector<Label> truth(20, Label::normal);
  truth[17] = truth[18] = truth[19] = Label::anomalous;
  const auto rep = detect(on_axis(dist), truth);
  ASSERT_TRUE(rep.confusion.has_value());
  EXPECT_EQ(rep.confusion->tp, 2);
  EXPECT_EQ(rep.confusion->fn, 1);
  EXPECT_EQ(rep.confusion->fp, 0);
  EXPECT_EQ(rep.confusion->tn, 17);
  EXPECT_NEAR(rep.metrics->f1, 2.0 / 2.5, 1e-15);
  EXPECT_EQ(rep.metrics->precision, 1.0);
  EXPECT_NEAR(rep.metrics->gmean, std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_FALSE(detect(on_axis(dist), std::nullopt).metrics.has_value());
}

TEST(Detect, TruthWithOneClassFlagsUndefined) {
  std::vector<Label> truth(6, Label::normal);
  const auto rep = detect(on_axis({0.1, 0.1, 0.1, 0.1, 0.1, 5.0}), truth);
  ASSERT_TRUE(rep.metrics.has_value());
  EXPECT_TRUE(rep.metrics->gmean_undefined);
  EXPECT_EQ(rep.metrics->gmean, 0.0);
}
