// Two-cluster labeling of a latent manifold.
//
// Each point's distance to the manifold center is clustered with k-means
// (k = 2). The larger cluster is labeled normal; on equal sizes the cluster
// with the smaller mean distance is normal.
//
// The 1-D k-means starts from the 25th and 75th percentiles of the distances
// and iterates assign/update until the centroids stop moving. Lloyd's iteration
// can stall in a local optimum on multimodal data, so the result is compared
// with the best threshold split of the sorted distances (which is where the
// optimal 1-D two-partition always lies) and replaced when that split has
// strictly lower within-cluster sum of squares.

#ifndef MANIFOLD_AD_DETECT_HPP
#define MANIFOLD_AD_DETECT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "manifold_ad/dataset.hpp"
#include "manifold_ad/errors.hpp"
#include "manifold_ad/manifold.hpp"

namespace manifold_ad {

enum class CenterMode { automatic, origin, centroid };
enum class ClusterSpace { distance_1d, coordinates_2d };

struct DetectOptions {
  CenterMode center = CenterMode::automatic;  // origin for LMGP, centroid for autoencoder
  ClusterSpace space = ClusterSpace::distance_1d;
  int max_iter = 300;
};

struct Confusion {
  int tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Metrics {
  double f1 = 0.0;
  double precision = 0.0;
  double gmean = 0.0;
  bool f1_undefined = false;
  bool precision_undefined = false;
  bool gmean_undefined = false;
};

struct Score {
  Confusion confusion;
  Metrics metrics;
};

struct DetectionReport {
  std::vector<Label> predicted;
  std::array<int, 2> cluster_sizes{0, 0};  // [normal, anomalous]
  Eigen::Vector2d center_used = Eigen::Vector2d::Zero();
  Eigen::VectorXd distances;
  std::array<double, 2> centroids{0.0, 0.0};  // mean distance of [normal, anomalous] clusters
  int iterations = 0;
  bool degenerate = false;  // no spread to split; everything labeled normal
  bool untrained = false;   // carried over from the manifold
  std::optional<Confusion> confusion;
  std::optional<Metrics> metrics;
};

/// F1, precision and G-mean with anomalies as the positive class.
/// Undefined ratios are reported as 0 with their flag set.
inline Score score(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
  if (predicted.size() != truth.size()) throw InputError("predicted and truth lengths differ");
  Score s;
  auto& c = s.confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] == Label::anomalous, t = truth[i] == Label::anomalous;
    c.tp += p && t;
    c.fp += p && !t;
    c.tn += !p && !t;
    c.fn += !p && t;
  }
  auto& m = s.metrics;
  const double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
  if (tp + 0.5 * (fp + fn) > 0.0) m.f1 = tp / (tp + 0.5 * (fp + fn));
  else m.f1_undefined = true;
  if (tp + fp > 0.0) m.precision = tp / (tp + fp);
  else m.precision_undefined = true;
  if (tp + fn > 0.0 && tn + fp > 0.0) m.gmean = std::sqrt(tp / (tp + fn) * (tn / (tn + fp)));
  else m.gmean_undefined = true;
  return s;
}

namespace detail {

inline double percentile(std::vector<double> sorted_copy, double q) {
  std::sort(sorted_copy.begin(), sorted_copy.end());
  const double pos = q * static_cast<double>(sorted_copy.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted_copy.size() - 1);
  return sorted_copy[lo] + (pos - static_cast<double>(lo)) * (sorted_copy[hi] - sorted_copy[lo]);
}

inline double split_sse(const std::vector<double>& v, const std::vector<int>& assign) {
  double sum[2] = {0, 0}, cnt[2] = {0, 0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum[assign[i]] += v[i];
    cnt[assign[i]] += 1;
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mu = sum[assign[i]] / cnt[assign[i]];
    sse += (v[i] - mu) * (v[i] - mu);
  }
  return sse;
}

struct Partition {
  std::vector<int> assign;  // 0 = lower-valued cluster, 1 = higher
  int iterations = 0;
  bool refined = false;  // the exact threshold scan beat the Lloyd iterate
};

/// k-means with k = 2 on scalars.
inline Partition kmeans2_scalar(const std::vector<double>& v, int max_iter) {
  const std::size_t n = v.size();
  double c0 = percentile(v, 0.25), c1 = percentile(v, 0.75);
  if (!(c0 < c1)) {
    c0 = *std::min_element(v.begin(), v.end());
    c1 = *std::max_element(v.begin(), v.end());
  }
  Partition part{std::vector<int>(n, 0), 0};
  for (int it = 0; it < max_iter; ++it) {
    double sum[2] = {0, 0};
    int cnt[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      part.assign[i] = std::abs(v[i] - c1) < std::abs(v[i] - c0) ? 1 : 0;
      sum[part.assign[i]] += v[i];
      ++cnt[part.assign[i]];
    }
    part.iterations = it + 1;
    const double n0 = cnt[0] ? sum[0] / cnt[0] : c0;
    const double n1 = cnt[1] ? sum[1] / cnt[1] : c1;
    if (n0 == c0 && n1 == c1) break;
    c0 = n0;
    c1 = n1;
  }

  // Best threshold split of the sorted values via prefix sums.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    pre[k + 1] = pre[k] + v[order[k]];
    pre2[k + 1] = pre2[k] + v[order[k]] * v[order[k]];
  }
  std::size_t best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) {
    if (v[order[k]] == v[order[k - 1]]) continue;  // equal values stay together
    const double a = static_cast<double>(k), b = static_cast<double>(n - k);
    const double sse = (pre2[k] - pre[k] * pre[k] / a) + ((pre2[n] - pre2[k]) - (pre[n] - pre[k]) * (pre[n] - pre[k]) / b);
    if (sse < best) {
      best = sse;
      best_k = k;
    }
  }
  if (best_k > 0) {
    const double lloyd = split_sse(v, part.assign);
    std::vector<int> alt(n, 0);
    for (std::size_t k = best_k; k < n; ++k) alt[order[k]] = 1;
    const double exact = split_sse(v, alt);
    if (exact < lloyd * (1.0 - 1e-12)) {
      part.assign = std::move(alt);
      part.refined = true;
    }
  }
  return part;
}

/// k-means with k = 2 on 2-D points, seeded with the points nearest to and
/// farthest from the center.
inline Partition kmeans2_points(const Eigen::MatrixX2d& pts, const Eigen::VectorXd& dist, int max_iter) {
  const auto n = pts.rows();
  Eigen::Index near_i = 0, far_i = 0;
  dist.minCoeff(&near_i);
  dist.maxCoeff(&far_i);
  Eigen::RowVector2d c0 = pts.row(near_i), c1 = pts.row(far_i);
  Partition part{std::vector<int>(static_cast<std::size_t>(n), 0), 0};
  for (int it = 0; it < max_iter; ++it) {
    Eigen::RowVector2d sum[2] = {Eigen::RowVector2d::Zero(), Eigen::RowVector2d::Zero()};
    int cnt[2] = {0, 0};
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = (pts.row(i) - c1).squaredNorm() < (pts.row(i) - c0).squaredNorm() ? 1 : 0;
      part.assign[i] = a;
      sum[a] += pts.row(i);
      ++cnt[a];
    }
    part.iterations = it + 1;
    const Eigen::RowVector2d n0 = cnt[0] ? Eigen::RowVector2d(sum[0] / cnt[0]) : c0;
    const Eigen::RowVector2d n1 = cnt[1] ? Eigen::RowVector2d(sum[1] / cnt[1]) : c1;
    if (n0 == c0 && n1 == c1) break;
    c0 = n0;
    c1 = n1;
  }
  return part;
}

}  // namespace detail

inline Eigen::Vector2d manifold_center(const Manifold& m, CenterMode mode) {
  if (mode == CenterMode::automatic) mode = m.learner == Learner::lmgp ? CenterMode::origin : CenterMode::centroid;
  if (mode == CenterMode::origin) return Eigen::Vector2d::Zero();
  return m.points.colwise().mean().transpose();
}

/// Clusters the manifold into two groups and labels the larger one normal.
inline DetectionReport kmeans2_on_distance(const Manifold& m, const DetectOptions& opts = {}) {
  const auto n = m.size();
  if (n < 4) throw InputError("detection needs at least 4 points");
  if (!m.points.allFinite()) throw InputError("manifold has non-finite coordinates");

  DetectionReport rep;
  rep.untrained = m.untrained;
  rep.center_used = manifold_center(m, opts.center);
  rep.distances = (m.points.rowwise() - rep.center_used.transpose()).rowwise().norm();
  rep.predicted.assign(static_cast<std::size_t>(n), Label::normal);

  const bool same_points = (m.points.rowwise() - m.points.row(0)).cwiseAbs().maxCoeff() == 0.0;
  const double spread = rep.distances.maxCoeff() - rep.distances.minCoeff();
  if (same_points || (opts.space == ClusterSpace::distance_1d && spread == 0.0)) {
    rep.degenerate = true;
    rep.cluster_sizes = {static_cast<int>(n), 0};
    rep.centroids = {rep.distances.mean(), 0.0};
    return rep;
  }

  detail::Partition part;
  if (opts.space == ClusterSpace::distance_1d) {
    std::vector<double> v(rep.distances.data(), rep.distances.data() + n);
    part = detail::kmeans2_scalar(v, opts.max_iter);
  } else {
    part = detail::kmeans2_points(m.points, rep.distances, opts.max_iter);
  }
  rep.iterations = part.iterations;

  int cnt[2] = {0, 0};
  double sum[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    ++cnt[part.assign[i]];
    sum[part.assign[i]] += rep.distances(i);
  }
  const double mean0 = cnt[0] ? sum[0] / cnt[0] : 0.0, mean1 = cnt[1] ? sum[1] / cnt[1] : 0.0;
  int normal = 0;
  if (cnt[1] > cnt[0] || (cnt[1] == cnt[0] && mean1 < mean0)) normal = 1;
  for (Eigen::Index i = 0; i < n; ++i)
    rep.predicted[i] = part.assign[i] == normal ? Label::normal : Label::anomalous;
  rep.cluster_sizes = {cnt[normal], cnt[1 - normal]};
  rep.centroids = {normal ? mean1 : mean0, normal ? mean0 : mean1};
  return rep;
}

/// Clustering plus, when ground truth is supplied, confusion counts and metrics.
inline DetectionReport detect(const Manifold& m, const std::optional<std::vector<Label>>& truth,
                              const DetectOptions& opts = {}) {
  auto rep = kmeans2_on_distance(m, opts);
  if (truth) {
    if (static_cast<Eigen::Index>(truth->size()) != m.size()) throw InputError("truth length differs from manifold size");
    const auto s = score(rep.predicted, *truth);
    rep.confusion = s.confusion;
    rep.metrics = s.metrics;
  }
  return rep;
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_DETECT_HPP
