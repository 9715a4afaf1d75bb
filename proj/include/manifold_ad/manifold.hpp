#ifndef MANIFOLD_AD_MANIFOLD_HPP
#define MANIFOLD_AD_MANIFOLD_HPP

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace manifold_ad {

enum class Learner { lmgp, autoencoder };

inline std::string to_string(Learner l) { return l == Learner::lmgp ? "lmgp" : "autoencoder"; }

/// One 2-D latent point per training sample, row-aligned with the dataset.
struct Manifold {
  Eigen::MatrixX2d points;
  std::vector<int> sample_ids;
  Learner learner = Learner::lmgp;
  std::array<std::string, 2> axis_names{"h1", "h2"};
  bool degenerate_axis = false;  // an axis had zero range before normalization
  bool untrained = false;        // produced without any training step

  [[nodiscard]] Eigen::Index size() const { return points.rows(); }
};

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_MANIFOLD_HPP
