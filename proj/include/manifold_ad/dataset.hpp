#ifndef MANIFOLD_AD_DATASET_HPP
#define MANIFOLD_AD_DATASET_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "manifold_ad/errors.hpp"

namespace manifold_ad {

enum class Label : std::uint8_t { normal = 0, anomalous = 1 };

/// Tabular regression data: numeric features x, categorical features t, response y.
///
/// Categorical column j holds level indices in [0, level_counts[j]).
struct Dataset {
  Eigen::MatrixXd x;                        // n x dx
  Eigen::MatrixXi t;                        // n x dt, dt may be 0
  std::vector<int> level_counts;            // one per column of t
  Eigen::VectorXd y;                        // n
  std::optional<std::vector<Label>> truth;  // ground truth when known
  std::optional<std::vector<int>> source_id;
  std::vector<std::string> x_names;
  std::vector<std::string> t_names;

  [[nodiscard]] Eigen::Index n() const { return y.size(); }
  [[nodiscard]] Eigen::Index dx() const { return x.cols(); }
  [[nodiscard]] Eigen::Index dt() const { return t.cols(); }

  [[nodiscard]] std::size_t anomaly_count() const {
    if (!truth) return 0;
    std::size_t c = 0;
    for (auto l : *truth) c += (l == Label::anomalous);
    return c;
  }
};

/// Throws InputError describing the first violated invariant.
inline void validate(const Dataset& d) {
  const auto n = d.n();
  if (n < 4) throw InputError("dataset needs at least 4 samples, got " + std::to_string(n));
  if (d.x.rows() != n) throw InputError("x has " + std::to_string(d.x.rows()) + " rows, y has " + std::to_string(n));
  if (d.t.rows() != n && d.t.cols() > 0) throw InputError("t row count differs from y");
  if (static_cast<Eigen::Index>(d.level_counts.size()) != d.t.cols())
    throw InputError("level_counts must have one entry per categorical column");
  if (!d.x_names.empty() && static_cast<Eigen::Index>(d.x_names.size()) != d.dx())
    throw InputError("x_names length differs from dx");
  if (!d.t_names.empty() && static_cast<Eigen::Index>(d.t_names.size()) != d.dt())
    throw InputError("t_names length differs from dt");
  if (!d.x.allFinite()) throw InputError("x contains non-finite values");
  if (!d.y.allFinite()) throw InputError("y contains non-finite values");
  for (Eigen::Index j = 0; j < d.t.cols(); ++j) {
    if (d.level_counts[j] < 1) throw InputError("categorical column declares no levels");
    for (Eigen::Index i = 0; i < n; ++i) {
      const int v = d.t(i, j);
      if (v < 0 || v >= d.level_counts[j])
        throw InputError("categorical level " + std::to_string(v) + " out of range [0," +
                         std::to_string(d.level_counts[j]) + ") in row " + std::to_string(i));
    }
  }
  if (d.truth && static_cast<Eigen::Index>(d.truth->size()) != n) throw InputError("truth length differs from n");
  if (d.source_id && static_cast<Eigen::Index>(d.source_id->size()) != n)
    throw InputError("source_id length differs from n");
}

/// Column-wise standardization to zero mean and unit (population) variance.
/// Constant columns are only centered.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& m) {
    Standardizer s;
    const auto n = static_cast<double>(m.rows());
    s.mean = m.colwise().mean();
    s.scale.resize(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double var = (m.col(j).array() - s.mean(j)).square().sum() / n;
      const double sd = std::sqrt(var);
      s.scale(j) = sd > 1e-12 * (1.0 + std::abs(s.mean(j))) ? sd : 1.0;
    }
    return s;
  }

  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const {
    return (m.rowwise() - mean).array().rowwise() / scale.array();
  }
};

inline Eigen::VectorXd standardize(const Eigen::VectorXd& v) {
  Eigen::MatrixXd m = v;
  return Standardizer::fit(m).apply(m).col(0);
}

/// Grouped one-hot encoding: per-variable one-hot blocks, concatenated.
inline Eigen::MatrixXd grouped_one_hot(const Eigen::MatrixXi& t, const std::vector<int>& level_counts) {
  Eigen::Index width = 0;
  for (int l : level_counts) width += l;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t.rows(), width);
  Eigen::Index offset = 0;
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) out(i, offset + t(i, j)) = 1.0;
    offset += level_counts[j];
  }
  return out;
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_DATASET_HPP
