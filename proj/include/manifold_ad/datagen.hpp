// Analytic benchmark generators and anomaly injection.
//
// Inputs are sampled uniformly and independently over per-variable ranges.
// The defaults are the conventional design ranges of the wing-weight and
// borehole benchmarks; both can be overridden by name.
//
//   Wing      s_w [150,200]  w_fw [220,300]  A [6,10]  Lambda [-10,10] (deg)
//             q [16,45]  lambda [0.5,1]  t_c [0.08,0.18]  N_z [2.5,6]
//             W_dg [1700,2500]  w_p [0.025,0.08]
//   Borehole  T_u [63070,115600]  H_u [990,1110]  H_l [700,820]
//             r [100,50000]  r_w [0.05,0.15]  L [1120,1680]
//             k_w [9855,12045]  T_l [63.1,116]

#ifndef MANIFOLD_AD_DATAGEN_HPP
#define MANIFOLD_AD_DATAGEN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "manifold_ad/dataset.hpp"
#include "manifold_ad/errors.hpp"
#include "manifold_ad/rng.hpp"

namespace manifold_ad {

struct InputRange {
  std::string name;
  double lo;
  double hi;
};

using InputRanges = std::vector<InputRange>;

inline InputRanges wing_ranges() {
  return {{"s_w", 150.0, 200.0}, {"w_fw", 220.0, 300.0}, {"A", 6.0, 10.0},     {"Lambda", -10.0, 10.0},
          {"q", 16.0, 45.0},     {"lambda", 0.5, 1.0},   {"t_c", 0.08, 0.18}, {"N_z", 2.5, 6.0},
          {"W_dg", 1700.0, 2500.0}, {"w_p", 0.025, 0.08}};
}

inline InputRanges borehole_ranges() {
  return {{"T_u", 63070.0, 115600.0}, {"H_u", 990.0, 1110.0}, {"H_l", 700.0, 820.0},
          {"r", 100.0, 50000.0},      {"r_w", 0.05, 0.15},    {"L", 1120.0, 1680.0},
          {"k_w", 9855.0, 12045.0},   {"T_l", 63.1, 116.0}};
}

/// Replaces the bounds of the named variable; throws if the name is unknown.
inline void override_range(InputRanges& ranges, const std::string& name, double lo, double hi) {
  if (!(lo < hi)) throw InputError("range for " + name + " must satisfy lo < hi");
  for (auto& r : ranges) {
    if (r.name == name) {
      r.lo = lo;
      r.hi = hi;
      return;
    }
  }
  throw InputError("unknown input variable '" + name + "'");
}

enum class WingSource : int { primary = 1, alt_exponent = 2, no_paint = 3 };

/// Wing weight for input order [s_w, w_fw, A, Lambda(deg), q, lambda, t_c, N_z, W_dg, w_p].
/// Source 1 is the standard function; sources 2 and 3 perturb the s_w exponent
/// and the paint-weight term.
template <typename Row>
double wing_weight(const Row& u, WingSource source) {
  const double sw = u[0], wfw = u[1], ar = u[2], q = u[4], taper = u[5], tc = u[6], nz = u[7], wdg = u[8],
               wp = u[9];
  const double sweep = u[3] * std::numbers::pi / 180.0;
  const double c = std::cos(sweep);
  double sw_exp = 0.758;
  double paint = sw * wp;
  if (source == WingSource::alt_exponent) {
    sw_exp = 0.8;
    paint = wp;
  } else if (source == WingSource::no_paint) {
    sw_exp = 0.9;
    paint = 0.0;
  }
  return 0.36 * std::pow(sw, sw_exp) * std::pow(wfw, 0.0035) * std::pow(ar / (c * c), 0.6) * std::pow(q, 0.006) *
             std::pow(taper, 0.04) * std::pow(100.0 * tc / c, -0.3) * std::pow(nz * wdg, 0.49) +
         paint;
}

/// Borehole flow rate for input order [T_u, H_u, H_l, r, r_w, L, k_w, T_l].
template <typename Row>
double borehole_flow(const Row& u) {
  const double tu = u[0], hu = u[1], hl = u[2], r = u[3], rw = u[4], len = u[5], kw = u[6], tl = u[7];
  const double lr = std::log(r / rw);
  return 2.0 * std::numbers::pi * tu * (hu - hl) / (lr * (1.0 + 2.0 * len * tu / (lr * rw * rw * kw) + tu / tl));
}

namespace detail {

inline Eigen::MatrixXd sample_uniform(Eigen::Index n, const InputRanges& ranges, Rng& rng) {
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(ranges.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < ranges.size(); ++j) x(i, j) = rng.uniform(ranges[j].lo, ranges[j].hi);
  return x;
}

inline std::vector<std::string> names_of(const InputRanges& ranges) {
  std::vector<std::string> out;
  for (const auto& r : ranges) out.push_back(r.name);
  return out;
}

}  // namespace detail

/// Samples from the three wing sources; source 1 is normal, 2 and 3 anomalous.
/// Rows are ordered by source.
inline Dataset gen_wing(std::array<int, 3> n_per_source, double noise_sd, std::uint64_t seed,
                        const InputRanges& ranges = wing_ranges()) {
  if (n_per_source[0] < 1 || n_per_source[1] < 0 || n_per_source[2] < 0)
    throw InputError("wing: need n1 >= 1 and n2, n3 >= 0");
  const int n = n_per_source[0] + n_per_source[1] + n_per_source[2];
  if (n < 4) throw InputError("wing: total sample count must be at least 4");
  if (!(noise_sd >= 0.0)) throw InputError("wing: noise_sd must be non-negative");
  if (ranges.size() != 10) throw InputError("wing: expected 10 input ranges");

  Rng rng(seed);
  Dataset d;
  d.x = detail::sample_uniform(n, ranges, rng);
  d.x_names = detail::names_of(ranges);
  d.t.resize(n, 0);
  d.y.resize(n);
  std::vector<Label> truth(n);
  std::vector<int> source(n);
  int row = 0;
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k < n_per_source[s]; ++k, ++row) {
      const auto src = static_cast<WingSource>(s + 1);
      d.y(row) = wing_weight(d.x.row(row), src) + noise_sd * rng.normal();
      source[row] = s + 1;
      truth[row] = s == 0 ? Label::normal : Label::anomalous;
    }
  }
  d.truth = std::move(truth);
  d.source_id = std::move(source);
  return d;
}

inline Dataset gen_borehole(int n, double noise_sd, std::uint64_t seed,
                            const InputRanges& ranges = borehole_ranges()) {
  if (n < 4) throw InputError("borehole: n must be at least 4");
  if (!(noise_sd >= 0.0)) throw InputError("borehole: noise_sd must be non-negative");
  if (ranges.size() != 8) throw InputError("borehole: expected 8 input ranges");

  Rng rng(seed);
  Dataset d;
  d.x = detail::sample_uniform(n, ranges, rng);
  d.x_names = detail::names_of(ranges);
  d.t.resize(n, 0);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) d.y(i) = borehole_flow(d.x.row(i)) + noise_sd * rng.normal();
  d.truth = std::vector<Label>(n, Label::normal);
  d.source_id = std::vector<int>(n, 1);
  return d;
}

enum class Mechanism { multi_source, output_corruption };

struct AnomalySpec {
  Mechanism mechanism = Mechanism::output_corruption;
  double anomaly_rate = 0.1;
  double a_low = 1.0;
  double a_high = 2.0;
  std::uint64_t seed = 0;
};

/// round(rate * n), halves rounded away from zero.
inline int anomaly_count(double rate, Eigen::Index n) {
  return static_cast<int>(std::round(rate * static_cast<double>(n)));
}

/// Multi-source split of n_total samples at the given rate. The anomalous
/// count is shared equally by sources 2 and 3; an odd count gives source 2 the extra sample.
inline std::array<int, 3> wing_multisource_split(int n_total, double rate) {
  if (!(rate > 0.0 && rate < 1.0)) throw InputError("anomaly rate must lie in (0,1)");
  const int na = anomaly_count(rate, n_total);
  if (na <= 0 || na >= n_total) throw InputError("anomaly rate yields no anomalies or no normal samples");
  const int n3 = na / 2;
  return {n_total - na, na - n3, n3};
}

/// Output corruption y <- (1 + a) y with a ~ U[a_low, a_high] on a random subset.
inline Dataset corrupt_outputs(const Dataset& d, const AnomalySpec& spec) {
  if (spec.mechanism != Mechanism::output_corruption)
    throw InputError("corrupt_outputs requires the output_corruption mechanism");
  if (!(spec.anomaly_rate > 0.0 && spec.anomaly_rate < 1.0)) throw InputError("anomaly rate must lie in (0,1)");
  if (spec.a_low > spec.a_high) throw InputError("a_low must not exceed a_high");
  if (d.anomaly_count() != 0) throw InputError("corrupt_outputs expects a dataset without anomalies");
  const auto n = d.n();
  const int count = anomaly_count(spec.anomaly_rate, n);
  if (count <= 0 || count >= n)
    throw InputError("anomaly rate " + std::to_string(spec.anomaly_rate) + " corrupts " + std::to_string(count) +
                     " of " + std::to_string(n) + " samples");

  Rng rng(spec.seed);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
  for (int k = 0; k < count; ++k) {
    const auto j = k + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(idx[k], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  Dataset out = d;
  if (!out.truth) out.truth = std::vector<Label>(n, Label::normal);
  for (auto i : idx) {
    const double a = spec.a_low == spec.a_high ? spec.a_low : rng.uniform(spec.a_low, spec.a_high);
    out.y(i) = (1.0 + a) * d.y(i);
    (*out.truth)[i] = Label::anomalous;
  }
  return out;
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_DATAGEN_HPP
