// Latent map Gaussian process with a per-sample categorical variable.
//
// Every sample i gets its own level of an artificial categorical input s,
// embedded at h_i = row i of A_h in a 2-D latent space. Categorical features t
// are embedded separately through z(t) = onehot(t) A_z. With the correlation
//
//   r(u, u') = exp(-sum_k 10^omega_k (x_k - x'_k)^2 - |z - z'|^2 - |h - h'|^2)
//
// and R_delta = R + delta I, the hyperparameters are the MAP estimate, i.e. the
// minimizer of
//
//   n/2 log sigma2 + 1/2 log|R_delta| + (y - beta)' R_delta^-1 (y - beta) / (2 sigma2)
//     - log p(beta, omega, A_z, A_h, sigma)
//
// with independent priors log sigma ~ N(0, 3^2), omega_k ~ N(-3, 3^2),
// beta ~ N(0, 1) and every entry of A_z, A_h ~ N(0, 3^2). The second
// parameter of each prior is a standard deviation. Log-densities carry their
// normalizing constants; the likelihood omits its (n/2) log(2 pi).
//
// Samples whose response disagrees with the rest are cheapest to explain by
// moving their h far from the others, while the prior pulls consistent samples
// toward the origin. The fitted A_h rows therefore form the detection manifold.

#ifndef MANIFOLD_AD_LMGP_HPP
#define MANIFOLD_AD_LMGP_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "manifold_ad/dataset.hpp"
#include "manifold_ad/errors.hpp"
#include "manifold_ad/lbfgs.hpp"
#include "manifold_ad/manifold.hpp"
#include "manifold_ad/rng.hpp"

namespace manifold_ad {

inline constexpr int kLatentDim = 2;

struct LmgpParams {
  double beta = 0.0;
  Eigen::VectorXd omega;  // log10 inverse squared length-scales, one per numeric feature
  Eigen::MatrixX2d Az;    // (sum of level counts) x 2, empty when there are no categorical features
  Eigen::MatrixX2d Ah;    // n x 2, row i is the latent point of sample i
  double sigma2 = 1.0;
  double delta = 1e-6;
};

/// Numeric design, grouped one-hot encoding of t, and response.
struct LmgpData {
  Eigen::MatrixXd x;
  Eigen::MatrixXd zeta;
  Eigen::VectorXd y;

  [[nodiscard]] Eigen::Index n() const { return y.size(); }

  /// With `standardize`, x columns and y are scaled to zero mean and unit variance.
  static LmgpData from(const Dataset& d, bool standardize) {
    LmgpData out;
    if (standardize) {
      out.x = d.dx() > 0 ? Standardizer::fit(d.x).apply(d.x) : Eigen::MatrixXd(d.n(), 0);
      out.y = manifold_ad::standardize(d.y);
    } else {
      out.x = d.x;
      out.y = d.y;
    }
    out.zeta = grouped_one_hot(d.t, d.level_counts);
    return out;
  }
};

namespace lmgp_prior {
inline constexpr double log_sigma_sd = 3.0;
inline constexpr double omega_mean = -3.0;
inline constexpr double omega_sd = 3.0;
inline constexpr double beta_sd = 1.0;
inline constexpr double latent_sd = 3.0;

inline double neg_log_normal(double v, double mean, double sd) {
  const double z = (v - mean) / sd;
  return 0.5 * z * z + std::log(sd) + 0.5 * std::log(2.0 * std::numbers::pi);
}
}  // namespace lmgp_prior

/// -log p(Theta) for the hyperparameter priors.
inline double neg_log_prior(const LmgpParams& p) {
  using namespace lmgp_prior;
  const double log_sigma = 0.5 * std::log(p.sigma2);
  // Lognormal density on sigma: normal density of log sigma times 1/sigma.
  double v = neg_log_normal(log_sigma, 0.0, log_sigma_sd) + log_sigma;
  for (Eigen::Index k = 0; k < p.omega.size(); ++k) v += neg_log_normal(p.omega(k), omega_mean, omega_sd);
  v += neg_log_normal(p.beta, 0.0, beta_sd);
  const double c = std::log(latent_sd) + 0.5 * std::log(2.0 * std::numbers::pi);
  const auto entries = static_cast<double>(p.Az.size() + p.Ah.size());
  v += 0.5 * (p.Az.squaredNorm() + p.Ah.squaredNorm()) / (latent_sd * latent_sd) + entries * c;
  return v;
}

/// Correlation between two mixed inputs (x, z, h) and (x', z', h').
inline double correlation(const Eigen::VectorXd& x1, const Eigen::VectorXd& z1, const Eigen::VectorXd& h1,
                          const Eigen::VectorXd& x2, const Eigen::VectorXd& z2, const Eigen::VectorXd& h2,
                          const Eigen::VectorXd& omega) {
  double d = 0.0;
  for (Eigen::Index k = 0; k < x1.size(); ++k) {
    const double dx = x1(k) - x2(k);
    d += std::pow(10.0, omega(k)) * dx * dx;
  }
  d += (z1 - z2).squaredNorm() + (h1 - h2).squaredNorm();
  return std::exp(-d);
}

namespace detail {

inline void check_shapes(const LmgpData& data, const LmgpParams& p) {
  if (p.omega.size() != data.x.cols()) throw InputError("omega length differs from the number of numeric features");
  if (p.Ah.rows() != data.n()) throw InputError("A_h must have one row per sample");
  if (p.Az.rows() != data.zeta.cols()) throw InputError("A_z rows differ from the one-hot width");
}

/// Correlation matrix without the nugget.
inline Eigen::MatrixXd correlation_matrix(const LmgpData& data, const LmgpParams& p) {
  check_shapes(data, p);
  const auto n = data.n();
  const auto dx = data.x.cols();
  const Eigen::VectorXd w = p.omega.unaryExpr([](double o) { return std::pow(10.0, o); });
  const Eigen::MatrixX2d z = data.zeta.cols() > 0 ? Eigen::MatrixX2d(data.zeta * p.Az) : Eigen::MatrixX2d::Zero(n, 2);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = data.x;

  Eigen::MatrixXd r(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    r(j, j) = 1.0;
    const double* xj = xr.data() + j * dx;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double* xi = xr.data() + i * dx;
      double d = 0.0;
      for (Eigen::Index k = 0; k < dx; ++k) {
        const double diff = xi[k] - xj[k];
        d += w(k) * diff * diff;
      }
      d += (z.row(i) - z.row(j)).squaredNorm() + (p.Ah.row(i) - p.Ah.row(j)).squaredNorm();
      r(i, j) = r(j, i) = std::exp(-d);
    }
  }
  return r;
}

}  // namespace detail

/// R_delta = R + delta I.
inline Eigen::MatrixXd build_R(const LmgpData& data, const LmgpParams& p) {
  Eigen::MatrixXd r = detail::correlation_matrix(data, p);
  r.diagonal().array() += p.delta;
  return r;
}

/// Evaluates on the dataset as given (no standardization).
inline Eigen::MatrixXd build_R(const Dataset& d, const LmgpParams& p) { return build_R(LmgpData::from(d, false), p); }

/// Negative log posterior; +inf when R_delta is not numerically positive definite.
inline double neg_log_posterior(const LmgpData& data, const LmgpParams& p) {
  if (!(p.sigma2 > 0.0) || !(p.delta > 0.0)) return std::numeric_limits<double>::infinity();
  const auto n = static_cast<double>(data.n());
  Eigen::LLT<Eigen::MatrixXd> llt(build_R(data, p));
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd q = data.y.array() - p.beta;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = q.dot(llt.solve(q));
  const double f = 0.5 * n * std::log(p.sigma2) + 0.5 * logdet + 0.5 * quad / p.sigma2 + neg_log_prior(p);
  return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

inline double neg_log_posterior(const Dataset& d, const LmgpParams& p) {
  return neg_log_posterior(LmgpData::from(d, false), p);
}

/// Map between LmgpParams and the unconstrained optimization vector
///   [beta, omega, vec(A_z), vec(A_h), log(sigma2 - sigma2_min), log(delta - delta_min)]
/// where the last entry is present only when the nugget is estimated.
/// vec() is column-major.
struct LmgpParameterization {
  Eigen::Index dx = 0;
  Eigen::Index z_rows = 0;
  Eigen::Index n = 0;
  bool estimate_delta = true;
  double delta_min = 1e-6;
  double sigma2_min = 1e-6;
  double fixed_delta = 1e-6;  // used when the nugget is pinned

  static LmgpParameterization for_data(const LmgpData& data, bool estimate_delta) {
    LmgpParameterization pz;
    pz.dx = data.x.cols();
    pz.z_rows = data.zeta.cols();
    pz.n = data.n();
    pz.estimate_delta = estimate_delta;
    return pz;
  }

  [[nodiscard]] Eigen::Index size() const { return 1 + dx + 2 * z_rows + 2 * n + 1 + (estimate_delta ? 1 : 0); }
  [[nodiscard]] Eigen::Index omega_offset() const { return 1; }
  [[nodiscard]] Eigen::Index az_offset() const { return 1 + dx; }
  [[nodiscard]] Eigen::Index ah_offset() const { return 1 + dx + 2 * z_rows; }
  [[nodiscard]] Eigen::Index sigma_offset() const { return ah_offset() + 2 * n; }
  [[nodiscard]] Eigen::Index delta_offset() const { return sigma_offset() + 1; }

  [[nodiscard]] Eigen::VectorXd pack(const LmgpParams& p) const {
    Eigen::VectorXd v(size());
    v(0) = p.beta;
    v.segment(omega_offset(), dx) = p.omega;
    v.segment(az_offset(), 2 * z_rows) = p.Az.reshaped();
    v.segment(ah_offset(), 2 * n) = p.Ah.reshaped();
    v(sigma_offset()) = std::log(p.sigma2 - sigma2_min);
    if (estimate_delta) v(delta_offset()) = std::log(p.delta - delta_min);
    return v;
  }

  [[nodiscard]] LmgpParams unpack(const Eigen::VectorXd& v) const {
    LmgpParams p;
    p.beta = v(0);
    p.omega = v.segment(omega_offset(), dx);
    p.Az = v.segment(az_offset(), 2 * z_rows).reshaped(z_rows, 2);
    p.Ah = v.segment(ah_offset(), 2 * n).reshaped(n, 2);
    p.sigma2 = sigma2_min + std::exp(v(sigma_offset()));
    p.delta = estimate_delta ? delta_min + std::exp(v(delta_offset())) : fixed_delta;
    return p;
  }
};

/// Objective and its exact gradient with respect to the unconstrained vector.
/// Returns +inf (gradient untouched) when the factorization fails.
inline double objective_and_gradient(const LmgpData& data, const LmgpParameterization& pz, const Eigen::VectorXd& theta,
                                     Eigen::VectorXd& grad) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const LmgpParams p = pz.unpack(theta);
  const auto n = data.n();
  const double nd = static_cast<double>(n);
  if (!(p.sigma2 > 0.0) || !(p.delta > 0.0) || !theta.allFinite()) return std::numeric_limits<double>::infinity();

  MatrixXd r = detail::correlation_matrix(data, p);
  MatrixXd rd = r;
  rd.diagonal().array() += p.delta;
  Eigen::LLT<MatrixXd> llt(rd);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();

  const VectorXd q = data.y.array() - p.beta;
  const VectorXd alpha = llt.solve(q);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = q.dot(alpha);
  const double f = 0.5 * nd * std::log(p.sigma2) + 0.5 * logdet + 0.5 * quad / p.sigma2 + neg_log_prior(p);
  if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();

  // df/dR_delta = G = 1/2 R^-1 - alpha alpha' / (2 sigma2).
  MatrixXd rinv = MatrixXd::Identity(n, n);
  llt.solveInPlace(rinv);
  MatrixXd m = 0.5 * rinv;
  m.noalias() -= (0.5 / p.sigma2) * alpha * alpha.transpose();
  const double trace_g = m.trace();
  // M = G o R; every latent/scale parameter enters R only through pairwise differences.
  m.array() *= r.array();
  const VectorXd row_sum = m.rowwise().sum();

  grad.resize(pz.size());
  // beta
  grad(0) = -alpha.sum() / p.sigma2 + p.beta / (lmgp_prior::beta_sd * lmgp_prior::beta_sd);
  // omega: sum_ij M_ij (x_ik - x_jk)^2 = 2 (sum_i rowsum_i x_ik^2 - x_k' M x_k)
  if (pz.dx > 0) {
    const MatrixXd mx = m * data.x;
    for (Eigen::Index k = 0; k < pz.dx; ++k) {
      const double s = 2.0 * (row_sum.dot(data.x.col(k).cwiseAbs2()) - data.x.col(k).dot(mx.col(k)));
      grad(pz.omega_offset() + k) = -std::log(10.0) * std::pow(10.0, p.omega(k)) * s +
                                    (p.omega(k) - lmgp_prior::omega_mean) / (lmgp_prior::omega_sd * lmgp_prior::omega_sd);
    }
  }
  const double latent_prec = 1.0 / (lmgp_prior::latent_sd * lmgp_prior::latent_sd);
  // Latent positions: df/dv_i = -4 (rowsum_i v_i - (M V)_i)
  auto latent_grad = [&](const Eigen::MatrixX2d& v) -> Eigen::MatrixX2d {
    Eigen::MatrixX2d out = (-4.0) * (row_sum.asDiagonal() * v - m * v);
    return out;
  };
  if (pz.z_rows > 0) {
    const Eigen::MatrixX2d z = data.zeta * p.Az;
    const Eigen::MatrixX2d gaz = data.zeta.transpose() * latent_grad(z) + latent_prec * p.Az;
    grad.segment(pz.az_offset(), 2 * pz.z_rows) = gaz.reshaped();
  }
  const Eigen::MatrixX2d gah = latent_grad(p.Ah) + latent_prec * p.Ah;
  grad.segment(pz.ah_offset(), 2 * n) = gah.reshaped();
  // sigma2 = sigma2_min + exp(tau)
  {
    const double log_sigma = 0.5 * std::log(p.sigma2);
    const double d_sigma2 = 0.5 * nd / p.sigma2 - 0.5 * quad / (p.sigma2 * p.sigma2) +
                            (1.0 + log_sigma / (lmgp_prior::log_sigma_sd * lmgp_prior::log_sigma_sd)) / (2.0 * p.sigma2);
    grad(pz.sigma_offset()) = d_sigma2 * (p.sigma2 - pz.sigma2_min);
  }
  if (pz.estimate_delta) grad(pz.delta_offset()) = trace_g * (p.delta - pz.delta_min);
  return f;
}

/// Gradient of neg_log_posterior with respect to the unconstrained parameterization.
inline Eigen::VectorXd gradient(const LmgpData& data, const LmgpParams& p, bool estimate_delta = true) {
  auto pz = LmgpParameterization::for_data(data, estimate_delta);
  pz.fixed_delta = p.delta;
  Eigen::VectorXd g;
  const double f = objective_and_gradient(data, pz, pz.pack(p), g);
  if (!std::isfinite(f)) throw NumericalError("gradient requested where R_delta is not positive definite");
  return g;
}

struct LmgpFitOptions {
  int n_restarts = 4;
  int max_iter = 500;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  bool estimate_delta = true;
  double delta_init = 1e-2;  // starting nugget, or its pinned value when not estimated
  int threads = 1;           // restarts run concurrently up to this many at once
};

struct FitReport {
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  double initial_objective = std::numeric_limits<double>::quiet_NaN();
  int n_restarts = 0;
  int iterations = 0;
  double gradient_norm_at_solution = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int best_restart = -1;
  std::vector<double> restart_initial_objectives;
  std::vector<double> restart_final_objectives;
  std::string status;
  double seconds = 0.0;
};

struct LmgpFit {
  LmgpParams params;  // on the standardized problem
  Manifold manifold;
  FitReport report;
};

/// Starting point of one restart.
inline LmgpParams initial_params(const LmgpData& data, std::uint64_t seed, double delta) {
  Rng rng(seed);
  LmgpParams p;
  p.beta = 0.0;
  p.omega.resize(data.x.cols());
  for (Eigen::Index k = 0; k < p.omega.size(); ++k) p.omega(k) = rng.normal(-3.0, 1.0);
  p.Az.resize(data.zeta.cols(), 2);
  for (Eigen::Index i = 0; i < p.Az.size(); ++i) p.Az.data()[i] = rng.normal(0.0, 0.1);
  p.Ah.resize(data.n(), 2);
  for (Eigen::Index i = 0; i < p.Ah.size(); ++i) p.Ah.data()[i] = rng.normal(0.0, 0.1);
  p.sigma2 = 1.0;
  p.delta = delta;
  return p;
}

/// MAP fit with multiple restarts; returns the best restart.
inline LmgpFit fit(const Dataset& d, const LmgpFitOptions& opts = {}) {
  validate(d);
  if (d.dx() < 1 && d.dt() < 1) throw InputError("lmgp fit needs at least one numeric or categorical feature");
  if (opts.n_restarts < 1) throw InputError("n_restarts must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();

  const LmgpData data = LmgpData::from(d, true);
  auto pz = LmgpParameterization::for_data(data, opts.estimate_delta);
  pz.fixed_delta = std::max(opts.delta_init, pz.delta_min);
  const double delta_start = std::max(opts.delta_init, 2.0 * pz.delta_min);

  LbfgsOptions lopt;
  lopt.max_iter = opts.max_iter;
  lopt.grad_tol = opts.tol;

  std::vector<LbfgsResult> results(opts.n_restarts);
  auto run_restart = [&](int r) {
    const auto init = initial_params(data, derive_seed(opts.seed, {static_cast<std::uint64_t>(r)}),
                                     opts.estimate_delta ? delta_start : pz.fixed_delta);
    auto obj = [&](const Eigen::VectorXd& th, Eigen::VectorXd& g) { return objective_and_gradient(data, pz, th, g); };
    results[r] = minimize_lbfgs(obj, pz.pack(init), lopt);
  };
  const int workers = std::max(1, std::min(opts.threads, opts.n_restarts));
  if (workers == 1) {
    for (int r = 0; r < opts.n_restarts; ++r) run_restart(r);
  } else {
    for (int base = 0; base < opts.n_restarts; base += workers) {
      std::vector<std::jthread> pool;
      for (int r = base; r < std::min(base + workers, opts.n_restarts); ++r) pool.emplace_back(run_restart, r);
    }
  }

  LmgpFit out;
  auto& rep = out.report;
  rep.n_restarts = opts.n_restarts;
  for (int r = 0; r < opts.n_restarts; ++r) {
    rep.restart_initial_objectives.push_back(results[r].f_initial);
    rep.restart_final_objectives.push_back(results[r].f);
    if (std::isfinite(results[r].f) && (rep.best_restart < 0 || results[r].f < results[rep.best_restart].f))
      rep.best_restart = r;
  }
  if (rep.best_restart < 0) {
    std::string msg = "lmgp fit failed: no restart produced a finite objective (";
    for (int r = 0; r < opts.n_restarts; ++r) msg += (r ? "; " : "") + results[r].status;
    throw NumericalError(msg + ")");
  }
  const auto& best = results[rep.best_restart];
  rep.final_objective = best.f;
  rep.initial_objective = best.f_initial;
  rep.iterations = best.iterations;
  rep.gradient_norm_at_solution = best.grad.norm();
  rep.converged = best.converged;
  rep.status = best.status;

  out.params = pz.unpack(best.x);
  out.manifold.points = out.params.Ah;
  out.manifold.learner = Learner::lmgp;
  out.manifold.sample_ids.resize(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) out.manifold.sample_ids[i] = static_cast<int>(i);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_LMGP_HPP
