// Limited-memory BFGS with a strong-Wolfe line search.
//
// The objective callback returns f(x) and writes the gradient. A non-finite
// return value marks a failed evaluation; the line search treats it as an
// overshoot and shrinks the step. Every accepted step satisfies the Armijo
// condition, so the iterate sequence has nonincreasing objective.

#ifndef MANIFOLD_AD_LBFGS_HPP
#define MANIFOLD_AD_LBFGS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace manifold_ad {

struct LbfgsOptions {
  int max_iter = 500;
  double grad_tol = 1e-5;   // on the Euclidean gradient norm
  double rel_f_tol = 1e-12; // stop when an accepted step improves f by less than this, relatively
  int memory = 10;
  int max_line_search = 40;
  double c1 = 1e-4;
  double c2 = 0.9;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::quiet_NaN();
  double f_initial = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
};

namespace detail {

struct LinePoint {
  double alpha;
  double f;
  double d;  // directional derivative
  Eigen::VectorXd g;
};

inline double interpolate_step(const LinePoint& lo, const LinePoint& hi) {
  const double width = hi.alpha - lo.alpha;
  double a = lo.alpha + 0.5 * width;
  if (std::isfinite(hi.f)) {
    // Minimizer of the quadratic through (lo.f, lo.d) and hi.f.
    const double denom = 2.0 * (hi.f - lo.f - lo.d * width);
    if (denom != 0.0) {
      const double cand = lo.alpha - lo.d * width * width / denom;
      if (std::isfinite(cand)) a = cand;
    }
  }
  const double left = std::min(lo.alpha, hi.alpha), right = std::max(lo.alpha, hi.alpha);
  const double margin = 0.1 * (right - left);
  return std::clamp(a, left + margin, right - margin);
}

}  // namespace detail

template <typename Objective>
LbfgsResult minimize_lbfgs(Objective&& objective, Eigen::VectorXd x0, const LbfgsOptions& opt = {}) {
  using Eigen::VectorXd;
  LbfgsResult res;
  const auto dim = x0.size();
  VectorXd g(dim);
  double f = objective(x0, g);
  res.evaluations = 1;
  res.f_initial = f;
  res.x = x0;
  res.f = f;
  res.grad = g;
  if (!std::isfinite(f) || !g.allFinite()) {
    res.status = "non-finite objective at initial point";
    return res;
  }

  std::deque<VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  VectorXd x = x0;

  auto evaluate = [&](double alpha, const VectorXd& p) {
    detail::LinePoint pt{alpha, 0.0, 0.0, VectorXd(dim)};
    pt.f = objective(x + alpha * p, pt.g);
    ++res.evaluations;
    if (!std::isfinite(pt.f) || !pt.g.allFinite()) {
      pt.f = std::numeric_limits<double>::infinity();
      pt.d = std::numeric_limits<double>::quiet_NaN();
    } else {
      pt.d = pt.g.dot(p);
    }
    return pt;
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    if (g.norm() <= opt.grad_tol) {
      res.converged = true;
      res.status = "gradient norm below tolerance";
      break;
    }

    // Two-loop recursion.
    VectorXd q = g;
    const auto m = s_hist.size();
    std::vector<double> alpha_h(m);
    for (std::size_t k = m; k-- > 0;) {
      alpha_h[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha_h[k] * y_hist[k];
    }
    if (m > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(q);
      q += s_hist[k] * (alpha_h[k] - beta);
    }
    VectorXd p = -q;
    double d0 = g.dot(p);
    if (!(d0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -g;
      d0 = -g.squaredNorm();
    }

    const detail::LinePoint start{0.0, f, d0, g};
    double alpha = m == 0 ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    detail::LinePoint prev = start;
    detail::LinePoint accepted{0.0, f, d0, g};
    bool wolfe = false;

    auto armijo_ok = [&](const detail::LinePoint& pt) { return pt.f <= f + opt.c1 * pt.alpha * d0; };
    auto curvature_ok = [&](const detail::LinePoint& pt) { return std::abs(pt.d) <= -opt.c2 * d0; };
    auto note = [&](const detail::LinePoint& pt) {
      if (armijo_ok(pt) && pt.f < accepted.f) accepted = pt;
    };

    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi, int budget) {
      for (int k = 0; k < budget; ++k) {
        const double a = detail::interpolate_step(lo, hi);
        auto pt = evaluate(a, p);
        note(pt);
        if (!armijo_ok(pt) || pt.f >= lo.f) {
          hi = pt;
        } else {
          if (curvature_ok(pt)) return true;
          if (pt.d * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = pt;
        }
        if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) return false;
      }
      return false;
    };

    for (int k = 0; k < opt.max_line_search; ++k) {
      auto pt = evaluate(alpha, p);
      note(pt);
      if (!armijo_ok(pt) || (k > 0 && pt.f >= prev.f)) {
        wolfe = zoom(prev, pt, opt.max_line_search - k);
        break;
      }
      if (curvature_ok(pt)) {
        wolfe = true;
        break;
      }
      if (pt.d >= 0.0) {
        wolfe = zoom(pt, prev, opt.max_line_search - k);
        break;
      }
      prev = pt;
      alpha *= 2.0;
    }
    (void)wolfe;

    if (accepted.alpha == 0.0) {
      if (!s_hist.empty()) {
        // Stale curvature pairs; retry along steepest descent.
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      res.status = "line search failed to decrease the objective";
      break;
    }

    VectorXd s = accepted.alpha * p;
    VectorXd yv = accepted.g - g;
    const double f_old = f;
    x += s;
    f = accepted.f;
    g = accepted.g;
    res.iterations = iter + 1;

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    if (f_old - f <= opt.rel_f_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      res.status = "relative objective decrease below tolerance";
      break;
    }
  }
  if (res.status.empty()) res.status = "iteration limit reached";
  if (!res.converged && g.norm() <= opt.grad_tol) {
    res.converged = true;
    res.status = "gradient norm below tolerance";
  }
  res.x = x;
  res.f = f;
  res.grad = g;
  return res;
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_LBFGS_HPP
