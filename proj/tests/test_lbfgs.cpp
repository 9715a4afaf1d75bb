#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "manifold_ad/lbfgs.hpp"

using namespace manifold_ad;

namespace {

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  g = Eigen::VectorXd::Zero(x.size());
  double f = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = x(i + 1) - x(i) * x(i), b = 1.0 - x(i);
    f += 100.0 * a * a + b * b;
    g(i) += -400.0 * a * x(i) - 2.0 * b;
    g(i + 1) += 200.0 * a;
  }
  return f;
}

}  // namespace

TEST(Lbfgs, RosenbrockReachesTheMinimum) {
  Eigen::VectorXd x0(4);
  x0 << -1.2, 1.0, -1.2, 1.0;
  LbfgsOptions opt;
  opt.max_iter = 2000;
  opt.grad_tol = 1e-9;
  const auto r = minimize_lbfgs(rosenbrock, x0, opt);
  EXPECT_TRUE(r.converged) << r.status;
  EXPECT_LT((r.x - Eigen::VectorXd::Ones(4)).norm(), 1e-6);
  EXPECT_LT(r.f, 1e-12);
  EXPECT_LE(r.f, r.f_initial);
  EXPECT_GT(r.iterations, 0);
}

TEST(Lbfgs, QuadraticWithKnownSolution) {
  Eigen::MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  const Eigen::Vector3d b(1, -2, 3);
  auto q = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
  const auto r = minimize_lbfgs(q, Eigen::VectorXd::Zero(3));
  const Eigen::VectorXd want = A.ldlt().solve(b);
  EXPECT_LT((r.x - want).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT(r.grad.cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Lbfgs, NonFiniteStartIsReturnedUntouched) {
  auto bad = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(x.size());
    return std::numeric_limits<double>::infinity();
  };
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(2, 3.0);
  const auto r = minimize_lbfgs(bad, x0);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.x, x0);
  EXPECT_TRUE(std::isinf(r.f));
  EXPECT_FALSE(r.status.empty());
}

TEST(Lbfgs, InfeasibleRegionIsAvoided) {
  // -log(x) - log(1 - x) has its minimum at 0.5 and is undefined outside (0, 1).
  auto barrier = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    const double t = x(0);
    if (t <= 0.0 || t >= 1.0) return std::numeric_limits<double>::quiet_NaN();
    g(0) = -1.0 / t + 1.0 / (1.0 - t);
    return -std::log(t) - std::log(1.0 - t);
  };
  const auto r = minimize_lbfgs(barrier, Eigen::VectorXd::Constant(1, 0.99));
  EXPECT_NEAR(r.x(0), 0.5, 1e-6);
  EXPECT_LE(r.f, r.f_initial);
}

TEST(Lbfgs, IterationCapIsReported) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opt;
  opt.max_iter = 3;
  const auto r = minimize_lbfgs(rosenbrock, x0, opt);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.iterations, 3);
  EXPECT_LT(r.f, r.f_initial);
}
