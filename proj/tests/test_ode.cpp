#include <gtest/gtest.h>

#include <cmath>

#include "mgpin/error.hpp"
#include "mgpin/ode.hpp"

using namespace mgpin;

namespace {

Eigen::VectorXd run(ode::Bdf& s) {
  while (!s.finished()) s.step();
  return s.y();
}

}  // namespace

TEST(Bdf, ExponentialDecay) {
  ode::Options opt;
  opt.rel_tol = 1e-8;
  opt.abs_tol = 1e-12;
  ode::Bdf s([](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -2.0 * y; }, 0.0,
             Eigen::VectorXd::Constant(1, 1.0), 1.0, opt);
  EXPECT_NEAR(run(s)(0), std::exp(-2.0), 1e-6);
  EXPECT_DOUBLE_EQ(s.t(), 1.0);
}

TEST(Bdf, StiffLinearSystem) {
  // Eigenvalues -1 and -1e4.
  Eigen::Matrix2d A;
  A << -1.0, 0.0, 1.0, -1e4;
  ode::Options opt;
  opt.rel_tol = 1e-7;
  opt.abs_tol = 1e-10;
  ode::Bdf s([&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = A * y; }, 0.0, Eigen::Vector2d(1, 0),
             2.0, opt);
  const Eigen::VectorXd y = run(s);
  const double e = std::exp(-2.0);
  EXPECT_NEAR(y(0), e, 1e-5);
  EXPECT_NEAR(y(1), e / (1e4 - 1.0), 1e-8);
  // An explicit method would need ~1e4 steps for stability.
  EXPECT_LT(s.stats().steps, 500);
}

TEST(Bdf, Robertson) {
  ode::Options opt;
  opt.rel_tol = 1e-6;
  opt.abs_tol = 1e-10;
  ode::Bdf s(
      [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy(0) = -0.04 * y(0) + 1e4 * y(1) * y(2);
        dy(2) = 3e7 * y(1) * y(1);
        dy(1) = -dy(0) - dy(2);
      },
      0.0, Eigen::Vector3d(1, 0, 0), 40.0, opt);
  const Eigen::VectorXd y = run(s);
  // Reference values at t = 40.
  EXPECT_NEAR(y(0), 0.7158, 2e-4);
  EXPECT_NEAR(y(2), 0.2842, 2e-4);
  EXPECT_NEAR(y.sum(), 1.0, 1e-8);
}

TEST(Bdf, DenseOutputInterpolates) {
  ode::Options opt;
  opt.rel_tol = 1e-9;
  opt.abs_tol = 1e-12;
  ode::Bdf s([](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y; }, 0.0,
             Eigen::VectorXd::Constant(1, 1.0), 1.0, opt);
  for (int i = 0; i < 20; ++i) s.step();
  const double t = 0.5 * (s.t_old() + s.t());
  EXPECT_NEAR(s.dense(t)(0), std::exp(-t), 1e-7);
}

TEST(Bdf, NonFiniteStateThrows) {
  const ode::Rhs nan_rhs = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) {
    dy(0) = std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(ode::Bdf(nan_rhs, 0.0, Eigen::VectorXd::Zero(1), 1.0, ode::Options{}), NumericFailure);
  // Blows up in finite time: y' = y^2, y(0) = 1 has a pole at t = 1.
  const ode::Rhs blowup = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy(0) = y(0) * y(0); };
  ode::Bdf s(blowup, 0.0, Eigen::VectorXd::Constant(1, 1.0), 2.0, ode::Options{});
  EXPECT_THROW(run(s), NumericFailure);
}

TEST(Bdf, TighterToleranceReducesError) {
  auto error_at = [](double rtol) {
    ode::Options opt;
    opt.rel_tol = rtol;
    opt.abs_tol = rtol * 1e-3;
    ode::Bdf s([](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy(0) = -y(0) + std::sin(t); }, 0.0,
               Eigen::VectorXd::Constant(1, 1.0), 3.0, opt);
    const double t = 3.0;
    const double exact = 1.5 * std::exp(-t) + 0.5 * (std::sin(t) - std::cos(t));
    while (!s.finished()) s.step();
    return std::abs(s.y()(0) - exact);
  };
  EXPECT_LT(error_at(1e-8), error_at(1e-5));
  EXPECT_LT(error_at(1e-8), 1e-6);
}

TEST(Jacobian, ForwardDifferenceParallelMatchesSerial) {
  const ode::Rhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    for (int i = 0; i < y.size(); ++i) dy(i) = std::sin(y(i)) * y((i + 1) % y.size());
  };
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(40, -1.0, 2.0);
  Eigen::VectorXd f0(40);
  f(0.0, y, f0);
  const Eigen::MatrixXd a = ode::fd_jacobian(f, 0.0, y, f0);
  EXPECT_EQ(a, ode::fd_jacobian_serial(f, 0.0, y, f0));
  const Eigen::MatrixXd c = ode::central_jacobian(f, 0.0, y, 1e-6);
  EXPECT_LT((a - c).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(c(3, 3), std::cos(y(3)) * y(4), 1e-8);
}
