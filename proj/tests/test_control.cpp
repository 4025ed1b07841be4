#include <gtest/gtest.h>

#include <vector>

#include "mgpin/control.hpp"
#include "mgpin/error.hpp"
#include "mgpin/ode.hpp"
#include "test_support.hpp"

using namespace mgpin;
using mgpin::testing::path_graph;

TEST(Secondary, ZeroAtRestoredConsensus) {
  const int m = 4;
  std::vector<DgMeasurement> meas(m, DgMeasurement{1.0, 1.0, 0.0});
  std::vector<double> mp = {0.002, 0.004, 0.001, 0.002};
  for (int k = 0; k < m; ++k) meas[k].P = 0.01 / mp[k];  // equal mp*P
  const auto out = secondary_derivs(meas, mp, path_graph(m), PinningSet::from_indices(m, {0}),
                                    ControlGains::uniform(30.0, 1.0));
  for (const auto& r : out) {
    EXPECT_NEAR(r.d_omega_nl, 0.0, 1e-12);
    EXPECT_NEAR(r.d_V_nl, 0.0, 1e-12);
  }
}

TEST(Secondary, PinnedNodeTracksReference) {
  const int m = 2;
  std::vector<DgMeasurement> meas(m, DgMeasurement{0.99, 0.98, 0.0});
  const std::vector<double> mp(m, 0.0);
  const auto out = secondary_derivs(meas, mp, path_graph(m), PinningSet::from_indices(m, {1}),
                                    ControlGains::uniform(30.0, 1.0));
  EXPECT_NEAR(out[0].d_omega_nl, 0.0, 1e-12);
  EXPECT_NEAR(out[1].d_omega_nl, 30.0 * 0.01, 1e-12);
  EXPECT_NEAR(out[1].d_V_nl, 30.0 * 0.02, 1e-12);
}

TEST(Secondary, SharingTermShrinksMismatch) {
  const int m = 2;
  std::vector<DgMeasurement> meas{{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  const std::vector<double> mp{0.002, 0.001};  // dg1 carries the larger mp*P
  const auto out = secondary_derivs(meas, mp, path_graph(m), PinningSet(m), ControlGains::uniform(30.0, 1.0));
  EXPECT_LT(out[0].d_omega_nl, 0.0);
  EXPECT_GT(out[1].d_omega_nl, 0.0);
  EXPECT_NEAR(out[0].d_omega_nl + out[1].d_omega_nl, 0.0, 1e-15);
}

TEST(Secondary, DimensionMismatchThrows) {
  std::vector<DgMeasurement> meas(3);
  std::vector<double> mp(2);
  EXPECT_THROW(secondary_derivs(meas, mp, path_graph(3), PinningSet(3), ControlGains{}), InvalidArgument);
}

TEST(ReducedModel, MatchesClosedForm) {
  const CommGraph g = path_graph(5);
  const PinningSet pins = PinningSet::from_indices(5, {2});
  const Eigen::MatrixXd L = laplacian(g);
  Eigen::VectorXd eps(5);
  eps << 1, -2, 0.5, 3, -1;
  const Eigen::VectorXd d = reduced_error_derivs(eps, L, pins, 30.0, 2.0);
  Eigen::MatrixXd M = L;
  M(2, 2) += 2.0;
  EXPECT_LT((d + 30.0 * M * eps).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lyapunov, DetectsIncrease) {
  std::vector<Eigen::VectorXd> traj{Eigen::Vector2d(1, 1), Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.6, 0.5)};
  const LyapunovReport r = lyapunov_check(traj);
  EXPECT_FALSE(r.monotone);
  EXPECT_NEAR(r.max_violation, 0.5 * (0.61 - 0.5), 1e-12);
  traj.pop_back();
  EXPECT_TRUE(lyapunov_check(traj).monotone);
}

// Pinned-per-component instances decay monotonically in 0.5 eps'eps.
TEST(Lyapunov, PinnedPerComponentDecays) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 6;
    CommGraph g(m, {{0, 1}, {1, 2}, {3, 4}});
    PinningSet pins(m);
    for (const auto& comp : components(g)) pins.set(comp[uniform_index(rng, comp.size())], true);
    const Eigen::MatrixXd L = laplacian(g);
    Eigen::VectorXd eps(m);
    for (int k = 0; k < m; ++k) eps(k) = standard_normal(rng);
    ode::Options opt;
    opt.rel_tol = 1e-9;
    opt.abs_tol = 1e-12;
    ode::Bdf solver(
        [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = reduced_error_derivs(y, L, pins, 30.0, 1.0); },
        0.0, eps, 0.5, opt);
    std::vector<Eigen::VectorXd> traj{eps};
    while (!solver.finished()) {
      solver.step();
      traj.push_back(solver.y());
    }
    EXPECT_TRUE(lyapunov_check(traj).monotone);
    EXPECT_LT(traj.back().norm(), eps.norm());
  }
}
