#include <gtest/gtest.h>

#include <algorithm>

#include "mgpin/error.hpp"
#include "mgpin/powerflow.hpp"
#include "test_support.hpp"

using namespace mgpin;
using mgpin::testing::data_path;

namespace {

void expect_self_consistent(const NetworkModel& net, const PowerFlowSolution& sol) {
  EXPECT_LT(sol.final_mismatch_norm, 1e-8);
  EXPECT_NEAR(sol.P_G.sum(), sol.P_load + sol.P_loss, 1e-7);
  EXPECT_NEAR(sol.Q_G.sum(), sol.Q_load + sol.Q_loss, 1e-7);
  Eigen::VectorXd mpP(net.dg_count());
  for (int k = 0; k < net.dg_count(); ++k) mpP(k) = net.dgs[k].mp * sol.P_G(k);
  EXPECT_LT(mpP.maxCoeff() - mpP.minCoeff(), 1e-8);
  const Eigen::VectorXd& w = sol.unknowns.omega_nl;
  EXPECT_LT(w.maxCoeff() - w.minCoeff(), 1e-8);
  EXPECT_NEAR(w(0) - mpP(0), sol.omega, 1e-8);
  for (int b : net.dg_buses) EXPECT_NEAR(std::abs(sol.bus_voltage(b)), sol.V_ref, 1e-10);
  EXPECT_NEAR(std::arg(sol.bus_voltage(net.reference_bus)), 0.0, 1e-14);
}

}  // namespace

TEST(PowerFlow, DeskCaseSelfConsistent) {
  const NetworkModel net = read_network(data_path("desk4.net"));
  const PowerFlowSolution sol = solve_power_flow(net, PfSettings{});
  expect_self_consistent(net, sol);
  EXPECT_LE(sol.iterations, 10);
}

TEST(PowerFlow, ThirtyEightBusSelfConsistent) {
  const NetworkModel net = read_network(data_path("microgrid38.net"));
  const PowerFlowSolution sol = solve_power_flow(net, PfSettings{});
  expect_self_consistent(net, sol);
  EXPECT_GT(sol.unknowns.omega_nl(0), 1.0);
}

TEST(PowerFlow, UnknownsRoundTrip) {
  const NetworkModel net = read_network(data_path("microgrid38.net"));
  const PfUnknowns u = flat_start(net, PfSettings{});
  const Eigen::VectorXd w = pack_unknowns(u);
  EXPECT_EQ(w.size(), 2 * net.bus_count + net.dg_count() - 1);
  EXPECT_EQ(pack_unknowns(unpack_unknowns(w, net.dg_count(), net.bus_count)), w);
}

TEST(PowerFlow, JacobianParallelMatchesSerial) {
  const NetworkModel net = read_network(data_path("microgrid38.net"));
  const PfSettings s;
  const Eigen::VectorXd w = pack_unknowns(flat_start(net, s));
  EXPECT_EQ(mismatch_jacobian(w, net, s, 1e-6), mismatch_jacobian_serial(w, net, s, 1e-6));
}

TEST(PowerFlow, MismatchZeroAtSolution) {
  const NetworkModel net = read_network(data_path("desk4.net"));
  const PfSettings s;
  const PowerFlowSolution sol = solve_power_flow(net, s);
  EXPECT_LT(mismatch(sol.unknowns, net, s).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PowerFlow, IterationLimitReported) {
  const NetworkModel net = read_network(data_path("microgrid38.net"));
  PfSettings s;
  s.max_iterations = 1;
  try {
    solve_power_flow(net, s);
    FAIL() << "expected ConvergenceFailure";
  } catch (const ConvergenceFailure& e) {
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_GT(e.residual(), s.tolerance);
  }
}

TEST(PowerFlow, HeavierLoadRaisesNoLoadFrequency) {
  const NetworkModel base = read_network(data_path("desk4.net"));
  NetworkModel heavy = base;
  scale_loads(heavy, base, {0, 1}, 1.5);
  const PowerFlowSolution a = solve_power_flow(base, PfSettings{});
  const PowerFlowSolution b = solve_power_flow(heavy, PfSettings{});
  EXPECT_GT(b.unknowns.omega_nl(0), a.unknowns.omega_nl(0));
  EXPECT_GT(b.P_G.sum(), a.P_G.sum());
}

TEST(PowerFlow, ReportsHaveOneRowPerBus) {
  const NetworkModel net = read_network(data_path("desk4.net"));
  const PowerFlowSolution sol = solve_power_flow(net, PfSettings{});
  const std::string csv = format_power_flow_csv(sol, net);
  EXPECT_EQ(csv.rfind("bus,V,theta_deg,P,Q,V_nl\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), net.bus_count + 1);
  EXPECT_NE(format_power_flow(sol, net).find("omega_nl"), std::string::npos);
}
