#include <gtest/gtest.h>

#include <cmath>

#include "mgpin/dynamics.hpp"
#include "mgpin/error.hpp"
#include "test_support.hpp"

using namespace mgpin;
using mgpin::testing::data_path;
using mgpin::testing::path_graph;

namespace {

struct Case {
  NetworkModel net;
  PowerFlowSolution pf;
  Eigen::VectorXd x0;
};

Case load_case(const std::string& file) {
  Case c;
  c.net = read_network(data_path(file));
  c.pf = solve_power_flow(c.net, PfSettings{});
  c.x0 = extract_steady_state(c.pf, c.net);
  return c;
}

MicrogridSystem make_system(const Case& c) {
  const int m = c.net.dg_count();
  return MicrogridSystem(c.net, path_graph(m), PinningSet::from_indices(m, {0}), ControlGains::uniform(30.0, 1.0));
}

}  // namespace

TEST(Layout, SizesAndNames) {
  const NetworkModel net = read_network(data_path("desk4.net"));
  const StateLayout l = StateLayout::of(net);
  EXPECT_EQ(l.size(), 15 * 2 + 2 * 3 + 2 * 2);
  EXPECT_EQ(l.name(l.dg(1, StateLayout::kVoD)), "dg2.vo_d");
  EXPECT_EQ(l.name(l.line(2) + 1), "line3.Q");
  EXPECT_EQ(l.load_buses, (std::vector<int>{0, 1}));
}

TEST(DgState, ReadWriteRoundTrip) {
  const NetworkModel net = read_network(data_path("desk4.net"));
  const StateLayout l = StateLayout::of(net);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(l.size());
  DgState s;
  s.delta = 0.1;
  s.P = 0.2;
  s.Q = -0.1;
  s.vo = {0.9, 0.05};
  s.io = {0.3, -0.2};
  s.omega_nl = 1.001;
  write_dg(x, l, 1, s);
  const DgState r = read_dg(x, l, 1);
  EXPECT_EQ(r.vo, s.vo);
  EXPECT_EQ(r.io, s.io);
  EXPECT_EQ(r.omega_nl, s.omega_nl);
  EXPECT_EQ(read_dg(x, l, 0).P, 0.0);
}

TEST(PowerController, DroopLawAndFilter) {
  DgParams p = read_network(data_path("desk4.net")).dgs[0];
  DgState s;
  s.vo = {1.0, 0.0};
  s.io = {0.5, -0.2};
  s.P = 0.4;
  s.Q = 0.1;
  s.omega_nl = 1.002;
  s.V_nl = 1.01;
  const PowerControllerOut o = power_controller_derivs(s, p);
  EXPECT_DOUBLE_EQ(o.p_inst, 0.5);
  EXPECT_DOUBLE_EQ(o.q_inst, 0.2);
  EXPECT_DOUBLE_EQ(o.dP, p.omega_c * (0.5 - 0.4));
  EXPECT_DOUBLE_EQ(o.omega, 1.002 - p.mp * 0.4);
  EXPECT_DOUBLE_EQ(o.V, 1.01 - p.nq * 0.1);
}

TEST(SteadyState, DeskResidualBelowTolerance) {
  const Case c = load_case("desk4.net");
  const MicrogridSystem sys = make_system(c);
  EXPECT_LE(system_derivs(sys, 0.0, c.x0).cwiseAbs().maxCoeff(), 1e-6);
  const DgOutputs o = dg_outputs(sys, c.x0);
  for (int k = 0; k < c.net.dg_count(); ++k) {
    EXPECT_NEAR(o.omega[k], 1.0, 1e-9);
    EXPECT_NEAR(o.V[k], 1.0, 1e-8);
    EXPECT_NEAR(o.P[k], c.pf.P_G(k), 1e-8);
  }
}

TEST(SteadyState, ThirtyEightBusResidualBelowTolerance) {
  const Case c = load_case("microgrid38.net");
  EXPECT_LE(system_derivs(make_system(c), 0.0, c.x0).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SteadyState, RejectsUnconvergedSolution) {
  Case c = load_case("desk4.net");
  c.pf.final_mismatch_norm = 1.0;
  EXPECT_THROW(extract_steady_state(c.pf, c.net), InvalidArgument);
}

TEST(SystemDerivs, PureAndDeterministic) {
  const Case c = load_case("desk4.net");
  const MicrogridSystem sys = make_system(c);
  Eigen::VectorXd x = c.x0;
  x(3) += 0.01;
  const Eigen::VectorXd a = system_derivs(sys, 0.0, x);
  const Eigen::VectorXd b = system_derivs(sys, 5.0, x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(x(3), c.x0(3) + 0.01);
}

TEST(SystemDerivs, InfiniteVirtualResistanceRejected) {
  Case c = load_case("desk4.net");
  c.net.virtual_resistance = kInfiniteResistance;
  const MicrogridSystem sys = make_system(c);
  EXPECT_THROW(system_derivs(sys, 0.0, c.x0), InvalidArgument);
}

TEST(Linearize, DeskEquilibriumIsStable) {
  const Case c = load_case("desk4.net");
  const Linearization lin = linearize(make_system(c), c.x0);
  EXPECT_EQ(lin.A.rows(), c.x0.size() - 1);
  EXPECT_LT(lin.eigenvalues(lin.eigenvalues.size() - 1).real(), 0.0);
  EXPECT_LT(lin.residual, 1e-6);
}

TEST(Linearize, RejectsNonEquilibrium) {
  const Case c = load_case("desk4.net");
  Eigen::VectorXd x = c.x0;
  x(StateLayout::kP) += 0.1;
  try {
    linearize(make_system(c), x);
    FAIL() << "expected rejection";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("dg1"), std::string::npos) << e.what();
  }
}

TEST(Integrate, NoEventsStaysAtEquilibrium) {
  const Case c = load_case("desk4.net");
  MicrogridSystem sys = make_system(c);
  SimSettings st;
  st.t_end = 0.2;
  int samples = 0;
  double worst = 0.0;
  integrate(sys, c.x0, {}, st, [&](double, const Eigen::VectorXd& x, const MicrogridSystem& s) {
    ++samples;
    const DgOutputs o = dg_outputs(s, x);
    for (double w : o.omega) worst = std::max(worst, std::abs(w - 1.0));
  });
  EXPECT_EQ(samples, 201);
  EXPECT_LT(worst, 1e-8);
}

TEST(Integrate, LoadStepIsRestored) {
  const Case c = load_case("desk4.net");
  MicrogridSystem sys = make_system(c);
  SimSettings st;
  st.t_end = 1.5;
  std::vector<double> event_samples;
  std::vector<TimedEvent> ev{{0.1234, [&](MicrogridSystem& s, double) { scale_loads(s.network, c.net, {0}, 1.3); }}};
  double dip = 0.0;
  const IntegrationResult r = integrate(sys, c.x0, ev, st, [&](double t, const Eigen::VectorXd& x, const MicrogridSystem& s) {
    if (std::abs(t - 0.1234) < 1e-12) event_samples.push_back(t);
    dip = std::max(dip, std::abs(dg_outputs(s, x).omega[0] - 1.0));
  });
  EXPECT_EQ(event_samples.size(), 1u);
  EXPECT_GT(dip, 1e-5);
  const DgOutputs o = dg_outputs(sys, r.final_state);
  for (int k = 0; k < c.net.dg_count(); ++k) {
    EXPECT_NEAR(o.omega[k], 1.0, 1e-4);
    EXPECT_NEAR(o.V[k], 1.0, 1e-3);
  }
  EXPECT_NEAR(o.mpP[0], o.mpP[1], 0.01 * o.mpP[0]);
}

// Tightening the tolerances by 10x moves the end state by less than 10x the
// coarse run's own accumulated error estimate.
TEST(Integrate, ToleranceRefinementIsConsistent) {
  const Case c = load_case("desk4.net");
  auto run = [&](double rtol, double atol) {
    MicrogridSystem sys = make_system(c);
    SimSettings st;
    st.t_end = 0.5;
    st.rel_tol = rtol;
    st.abs_tol = atol;
    std::vector<TimedEvent> ev{{0.1, [&](MicrogridSystem& s, double) { scale_loads(s.network, c.net, {0, 1}, 0.5); }}};
    return integrate(sys, c.x0, ev, st);
  };
  const IntegrationResult coarse = run(1e-6, 1e-8);
  const IntegrationResult fine = run(1e-7, 1e-9);
  const double change = (coarse.final_state - fine.final_state).cwiseAbs().maxCoeff();
  EXPECT_LT(change, 10.0 * coarse.stats.accumulated_error);
}
