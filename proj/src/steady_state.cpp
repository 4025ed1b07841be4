#include <cmath>

#include "mgpin/dynamics.hpp"
#include "mgpin/error.hpp"

namespace mgpin {

Eigen::VectorXd extract_steady_state(const PowerFlowSolution& sol, const NetworkModel& net) {
  require_valid(net);
  const int m = net.dg_count(), n = net.bus_count;
  if (sol.bus_voltage.size() != n || sol.P_G.size() != m)
    throw InvalidArgument("extract_steady_state: solution does not match the network");
  if (!(sol.final_mismatch_norm <= 1e-6) || !sol.bus_voltage.allFinite())
    throw InvalidArgument("extract_steady_state: power flow is not converged");
  if (!std::isfinite(net.virtual_resistance))
    throw InvalidArgument("extract_steady_state: dynamics needs a finite virtual resistance");

  const double w = sol.omega;
  const cplx j(0.0, 1.0);

  // DG output currents from the power-flow bus injections.
  Eigen::MatrixXcd y = build_admittance(net, w);
  const Eigen::VectorXcd s_cal = sol.bus_voltage.cwiseProduct((y * sol.bus_voltage).conjugate());
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(n);
  for (int k = 0; k < m; ++k) {
    const int b = net.dg_buses[k];
    cplx s_bus = s_cal(b);
    if (auto it = net.loads.find(b); it != net.loads.end())
      s_bus += std::norm(sol.bus_voltage(b)) / std::conj(cplx(it->second.resistance, w * it->second.inductance));
    inj(b) = std::conj(s_bus / sol.bus_voltage(b));
  }

  // Re-solve the linear network with these injections so that line, load and
  // node equations hold to round-off.
  for (const auto& [bus, load] : net.loads) y(bus, bus) += 1.0 / cplx(load.resistance, w * load.inductance);
  Eigen::VectorXcd v = y.partialPivLu().solve(inj);

  // Common frame: the reference DG's capacitor voltage lies on the d axis.
  const int ref = net.reference_dg();
  {
    const int b = net.dg_buses[ref];
    const cplx vo = v(b) + cplx(net.dgs[ref].lcl.rc, w * net.dgs[ref].lcl.Lc) * inj(b);
    v *= std::polar(1.0, -std::arg(vo));
  }

  const StateLayout l = StateLayout::of(net);
  const int nl = net.line_count();
  Eigen::VectorXcd i_line(nl);
  for (int i = 0; i < nl; ++i) {
    const Line& ln = net.lines[i];
    i_line(i) = (v(ln.from_bus) - v(ln.to_bus)) / cplx(ln.resistance, w * ln.inductance);
  }
  Eigen::VectorXcd i_load = Eigen::VectorXcd::Zero(n);
  for (const auto& [bus, load] : net.loads) i_load(bus) = v(bus) / cplx(load.resistance, w * load.inductance);

  // Node voltages are R_N times a current sum, so current-balance residuals
  // of round-off size are amplified by R_N. Least-norm line-current
  // corrections make the balance exact at non-DG buses; DG output currents
  // then follow from the balance at their own buses.
  std::vector<int> free_bus;
  for (int b = 0; b < n; ++b)
    if (!net.is_dg_bus(b)) free_bus.push_back(b);
  const double g_n = 1.0 / net.virtual_resistance;
  const auto net_in = [&](Eigen::VectorXcd& acc) {
    acc = -i_load;
    for (int i = 0; i < nl; ++i) {
      acc(net.lines[i].from_bus) -= i_line(i);
      acc(net.lines[i].to_bus) += i_line(i);
    }
  };
  if (!free_bus.empty()) {
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(static_cast<long>(free_bus.size()), nl);
    std::vector<int> row(n, -1);
    for (std::size_t r = 0; r < free_bus.size(); ++r) row[free_bus[r]] = static_cast<int>(r);
    for (int i = 0; i < nl; ++i) {
      if (row[net.lines[i].from_bus] >= 0) inc(row[net.lines[i].from_bus], i) -= 1.0;
      if (row[net.lines[i].to_bus] >= 0) inc(row[net.lines[i].to_bus], i) += 1.0;
    }
    const Eigen::LDLT<Eigen::MatrixXd> grounded(inc * inc.transpose());
    Eigen::VectorXcd acc;
    for (int pass = 0; pass < 2; ++pass) {
      net_in(acc);
      Eigen::VectorXcd r(static_cast<long>(free_bus.size()));
      for (std::size_t q = 0; q < free_bus.size(); ++q) r(q) = g_n * v(free_bus[q]) - acc(free_bus[q]);
      const Eigen::VectorXd cr = inc.transpose() * grounded.solve(Eigen::VectorXd(r.real()));
      const Eigen::VectorXd ci = inc.transpose() * grounded.solve(Eigen::VectorXd(r.imag()));
      for (int i = 0; i < nl; ++i) i_line(i) += cplx(cr(i), ci(i));
    }
  }
  Eigen::VectorXcd acc;
  net_in(acc);
  for (int k = 0; k < m; ++k) {
    const int b = net.dg_buses[k];
    inj(b) = g_n * v(b) - acc(b);
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(l.size());
  for (int i = 0; i < nl; ++i) {
    x(l.line(i)) = i_line(i).real();
    x(l.line(i) + 1) = i_line(i).imag();
  }
  for (std::size_t i = 0; i < l.load_buses.size(); ++i) {
    const cplx cur = i_load(l.load_buses[i]);
    x(l.load(static_cast<int>(i))) = cur.real();
    x(l.load(static_cast<int>(i)) + 1) = cur.imag();
  }

  for (int k = 0; k < m; ++k) {
    const DgParams& p = net.dgs[k];
    const auto& f = p.lcl;
    const auto& g = p.gains;
    const int b = net.dg_buses[k];
    const cplx vo_common = v(b) + cplx(f.rc, w * f.Lc) * inj(b);
    DgState s;
    s.delta = k == ref ? 0.0 : std::arg(vo_common);
    const cplx to_local = std::polar(1.0, -s.delta);
    s.io = inj(b) * to_local;
    s.vo = vo_common * to_local;
    s.ii = s.io + j * w * f.Cf * s.vo;
    const cplx vi = s.vo + cplx(f.rf, w * f.Lf) * s.ii;
    s.P = s.vo.real() * s.io.real() + s.vo.imag() * s.io.imag();
    s.Q = s.io.real() * s.vo.imag() - s.io.imag() * s.vo.real();
    s.omega_nl = w + p.mp * s.P;
    s.V_nl = std::abs(v(b)) + p.nq * s.Q;
    const double cross = g.cross_coupling ? 1.0 : 0.0;
    s.phi = (s.ii - g.KF * s.io - cross * j * f.Cf * s.vo) / g.Kiv;
    s.gamma = (vi - cross * j * f.Lf * s.ii) / g.Kic;
    write_dg(x, l, k, s);
  }
  return x;
}

}  // namespace mgpin
