#include "mgpin/powerflow.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <fmt/format.h>

#include "mgpin/error.hpp"

namespace mgpin {

namespace {

using cd = std::complex<double>;

struct Layout {
  int m = 0;
  int n = 0;
  std::vector<int> theta_slot;  // per bus, -1 for the reference
  std::vector<int> vload_slot;  // per bus, -1 for DG buses

  explicit Layout(const NetworkModel& net) : m(net.dg_count()), n(net.bus_count) {
    theta_slot.assign(n, -1);
    vload_slot.assign(n, -1);
    int t = 0, v = 0;
    for (int b = 0; b < n; ++b) {
      if (b != net.reference_bus) theta_slot[b] = t++;
      if (!net.is_dg_bus(b)) vload_slot[b] = v++;
    }
  }
  int size() const { return 2 * n + m - 1; }
};

struct Evaluation {
  Eigen::VectorXcd v;       // bus phasors
  Eigen::VectorXcd s_cal;   // injection into the network at each bus
  Eigen::VectorXcd s_load;  // load demand at each bus
  Eigen::VectorXd p_g, q_g;
  double p_couple = 0.0, q_couple = 0.0;
  Eigen::VectorXd mismatch;
};

Eigen::VectorXcd phasors(const PfUnknowns& u, const NetworkModel& net, const Layout& lay, double v_ref) {
  Eigen::VectorXcd v(lay.n);
  for (int b = 0; b < lay.n; ++b) {
    const double mag = lay.vload_slot[b] < 0 ? v_ref : u.V_load(lay.vload_slot[b]);
    const double ang = lay.theta_slot[b] < 0 ? 0.0 : u.theta(lay.theta_slot[b]);
    v(b) = std::polar(mag, ang);
  }
  (void)net;
  return v;
}

Evaluation evaluate(const PfUnknowns& u, const NetworkModel& net, const PfSettings& st, const Layout& lay,
                    const Eigen::MatrixXcd& y) {
  Evaluation e;
  const int m = lay.m, n = lay.n;
  const double w = st.omega_ref;
  e.v = phasors(u, net, lay, st.V_ref);
  const Eigen::VectorXcd i_net = y * e.v;
  e.s_cal = e.v.cwiseProduct(i_net.conjugate());
  e.s_load = Eigen::VectorXcd::Zero(n);
  for (const auto& [bus, load] : net.loads) {
    const cd z(load.resistance, w * load.inductance);
    e.s_load(bus) = std::norm(e.v(bus)) / std::conj(z);
  }
  e.p_g.resize(m);
  e.q_g.resize(m);
  for (int k = 0; k < m; ++k) {
    e.p_g(k) = (u.omega_nl(k) - st.omega_ref) / net.dgs[k].mp;
    e.q_g(k) = (u.V_nl(k) - st.V_ref) / net.dgs[k].nq;
  }

  // Droop power is measured at the filter capacitor, so each DG also feeds
  // its coupling-branch loss.
  Eigen::VectorXd dp(n), dq(n);
  for (int b = 0; b < n; ++b) {
    const cd s_bus = e.s_cal(b) + e.s_load(b);
    dp(b) = -s_bus.real();
    dq(b) = -s_bus.imag();
  }
  for (int k = 0; k < m; ++k) {
    const int b = net.dg_buses[k];
    const cd s_bus = e.s_cal(b) + e.s_load(b);
    const double i2 = std::norm(s_bus) / std::norm(e.v(b));
    const double pc = net.dgs[k].lcl.rc * i2;
    const double qc = w * net.dgs[k].lcl.Lc * i2;
    e.p_couple += pc;
    e.q_couple += qc;
    dp(b) += e.p_g(k) - pc;
    dq(b) += e.q_g(k) - qc;
  }

  e.mismatch.resize(lay.size());
  const double p_loss = e.s_cal.real().sum() + e.p_couple;
  const double q_loss = e.s_cal.imag().sum() + e.q_couple;
  e.mismatch(0) = e.p_g.sum() - e.s_load.real().sum() - p_loss;
  e.mismatch(1) = e.q_g.sum() - e.s_load.imag().sum() - q_loss;
  int r = 2;
  for (int b = 0; b < n; ++b)
    if (b != net.reference_bus) e.mismatch(r++) = dp(b);
  for (int b = 0; b < n; ++b)
    if (b != net.reference_bus) e.mismatch(r++) = dq(b);
  for (int k = 1; k < m; ++k) e.mismatch(r++) = net.dgs[0].mp * e.p_g(0) - net.dgs[k].mp * e.p_g(k);
  if (!e.mismatch.allFinite()) throw NumericFailure("power-flow mismatch is not finite");
  return e;
}

struct Context {
  const NetworkModel& net;
  const PfSettings& st;
  Layout lay;
  Eigen::MatrixXcd y;

  Context(const NetworkModel& network, const PfSettings& settings)
      : net(network), st(settings), lay(network), y(build_admittance(network, settings.omega_ref)) {}

  Eigen::VectorXd f(const Eigen::VectorXd& w) const {
    return evaluate(unpack_unknowns(w, lay.m, lay.n), net, st, lay, y).mismatch;
  }
};

void check_settings(const PfSettings& s) {
  if (!(s.tolerance > 0.0)) throw InvalidArgument("power-flow tolerance must be > 0");
  if (s.max_iterations < 1) throw InvalidArgument("power-flow max_iterations must be >= 1");
  if (!(s.fd_step > 0.0)) throw InvalidArgument("power-flow fd_step must be > 0");
  if (!(s.omega_ref > 0.0) || !(s.V_ref > 0.0)) throw InvalidArgument("power-flow references must be > 0");
}

template <bool Parallel>
Eigen::MatrixXd central_fd(const Context& ctx, const Eigen::VectorXd& w, double step) {
  const long n = w.size();
  Eigen::MatrixXd jac(n, n);
  if constexpr (Parallel) {
#pragma omp parallel
    {
      Eigen::VectorXd wp = w;
#pragma omp for schedule(static)
      for (long j = 0; j < n; ++j) {
        wp(j) = w(j) + step;
        const Eigen::VectorXd fp = ctx.f(wp);
        wp(j) = w(j) - step;
        const Eigen::VectorXd fm = ctx.f(wp);
        wp(j) = w(j);
        jac.col(j) = (fp - fm) / (2.0 * step);
      }
    }
  } else {
    Eigen::VectorXd wp = w;
    for (long j = 0; j < n; ++j) {
      wp(j) = w(j) + step;
      const Eigen::VectorXd fp = ctx.f(wp);
      wp(j) = w(j) - step;
      const Eigen::VectorXd fm = ctx.f(wp);
      wp(j) = w(j);
      jac.col(j) = (fp - fm) / (2.0 * step);
    }
  }
  return jac;
}

}  // namespace

Eigen::VectorXd pack_unknowns(const PfUnknowns& u) {
  const long m = u.omega_nl.size();
  if (u.V_nl.size() != m) throw InvalidArgument("pack_unknowns: omega_nl and V_nl differ in length");
  Eigen::VectorXd w(m * 2 + u.theta.size() + u.V_load.size());
  w << u.omega_nl, u.V_nl, u.theta, u.V_load;
  return w;
}

PfUnknowns unpack_unknowns(const Eigen::VectorXd& w, int dg_count, int bus_count) {
  if (dg_count < 1 || bus_count < dg_count || w.size() != 2 * bus_count + dg_count - 1)
    throw InvalidArgument(fmt::format("unpack_unknowns: length {} does not match m = {}, N = {}", w.size(),
                                      dg_count, bus_count));
  PfUnknowns u;
  u.omega_nl = w.segment(0, dg_count);
  u.V_nl = w.segment(dg_count, dg_count);
  u.theta = w.segment(2 * dg_count, bus_count - 1);
  u.V_load = w.segment(2 * dg_count + bus_count - 1, bus_count - dg_count);
  return u;
}

PfUnknowns flat_start(const NetworkModel& network, const PfSettings& settings) {
  const int m = network.dg_count(), n = network.bus_count;
  PfUnknowns u;
  u.omega_nl = Eigen::VectorXd::Constant(m, settings.omega_ref);
  u.V_nl = Eigen::VectorXd::Constant(m, settings.V_ref);
  u.theta = Eigen::VectorXd::Zero(n - 1);
  u.V_load = Eigen::VectorXd::Constant(n - m, settings.V_ref);
  return u;
}

Eigen::VectorXcd bus_phasors(const PfUnknowns& u, const NetworkModel& network, const PfSettings& settings) {
  const Layout lay(network);
  if (u.theta.size() != lay.n - 1 || u.V_load.size() != lay.n - lay.m)
    throw InvalidArgument("bus_phasors: unknowns do not match the network");
  return phasors(u, network, lay, settings.V_ref);
}

Eigen::VectorXd mismatch(const PfUnknowns& u, const NetworkModel& network, const PfSettings& settings) {
  require_valid(network);
  const Context ctx(network, settings);
  return ctx.f(pack_unknowns(u));
}

Eigen::MatrixXd mismatch_jacobian(const Eigen::VectorXd& w, const NetworkModel& network,
                                  const PfSettings& settings, double step) {
  const Context ctx(network, settings);
  return central_fd<true>(ctx, w, step);
}

Eigen::MatrixXd mismatch_jacobian_serial(const Eigen::VectorXd& w, const NetworkModel& network,
                                         const PfSettings& settings, double step) {
  const Context ctx(network, settings);
  return central_fd<false>(ctx, w, step);
}

PowerFlowSolution solve_power_flow(const NetworkModel& network, const PfSettings& settings,
                                   const std::optional<PfUnknowns>& initial) {
  require_valid(network);
  check_settings(settings);
  const Context ctx(network, settings);
  Eigen::VectorXd w = pack_unknowns(initial ? *initial : flat_start(network, settings));
  if (w.size() != ctx.lay.size()) throw InvalidArgument("power-flow initial guess has the wrong length");

  auto newton_step = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& fx) {
    const Eigen::MatrixXd jac = central_fd<true>(ctx, x, settings.fd_step);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const double rcond = lu.rcond();
    if (!(rcond >= 1e-14)) throw SingularMatrix("power-flow Jacobian is singular", rcond);
    return Eigen::VectorXd(x - lu.solve(fx));
  };

  Eigen::VectorXd f = ctx.f(w);
  double norm = f.lpNorm<Eigen::Infinity>();
  int iterations = 0;
  int growth = 0;
  while (norm > settings.tolerance) {
    if (iterations >= settings.max_iterations)
      throw ConvergenceFailure("power flow did not converge", iterations, norm);
    w = newton_step(w, f);
    ++iterations;
    f = ctx.f(w);
    const double next = f.lpNorm<Eigen::Infinity>();
    growth = next > norm ? growth + 1 : 0;
    norm = next;
    if (growth >= 5) throw ConvergenceFailure("power flow is diverging", iterations, norm);
  }
  // One more step drives the residual to round-off; kept only if it helps.
  {
    const Eigen::VectorXd w2 = newton_step(w, f);
    const Eigen::VectorXd f2 = ctx.f(w2);
    if (f2.lpNorm<Eigen::Infinity>() < norm) {
      w = w2;
      f = f2;
      norm = f2.lpNorm<Eigen::Infinity>();
    }
  }

  PowerFlowSolution sol;
  sol.unknowns = unpack_unknowns(w, ctx.lay.m, ctx.lay.n);
  if ((sol.unknowns.V_nl.array() <= 0.0).any() || (sol.unknowns.V_load.array() <= 0.0).any())
    throw NumericFailure("power flow converged to a non-positive voltage");
  const Evaluation e = evaluate(sol.unknowns, network, settings, ctx.lay, ctx.y);
  sol.P_G = e.p_g;
  sol.Q_G = e.q_g;
  sol.P_loss = e.s_cal.real().sum() + e.p_couple;
  sol.Q_loss = e.s_cal.imag().sum() + e.q_couple;
  sol.P_load = e.s_load.real().sum();
  sol.Q_load = e.s_load.imag().sum();
  sol.iterations = iterations;
  sol.final_mismatch_norm = norm;
  sol.bus_voltage = e.v;
  sol.omega = settings.omega_ref;
  sol.V_ref = settings.V_ref;
  return sol;
}

namespace {

struct BusRow {
  double v, theta_deg, p, q;
  std::optional<double> v_nl;
};

std::vector<BusRow> bus_rows(const PowerFlowSolution& sol, const NetworkModel& net) {
  std::vector<BusRow> rows(static_cast<std::size_t>(net.bus_count));
  for (int b = 0; b < net.bus_count; ++b) {
    BusRow& r = rows[b];
    r.v = std::abs(sol.bus_voltage(b));
    r.theta_deg = std::arg(sol.bus_voltage(b)) * 180.0 / std::numbers::pi;
    r.p = 0.0;
    r.q = 0.0;
    if (auto it = net.loads.find(b); it != net.loads.end()) {
      const cd z(it->second.resistance, sol.omega * it->second.inductance);
      const cd s = std::norm(sol.bus_voltage(b)) / std::conj(z);
      r.p += s.real();
      r.q += s.imag();
    }
    if (auto k = net.dg_at_bus(b)) {
      r.p -= sol.P_G(*k);
      r.q -= sol.Q_G(*k);
      r.v_nl = sol.unknowns.V_nl(*k);
    }
  }
  return rows;
}

}  // namespace

std::string format_power_flow(const PowerFlowSolution& sol, const NetworkModel& network) {
  std::string s = fmt::format("{:>5} {:>9} {:>9} {:>10} {:>10} {:>9}\n", "bus", "V", "theta", "P", "Q", "V_nl");
  const auto rows = bus_rows(sol, network);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& r = rows[b];
    s += fmt::format("{:>5} {:>9.4f} {:>9.2f} {:>10.4f} {:>10.4f} {:>9}\n", b + 1, r.v, r.theta_deg, r.p, r.q,
                     r.v_nl ? fmt::format("{:.4f}", *r.v_nl) : std::string("---"));
  }
  s += fmt::format("system frequency = {:.4f}\n", sol.omega);
  s += fmt::format("omega_nl = {:.6f}\n", sol.unknowns.omega_nl.size() ? sol.unknowns.omega_nl(0) : sol.omega);
  s += fmt::format("P_load = {:.6f}, Q_load = {:.6f}\n", sol.P_load, sol.Q_load);
  s += fmt::format("P_loss = {:.6f}, Q_loss = {:.6f}\n", sol.P_loss, sol.Q_loss);
  s += fmt::format("iterations = {}\n", sol.iterations);
  s += fmt::format("mismatch = {:.3e}\n", sol.final_mismatch_norm);
  return s;
}

std::string format_power_flow_csv(const PowerFlowSolution& sol, const NetworkModel& network) {
  std::string s = "bus,V,theta_deg,P,Q,V_nl\n";
  const auto rows = bus_rows(sol, network);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& r = rows[b];
    s += fmt::format("{},{:.12g},{:.12g},{:.12g},{:.12g},{}\n", b + 1, r.v, r.theta_deg, r.p, r.q,
                     r.v_nl ? fmt::format("{:.12g}", *r.v_nl) : std::string());
  }
  return s;
}

}  // namespace mgpin
