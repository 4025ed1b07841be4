#include "mgpin/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mgpin/error.hpp"

namespace mgpin {

namespace {

constexpr cplx kJ{0.0, 1.0};

cplx pair_at(const Eigen::VectorXd& x, int i) { return {x(i), x(i + 1)}; }

void set_pair(Eigen::VectorXd& x, int i, cplx v) {
  x(i) = v.real();
  x(i + 1) = v.imag();
}

}  // namespace

StateLayout StateLayout::of(const NetworkModel& network) {
  StateLayout l;
  l.dg_count = network.dg_count();
  l.line_count = network.line_count();
  for (const auto& [bus, load] : network.loads) l.load_buses.push_back(bus);
  return l;
}

std::string StateLayout::name(int index) const {
  static const char* const kDgNames[kPerDg] = {"delta", "P",    "Q",    "phi_d", "phi_q", "gamma_d", "gamma_q",
                                               "ii_d",  "ii_q", "vo_d", "vo_q",  "io_d",  "io_q",    "omega_nl",
                                               "V_nl"};
  if (index < 0 || index >= size()) return "?";
  if (index < kPerDg * dg_count) return fmt::format("dg{}.{}", index / kPerDg + 1, kDgNames[index % kPerDg]);
  index -= kPerDg * dg_count;
  if (index < 2 * line_count) return fmt::format("line{}.{}", index / 2 + 1, index % 2 ? "Q" : "D");
  index -= 2 * line_count;
  return fmt::format("load{}.{}", load_buses[index / 2] + 1, index % 2 ? "Q" : "D");
}

DgState read_dg(const Eigen::VectorXd& x, const StateLayout& l, int k) {
  using S = StateLayout;
  DgState s;
  s.delta = x(l.dg(k, S::kDelta));
  s.P = x(l.dg(k, S::kP));
  s.Q = x(l.dg(k, S::kQ));
  s.phi = pair_at(x, l.dg(k, S::kPhiD));
  s.gamma = pair_at(x, l.dg(k, S::kGammaD));
  s.ii = pair_at(x, l.dg(k, S::kIiD));
  s.vo = pair_at(x, l.dg(k, S::kVoD));
  s.io = pair_at(x, l.dg(k, S::kIoD));
  s.omega_nl = x(l.dg(k, S::kOmegaNl));
  s.V_nl = x(l.dg(k, S::kVNl));
  return s;
}

void write_dg(Eigen::VectorXd& x, const StateLayout& l, int k, const DgState& s) {
  using S = StateLayout;
  x(l.dg(k, S::kDelta)) = s.delta;
  x(l.dg(k, S::kP)) = s.P;
  x(l.dg(k, S::kQ)) = s.Q;
  set_pair(x, l.dg(k, S::kPhiD), s.phi);
  set_pair(x, l.dg(k, S::kGammaD), s.gamma);
  set_pair(x, l.dg(k, S::kIiD), s.ii);
  set_pair(x, l.dg(k, S::kVoD), s.vo);
  set_pair(x, l.dg(k, S::kIoD), s.io);
  x(l.dg(k, S::kOmegaNl)) = s.omega_nl;
  x(l.dg(k, S::kVNl)) = s.V_nl;
}

PowerControllerOut power_controller_derivs(const DgState& s, const DgParams& p) {
  PowerControllerOut o;
  o.p_inst = s.io.real() * s.vo.real() + s.io.imag() * s.vo.imag();
  o.q_inst = s.io.real() * s.vo.imag() - s.io.imag() * s.vo.real();
  o.dP = p.omega_c * (o.p_inst - s.P);
  o.dQ = p.omega_c * (o.q_inst - s.Q);
  o.omega = s.omega_nl - p.mp * s.P;
  o.V = s.V_nl - p.nq * s.Q;
  // |vo_ref - (rc + j omega Lc) io| = V with vo_ref on the d axis.
  const double rc = p.lcl.rc, xc = o.omega * p.lcl.Lc;
  const double id = s.io.real(), iq = s.io.imag();
  const double perp = rc * iq + xc * id;
  o.vo_ref = cplx(rc * id - xc * iq + std::sqrt(std::max(0.0, o.V * o.V - perp * perp)), 0.0);
  return o;
}

InnerOut inner_controllers(const DgState& s, cplx vo_ref, const DgParams& p) {
  const auto& g = p.gains;
  const double cross = g.cross_coupling ? 1.0 : 0.0;
  InnerOut o;
  o.dphi = vo_ref - s.vo;
  o.ii_ref = g.KF * s.io + g.Kpv * o.dphi + g.Kiv * s.phi + cross * kJ * p.lcl.Cf * s.vo;
  o.dgamma = o.ii_ref - s.ii;
  o.vi = g.Kpc * o.dgamma + g.Kic * s.gamma + cross * kJ * p.lcl.Lf * s.ii;
  return o;
}

LclOut lcl_derivs(const DgState& s, cplx vi, cplx v_bus, const DgParams& p, double omega_k, double omega_base) {
  const auto& f = p.lcl;
  const cplx rot = -kJ * omega_base * omega_k;
  LclOut o;
  o.dii = omega_base / f.Lf * (vi - s.vo - f.rf * s.ii) + rot * s.ii;
  o.dvo = omega_base / f.Cf * (s.ii - s.io) + rot * s.vo;
  // The coupling branch drives current from the capacitor to the bus.
  o.dio = omega_base / f.Lc * (s.vo - v_bus - f.rc * s.io) + rot * s.io;
  return o;
}

void branch_load_derivs(const Eigen::VectorXd& x, const Eigen::VectorXcd& v_bus, const NetworkModel& net,
                        const StateLayout& l, double omega_com, Eigen::VectorXd& dx) {
  const double wb = net.bases.frequency_rad_s;
  const cplx rot = -kJ * wb * omega_com;
  for (int i = 0; i < net.line_count(); ++i) {
    const Line& ln = net.lines[i];
    const cplx cur = pair_at(x, l.line(i));
    const cplx d = wb / ln.inductance * (v_bus(ln.from_bus) - v_bus(ln.to_bus) - ln.resistance * cur) + rot * cur;
    set_pair(dx, l.line(i), d);
  }
  for (std::size_t i = 0; i < l.load_buses.size(); ++i) {
    const int bus = l.load_buses[i];
    const LoadRL& ld = net.loads.at(bus);
    const int at = l.load(static_cast<int>(i));
    const cplx cur = pair_at(x, at);
    set_pair(dx, at, wb / ld.inductance * (v_bus(bus) - ld.resistance * cur) + rot * cur);
  }
}

Eigen::VectorXcd node_voltages(const Eigen::VectorXd& x, const NetworkModel& net, const StateLayout& l) {
  if (!std::isfinite(net.virtual_resistance))
    throw InvalidArgument("dynamics needs a finite virtual resistance");
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(net.bus_count);
  for (int k = 0; k < l.dg_count; ++k) {
    const double delta = x(l.dg(k, StateLayout::kDelta));
    inj(net.dg_buses[k]) += pair_at(x, l.dg(k, StateLayout::kIoD)) * std::polar(1.0, delta);
  }
  for (std::size_t i = 0; i < l.load_buses.size(); ++i)
    inj(l.load_buses[i]) -= pair_at(x, l.load(static_cast<int>(i)));
  for (int i = 0; i < net.line_count(); ++i) {
    const cplx cur = pair_at(x, l.line(i));
    inj(net.lines[i].from_bus) -= cur;
    inj(net.lines[i].to_bus) += cur;
  }
  return net.virtual_resistance * inj;
}

MicrogridSystem::MicrogridSystem(NetworkModel net, CommGraph g, PinningSet p, ControlGains c)
    : network(std::move(net)), graph(std::move(g)), pins(std::move(p)), gains(c) {
  require_valid(network);
  if (graph.node_count() != network.dg_count())
    throw InvalidArgument(fmt::format("cyber graph has {} nodes but the network has {} DGs", graph.node_count(),
                                      network.dg_count()));
  if (pins.size() != network.dg_count()) throw InvalidArgument("pinning set size does not match the DG count");
  layout = StateLayout::of(network);
}

void system_derivs(const MicrogridSystem& sys, double /*t*/, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
  const auto& net = sys.network;
  const auto& l = sys.layout;
  if (x.size() != l.size()) throw InvalidArgument("system_derivs: state length mismatch");
  dx.resize(x.size());
  const int m = l.dg_count;
  const double wb = net.bases.frequency_rad_s;
  const Eigen::VectorXcd v_bus = node_voltages(x, net, l);

  std::vector<DgState> st(static_cast<std::size_t>(m));
  std::vector<PowerControllerOut> pc(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    st[k] = read_dg(x, l, k);
    pc[k] = power_controller_derivs(st[k], net.dgs[k]);
  }
  const int ref = net.reference_dg();
  const double omega_com = pc[ref].omega;

  std::vector<DgMeasurement> meas(static_cast<std::size_t>(m));
  std::vector<double> mp(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const DgParams& p = net.dgs[k];
    const InnerOut in = inner_controllers(st[k], pc[k].vo_ref, p);
    const cplx vb_local = v_bus(net.dg_buses[k]) * std::polar(1.0, -st[k].delta);
    const LclOut lc = lcl_derivs(st[k], in.vi, vb_local, p, pc[k].omega, wb);
    using S = StateLayout;
    dx(l.dg(k, S::kDelta)) = k == ref ? 0.0 : wb * (pc[k].omega - omega_com);
    dx(l.dg(k, S::kP)) = pc[k].dP;
    dx(l.dg(k, S::kQ)) = pc[k].dQ;
    set_pair(dx, l.dg(k, S::kPhiD), in.dphi);
    set_pair(dx, l.dg(k, S::kGammaD), in.dgamma);
    set_pair(dx, l.dg(k, S::kIiD), lc.dii);
    set_pair(dx, l.dg(k, S::kVoD), lc.dvo);
    set_pair(dx, l.dg(k, S::kIoD), lc.dio);
    meas[k] = DgMeasurement{pc[k].omega, pc[k].V, st[k].P};
    mp[k] = p.mp;
  }

  const auto rates = secondary_derivs(meas, mp, sys.graph, sys.pins, sys.gains);
  for (int k = 0; k < m; ++k) {
    dx(l.dg(k, StateLayout::kOmegaNl)) = rates[k].d_omega_nl;
    dx(l.dg(k, StateLayout::kVNl)) = rates[k].d_V_nl;
  }
  branch_load_derivs(x, v_bus, net, l, omega_com, dx);
}

Eigen::VectorXd system_derivs(const MicrogridSystem& sys, double t, const Eigen::VectorXd& x) {
  Eigen::VectorXd dx(x.size());
  system_derivs(sys, t, x, dx);
  return dx;
}

DgOutputs dg_outputs(const MicrogridSystem& sys, const Eigen::VectorXd& x) {
  const auto& net = sys.network;
  const Eigen::VectorXcd v_bus = node_voltages(x, net, sys.layout);
  DgOutputs o;
  for (int k = 0; k < net.dg_count(); ++k) {
    const DgState s = read_dg(x, sys.layout, k);
    const DgParams& p = net.dgs[k];
    o.omega.push_back(s.omega_nl - p.mp * s.P);
    o.V.push_back(std::abs(v_bus(net.dg_buses[k])));
    o.P.push_back(s.P);
    o.Q.push_back(s.Q);
    o.mpP.push_back(p.mp * s.P);
  }
  return o;
}

IntegrationResult integrate(MicrogridSystem& sys, const Eigen::VectorXd& x0, std::vector<TimedEvent> events,
                            const SimSettings& settings, const Sampler& sampler) {
  if (!(settings.t_end > 0.0)) throw InvalidArgument("simulation t_end must be > 0");
  if (!(settings.report_step > 0.0)) throw InvalidArgument("simulation report_step must be > 0");
  if (!(settings.max_step > 0.0)) throw InvalidArgument("simulation max_step must be > 0");
  if (x0.size() != sys.layout.size()) throw InvalidArgument("initial state length mismatch");
  std::stable_sort(events.begin(), events.end(), [](const TimedEvent& a, const TimedEvent& b) { return a.t < b.t; });
  for (const auto& e : events)
    if (!(e.t >= 0.0 && e.t <= settings.t_end)) throw InvalidArgument(fmt::format("event time {} outside run", e.t));

  ode::Options opt;
  opt.rel_tol = settings.rel_tol;
  opt.abs_tol = settings.abs_tol;
  opt.max_step = settings.max_step;

  IntegrationResult res;
  Eigen::VectorXd x = x0;
  double t = 0.0;
  long next = 0;  // reporting grid index; sample time = index * report_step
  const auto grid = [&](long i) { return static_cast<double>(i) * settings.report_step; };
  const auto tol_at = [](double tt) { return 1e-12 * std::max(1.0, std::abs(tt)); };
  const double t_end = settings.t_end;

  std::size_t ei = 0;
  while (true) {
    bool applied = false;
    while (ei < events.size() && events[ei].t <= t) {
      events[ei].apply(sys, events[ei].t);
      applied = true;
      ++ei;
    }
    bool sampled_now = false;
    while (grid(next) <= t + tol_at(t) && grid(next) <= t_end + tol_at(t_end)) {
      if (sampler) sampler(grid(next), x, sys);
      sampled_now = std::abs(grid(next) - t) <= tol_at(t);
      ++next;
    }
    if (applied && !sampled_now && sampler) sampler(t, x, sys);
    if (t >= t_end) break;

    const double t_stop = ei < events.size() ? std::min(events[ei].t, t_end) : t_end;
    const MicrogridSystem& csys = sys;
    ode::Bdf solver(
        [&csys](double tt, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { system_derivs(csys, tt, y, dy); }, t, x,
        t_stop, opt);
    while (!solver.finished()) {
      solver.step();
      const double t_hi = solver.t();
      // Points at t_stop are emitted after the segment, once events applied.
      while (true) {
        const double tg = grid(next);
        if (tg > t_end + tol_at(t_end) || tg >= t_stop - tol_at(t_stop)) break;
        if (tg > t_hi + tol_at(t_hi)) break;
        if (sampler) sampler(tg, std::abs(tg - t_hi) <= tol_at(t_hi) ? solver.y() : solver.dense(tg), sys);
        ++next;
      }
    }
    const auto& s = solver.stats();
    res.stats.steps += s.steps;
    res.stats.rejected += s.rejected;
    res.stats.rhs_evals += s.rhs_evals;
    res.stats.jacobian_evals += s.jacobian_evals;
    res.stats.lu_decompositions += s.lu_decompositions;
    res.stats.accumulated_error += s.accumulated_error;
    x = solver.y();
    t = t_stop;
  }
  res.final_state = x;
  return res;
}

Linearization linearize(const MicrogridSystem& sys, const Eigen::VectorXd& x_eq, double fd_step,
                        double max_residual) {
  const Eigen::VectorXd f0 = system_derivs(sys, 0.0, x_eq);
  Linearization lin;
  lin.residual = f0.lpNorm<Eigen::Infinity>();
  if (!(lin.residual <= max_residual)) {
    Eigen::Index worst = 0;
    f0.cwiseAbs().maxCoeff(&worst);
    throw InvalidArgument(fmt::format("linearize: not an equilibrium (|dx|_inf = {:.3e} at {})", lin.residual,
                                      sys.layout.name(static_cast<int>(worst))));
  }
  const int drop = sys.layout.dg(sys.network.reference_dg(), StateLayout::kDelta);
  const ode::Rhs rhs = [&sys](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { system_derivs(sys, t, y, dy); };
  const Eigen::MatrixXd full = ode::central_jacobian(rhs, 0.0, x_eq, fd_step);
  const int n = static_cast<int>(x_eq.size());
  for (int i = 0; i < n; ++i)
    if (i != drop) lin.kept.push_back(i);
  const int r = static_cast<int>(lin.kept.size());
  lin.A.resize(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) lin.A(i, j) = full(lin.kept[i], lin.kept[j]);
  Eigen::EigenSolver<Eigen::MatrixXd> es(lin.A, false);
  if (es.info() != Eigen::Success) throw NumericFailure("linearize: eigenvalue iteration failed");
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + r);
  std::stable_sort(ev.begin(), ev.end(), [](cplx a, cplx b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
  lin.eigenvalues = Eigen::Map<Eigen::VectorXcd>(ev.data(), r);
  return lin;
}

}  // namespace mgpin
