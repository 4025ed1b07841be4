#include "mgpin/control.hpp"

#include <algorithm>

#include "mgpin/error.hpp"

namespace mgpin {

ControlGains ControlGains::uniform(double C, double c_pin, double omega_ref, double V_ref) {
  if (!(C > 0.0) || !(c_pin > 0.0)) throw InvalidArgument("control gains must be > 0");
  return ControlGains{C, C, C, c_pin, c_pin, omega_ref, V_ref};
}

std::vector<SetpointRates> secondary_derivs(std::span<const DgMeasurement> meas, std::span<const double> mp,
                                            const CommGraph& g, const PinningSet& pins,
                                            const ControlGains& gains) {
  const int m = g.node_count();
  if (static_cast<int>(meas.size()) != m || static_cast<int>(mp.size()) != m || pins.size() != m)
    throw InvalidArgument("secondary_derivs: dimension mismatch");

  std::vector<double> v_cons(m, 0.0), w_cons(m, 0.0), share(m, 0.0);
  for (const auto& [j, k] : g.edges()) {
    const double dv = meas[j].V - meas[k].V;
    const double dw = meas[j].omega - meas[k].omega;
    // Sign chosen so differences in mp*P shrink.
    const double ds = mp[j] * meas[j].P - mp[k] * meas[k].P;
    v_cons[k] += dv;
    v_cons[j] -= dv;
    w_cons[k] += dw;
    w_cons[j] -= dw;
    share[k] += ds;
    share[j] -= ds;
  }

  std::vector<SetpointRates> out(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const double psi = pins.pinned(k) ? 1.0 : 0.0;
    out[k].d_V_nl = gains.C_v * (v_cons[k] + psi * gains.c_gv * (gains.V_ref - meas[k].V));
    out[k].d_omega_nl = gains.C_omega * (w_cons[k] + psi * gains.c_gomega * (gains.omega_ref - meas[k].omega)) +
                        gains.C_P * share[k];
  }
  return out;
}

Eigen::VectorXd reduced_error_derivs(const Eigen::VectorXd& eps, const Eigen::MatrixXd& L,
                                     const PinningSet& pins, double G_c, double c_pin) {
  if (L.rows() != eps.size() || L.cols() != eps.size() || pins.size() != eps.size())
    throw InvalidArgument("reduced_error_derivs: dimension mismatch");
  return -G_c * (L * eps + c_pin * pins.diagonal().cwiseProduct(eps));
}

LyapunovReport lyapunov_check(std::span<const Eigen::VectorXd> trajectory) {
  LyapunovReport r;
  if (trajectory.empty()) return r;
  const double v0 = 0.5 * trajectory.front().squaredNorm();
  const double tol = 1e-12 * std::max(1.0, v0);
  double prev = v0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const double v = 0.5 * trajectory[i].squaredNorm();
    r.max_violation = std::max(r.max_violation, v - prev);
    prev = v;
  }
  r.monotone = r.max_violation <= tol;
  return r;
}

}  // namespace mgpin
