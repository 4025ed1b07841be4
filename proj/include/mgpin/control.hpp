#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mgpin/cybergraph.hpp"

namespace mgpin {

/// Secondary-control gains. C_v, C_omega and C_P are in 1/s.
struct ControlGains {
  double C_v = 30.0;
  double C_omega = 30.0;
  double C_P = 30.0;
  double c_gv = 1.0;
  double c_gomega = 1.0;
  double omega_ref = 1.0;
  double V_ref = 1.0;

  /// Identical gains on the frequency, voltage and sharing channels.
  static ControlGains uniform(double C, double c_pin, double omega_ref = 1.0, double V_ref = 1.0);
};

struct DgMeasurement {
  double omega = 1.0;  // inverter frequency, p.u.
  double V = 1.0;      // voltage magnitude command, p.u.
  double P = 0.0;      // filtered active power, p.u.
};

struct SetpointRates {
  double d_omega_nl = 0.0;
  double d_V_nl = 0.0;
};

/// Rates of the nominal setpoints: neighbour consensus plus pinning to the
/// references, plus droop-weighted active-power sharing on the frequency
/// channel. `mp` holds each DG's omega-P droop.
std::vector<SetpointRates> secondary_derivs(std::span<const DgMeasurement> meas, std::span<const double> mp,
                                            const CommGraph& g, const PinningSet& pins,
                                            const ControlGains& gains);

/// d(eps)/dt = -G_c (L + c_pin Psi) eps.
Eigen::VectorXd reduced_error_derivs(const Eigen::VectorXd& eps, const Eigen::MatrixXd& L,
                                     const PinningSet& pins, double G_c, double c_pin);

struct LyapunovReport {
  bool monotone = true;
  double max_violation = 0.0;  // largest sample-to-sample increase of 0.5 eps'eps
};

/// Checks that V = 0.5 eps'eps never increases between samples (tolerance
/// 1e-12 scaled by max(1, V(0))).
LyapunovReport lyapunov_check(std::span<const Eigen::VectorXd> trajectory);

}  // namespace mgpin
