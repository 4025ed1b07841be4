#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "mgpin/netmodel.hpp"

namespace mgpin {

/// Power-flow unknowns. `theta` covers every bus except the reference, in
/// ascending bus order; `V_load` covers every non-DG bus, ascending.
struct PfUnknowns {
  Eigen::VectorXd omega_nl;
  Eigen::VectorXd V_nl;
  Eigen::VectorXd theta;
  Eigen::VectorXd V_load;
};

/// Flat layout [omega_nl | V_nl | theta | V_load], length 2N + m - 1.
Eigen::VectorXd pack_unknowns(const PfUnknowns& u);
PfUnknowns unpack_unknowns(const Eigen::VectorXd& w, int dg_count, int bus_count);

struct PfSettings {
  double tolerance = 1e-8;
  int max_iterations = 50;
  double fd_step = 1e-6;
  double omega_ref = 1.0;
  double V_ref = 1.0;
};

struct PowerFlowSolution {
  PfUnknowns unknowns;
  Eigen::VectorXd P_G;  // droop injections at the filter capacitor, per DG
  Eigen::VectorXd Q_G;
  double P_loss = 0.0;  // network, shunt and coupling-branch losses
  double Q_loss = 0.0;
  double P_load = 0.0;  // consumed by the R-L loads at the solved voltages
  double Q_load = 0.0;
  int iterations = 0;
  double final_mismatch_norm = 0.0;
  Eigen::VectorXcd bus_voltage;  // all buses, reference angle 0
  double omega = 1.0;            // system frequency the solution holds
  double V_ref = 1.0;
};

/// Flat start: omega_nl = omega_ref, V_nl = V_ref, theta = 0, V_load = V_ref.
PfUnknowns flat_start(const NetworkModel& network, const PfSettings& settings);

/// Bus voltage phasors implied by the unknowns (DG buses held at V_ref).
Eigen::VectorXcd bus_phasors(const PfUnknowns& u, const NetworkModel& network, const PfSettings& settings);

/// [dP_a | dQ_a | dP (N-1) | dQ (N-1) | dTheta (m-1)]. Specified minus
/// computed, so zero at a solution.
Eigen::VectorXd mismatch(const PfUnknowns& u, const NetworkModel& network, const PfSettings& settings);

/// Central-difference Jacobian of the packed mismatch; columns in parallel.
Eigen::MatrixXd mismatch_jacobian(const Eigen::VectorXd& w, const NetworkModel& network,
                                  const PfSettings& settings, double step);
/// Single-threaded reference for mismatch_jacobian.
Eigen::MatrixXd mismatch_jacobian_serial(const Eigen::VectorXd& w, const NetworkModel& network,
                                         const PfSettings& settings, double step);

PowerFlowSolution solve_power_flow(const NetworkModel& network, const PfSettings& settings,
                                   const std::optional<PfUnknowns>& initial = std::nullopt);

/// Text table (bus, V, theta in degrees, P, Q, V_nl) and the same as CSV.
/// P and Q are positive for load, negative for generation.
std::string format_power_flow(const PowerFlowSolution& sol, const NetworkModel& network);
std::string format_power_flow_csv(const PowerFlowSolution& sol, const NetworkModel& network);

}  // namespace mgpin
