#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mgpin/control.hpp"
#include "mgpin/cybergraph.hpp"
#include "mgpin/netmodel.hpp"
#include "mgpin/ode.hpp"
#include "mgpin/powerflow.hpp"

namespace mgpin {

using cplx = std::complex<double>;

/// Flat state layout. DG k occupies 15 consecutive slots starting at 15k, in
/// the order of DgSlot; then two slots (D, Q) per line in network order; then
/// two per load in ascending bus order. dq pairs are adjacent (d first).
struct StateLayout {
  enum DgSlot {
    kDelta = 0,
    kP,
    kQ,
    kPhiD,
    kPhiQ,
    kGammaD,
    kGammaQ,
    kIiD,
    kIiQ,
    kVoD,
    kVoQ,
    kIoD,
    kIoQ,
    kOmegaNl,
    kVNl,
  };
  static constexpr int kPerDg = 15;

  int dg_count = 0;
  int line_count = 0;
  std::vector<int> load_buses;

  static StateLayout of(const NetworkModel& network);
  int size() const { return kPerDg * dg_count + 2 * line_count + 2 * static_cast<int>(load_buses.size()); }
  int dg(int k, int slot) const { return kPerDg * k + slot; }
  int line(int l) const { return kPerDg * dg_count + 2 * l; }
  int load(int i) const { return kPerDg * dg_count + 2 * line_count + 2 * i; }
  /// Human-readable name of a flat index, e.g. "dg3.vo_d" or "line7.Q".
  std::string name(int index) const;
};

/// One DG's slice of the state, dq pairs as complex numbers (d + jq).
struct DgState {
  double delta = 0.0;
  double P = 0.0;
  double Q = 0.0;
  cplx phi, gamma, ii, vo, io;
  double omega_nl = 1.0;
  double V_nl = 1.0;
};

DgState read_dg(const Eigen::VectorXd& x, const StateLayout& layout, int k);
void write_dg(Eigen::VectorXd& x, const StateLayout& layout, int k, const DgState& s);

struct PowerControllerOut {
  double p_inst = 0.0;
  double q_inst = 0.0;
  double dP = 0.0;  // 1/s
  double dQ = 0.0;
  double omega = 1.0;  // droop frequency, p.u.
  double V = 1.0;      // droop voltage command, p.u.
  cplx vo_ref;         // capacitor-voltage reference, local frame
};

/// Power measurement, low-pass filter and droop. The d-axis reference is the
/// capacitor voltage that puts V on the bus side of the coupling branch.
PowerControllerOut power_controller_derivs(const DgState& s, const DgParams& p);

struct InnerOut {
  cplx dphi;
  cplx dgamma;
  cplx ii_ref;
  cplx vi;
};

/// Voltage and current PI loops with output-current feed-forward. The
/// decoupling terms use nominal frequency (1 p.u.).
InnerOut inner_controllers(const DgState& s, cplx vo_ref, const DgParams& p);

struct LclOut {
  cplx dii;
  cplx dvo;
  cplx dio;
};

/// LCL filter in the DG frame rotating at omega_k; derivatives in 1/s.
LclOut lcl_derivs(const DgState& s, cplx vi, cplx v_bus, const DgParams& p, double omega_k, double omega_base);

/// Line (from - to) and load R-L currents in the common frame rotating at
/// omega_com. Writes into the line and load slots of `dx`.
void branch_load_derivs(const Eigen::VectorXd& x, const Eigen::VectorXcd& v_bus, const NetworkModel& network,
                        const StateLayout& layout, double omega_com, Eigen::VectorXd& dx);

/// Bus voltages in the common frame: R_N times the net current into each
/// bus. Rejects an infinite virtual resistance.
Eigen::VectorXcd node_voltages(const Eigen::VectorXd& x, const NetworkModel& network, const StateLayout& layout);

/// Physical network plus cyber layer and secondary control settings.
struct MicrogridSystem {
  NetworkModel network;
  CommGraph graph;
  PinningSet pins;
  ControlGains gains;
  StateLayout layout;

  MicrogridSystem(NetworkModel net, CommGraph g, PinningSet p, ControlGains c);
};

/// Full right-hand side. Pure and reentrant.
void system_derivs(const MicrogridSystem& sys, double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx);
Eigen::VectorXd system_derivs(const MicrogridSystem& sys, double t, const Eigen::VectorXd& x);

/// Measured quantities per DG at a state.
struct DgOutputs {
  std::vector<double> omega;  // droop frequency
  std::vector<double> V;      // bus voltage magnitude
  std::vector<double> P;      // filtered active power
  std::vector<double> Q;
  std::vector<double> mpP;
};
DgOutputs dg_outputs(const MicrogridSystem& sys, const Eigen::VectorXd& x);

struct SimSettings {
  double rel_tol = 1e-6;
  double abs_tol = 1e-8;
  double max_step = 0.01;
  double t_end = 1.0;
  double report_step = 1e-3;
};

/// A model change applied at time t before integration restarts.
struct TimedEvent {
  double t = 0.0;
  std::function<void(MicrogridSystem&, double t)> apply;
};

/// Called on the reporting grid and at every event instant (after the event
/// is applied).
using Sampler = std::function<void(double t, const Eigen::VectorXd& x, const MicrogridSystem& sys)>;

struct IntegrationResult {
  Eigen::VectorXd final_state;
  ode::Stats stats;  // summed over the segments between events
};

/// Integrates from t = 0 to settings.t_end, restarting at each event.
IntegrationResult integrate(MicrogridSystem& sys, const Eigen::VectorXd& x0, std::vector<TimedEvent> events,
                            const SimSettings& settings, const Sampler& sampler = {});

struct Linearization {
  Eigen::MatrixXd A;              // reference-DG angle removed
  Eigen::VectorXcd eigenvalues;   // sorted by real part, ascending
  std::vector<int> kept;          // flat index of each row/column of A
  double residual = 0.0;          // ||dx||_inf at the linearization point
};

/// Central-difference state matrix at an equilibrium. The reference DG's
/// angle is a constant state (derivative forced to zero) and is dropped.
Linearization linearize(const MicrogridSystem& sys, const Eigen::VectorXd& x_eq, double fd_step = 1e-6,
                        double max_residual = 1e-5);

/// Equilibrium state reproducing a converged power flow: DG output currents
/// from the solution, network currents and voltages from the linear network
/// with R_N and the load branches, inverter internals by inverting the
/// filter and controller equations.
Eigen::VectorXd extract_steady_state(const PowerFlowSolution& sol, const NetworkModel& network);

}  // namespace mgpin
