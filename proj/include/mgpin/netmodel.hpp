#pragma once

#include <complex>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mgpin {

// Physical layer of the microgrid. Every quantity crossing a module boundary
// is per-unit on the system base; inductances and capacitances are stored as
// their reactance/susceptance at base frequency, so a time derivative in
// seconds picks up a factor of the base frequency (rad/s).

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;
  double inductance = 0.0;
};

struct LoadRL {
  double resistance = 0.0;
  double inductance = 0.0;
};

/// Series R-L load drawing `p + jq` at 1 p.u. voltage and frequency.
LoadRL load_from_rated(double p, double q);

/// Power drawn by `load` at |V| = 1 p.u. and frequency `omega` (p.u.).
std::complex<double> rated_power(const LoadRL& load, double omega = 1.0);

struct LclFilter {
  double Lf = 0.0;
  double rf = 0.0;
  double Cf = 0.0;
  double Lc = 0.0;
  double rc = 0.0;
};

struct InnerLoopGains {
  double Kpv = 0.0;
  double Kiv = 0.0;
  double Kpc = 0.0;
  double Kic = 0.0;
  double KF = 0.0;
  bool cross_coupling = true;
};

struct DgParams {
  double mp = 0.0;       // omega-P droop, p.u. frequency per p.u. power
  double nq = 0.0;       // V-Q droop, p.u. voltage per p.u. reactive power
  LclFilter lcl;
  double omega_c = 0.0;  // power-measurement low-pass cutoff, rad/s
  InnerLoopGains gains;
};

struct Bases {
  double power_va = 1.0e6;
  double voltage_v = 12.66e3;
  double frequency_rad_s = 314.1592653589793;
};

inline constexpr double kInfiniteResistance = std::numeric_limits<double>::infinity();

struct NetworkModel {
  int bus_count = 0;
  std::vector<int> dg_buses;       // bus hosting DG k
  std::vector<DgParams> dgs;       // parameters of DG k
  std::vector<Line> lines;
  std::map<int, LoadRL> loads;     // bus -> load
  Bases bases;
  double virtual_resistance = 1000.0;
  int reference_bus = 0;

  int dg_count() const { return static_cast<int>(dg_buses.size()); }
  int line_count() const { return static_cast<int>(lines.size()); }
  int load_count() const { return static_cast<int>(loads.size()); }
  std::optional<int> dg_at_bus(int bus) const;
  int reference_dg() const;
  bool is_dg_bus(int bus) const { return dg_at_bus(bus).has_value(); }
};

struct Diagnostic {
  std::string where;    // e.g. "line 4 (3-7)", "dg_buses"
  std::string message;
};

/// Checks every model invariant and returns one entry per violation.
std::vector<Diagnostic> validate_model(const NetworkModel& network);

/// Throws InvalidArgument listing all diagnostics when the model is invalid.
void require_valid(const NetworkModel& network);

/// Connected components of the electrical graph (lines only).
int electrical_component_count(const NetworkModel& network);

/// Bus admittance matrix at frequency `omega` (p.u.): line branches plus a
/// 1/R_N shunt on every node. Loads are not stamped.
Eigen::MatrixXcd build_admittance(const NetworkModel& network, double omega);

struct PowerPair {
  double p = 0.0;
  double q = 0.0;
};

/// Sum of rated load powers at nominal voltage and frequency.
PowerPair aggregate_load(const NetworkModel& network);

/// Scales the load at each listed bus to `factor` times its power in `base`.
void scale_loads(NetworkModel& network, const NetworkModel& base, const std::vector<int>& buses,
                 double factor);

/// Network description file. Bus indices in the file are 1-based.
NetworkModel read_network(const std::filesystem::path& path);
NetworkModel parse_network(std::string_view text, const std::filesystem::path& source = {});

}  // namespace mgpin
