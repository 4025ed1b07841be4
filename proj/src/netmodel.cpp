#include "mgpin/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/textio.hpp"

namespace mgpin {

LoadRL load_from_rated(double p, double q) {
  // S = |V|^2 / conj(Z) with |V| = 1  =>  Z = 1 / conj(S) = (p + jq) / |S|^2
  const double s2 = p * p + q * q;
  if (!(s2 > 0.0)) throw InvalidArgument("load with zero rated power has no R-L equivalent");
  return LoadRL{p / s2, q / s2};
}

std::complex<double> rated_power(const LoadRL& load, double omega) {
  const std::complex<double> z(load.resistance, omega * load.inductance);
  return 1.0 / std::conj(z);
}

std::optional<int> NetworkModel::dg_at_bus(int bus) const {
  for (int k = 0; k < dg_count(); ++k)
    if (dg_buses[k] == bus) return k;
  return std::nullopt;
}

int NetworkModel::reference_dg() const {
  auto k = dg_at_bus(reference_bus);
  if (!k) throw InvalidArgument("reference bus does not host a DG");
  return *k;
}

int electrical_component_count(const NetworkModel& network) {
  const int n = network.bus_count;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int count = n;
  for (const auto& l : network.lines) {
    if (l.from_bus < 0 || l.from_bus >= n || l.to_bus < 0 || l.to_bus >= n) continue;
    int a = find(l.from_bus);
    int b = find(l.to_bus);
    if (a != b) {
      parent[a] = b;
      --count;
    }
  }
  return count;
}

std::vector<Diagnostic> validate_model(const NetworkModel& net) {
  std::vector<Diagnostic> out;
  auto add = [&](std::string where, std::string msg) { out.push_back({std::move(where), std::move(msg)}); };
  const int n = net.bus_count;
  if (n <= 0) add("buses", "bus count must be positive");

  if (net.dg_buses.empty()) add("dg_buses", "at least one DG is required");
  if (net.dgs.size() != net.dg_buses.size())
    add("dgs", fmt::format("{} DG parameter records for {} DG buses", net.dgs.size(), net.dg_buses.size()));
  std::set<int> seen;
  for (int bus : net.dg_buses) {
    if (bus < 0 || bus >= n) add("dg_buses", fmt::format("DG bus {} out of range", bus + 1));
    if (!seen.insert(bus).second) add("dg_buses", fmt::format("duplicate DG bus {}", bus + 1));
  }
  if (!seen.count(net.reference_bus))
    add("reference_bus", fmt::format("reference bus {} does not host a DG", net.reference_bus + 1));

  for (std::size_t i = 0; i < net.lines.size(); ++i) {
    const auto& l = net.lines[i];
    const std::string where = fmt::format("line {} ({}-{})", i + 1, l.from_bus + 1, l.to_bus + 1);
    if (l.from_bus < 0 || l.from_bus >= n || l.to_bus < 0 || l.to_bus >= n)
      add(where, "endpoint out of range");
    if (l.from_bus == l.to_bus) add(where, "endpoints must differ");
    if (!(l.resistance >= 0.0)) add(where, "resistance must be >= 0");
    if (!(l.inductance > 0.0)) add(where, "inductance must be > 0");
  }
  if (n > 0 && electrical_component_count(net) != 1) add("lines", "electrical graph is not connected");

  for (const auto& [bus, load] : net.loads) {
    const std::string where = fmt::format("load at bus {}", bus + 1);
    if (bus < 0 || bus >= n) add(where, "bus out of range");
    if (!(load.resistance > 0.0)) add(where, "resistance must be > 0");
    if (!(load.inductance > 0.0)) add(where, "inductance must be > 0");
  }

  for (std::size_t k = 0; k < net.dgs.size(); ++k) {
    const auto& d = net.dgs[k];
    const std::string where = fmt::format("dg {}", k + 1);
    if (!(d.mp > 0.0)) add(where, "mp must be > 0");
    if (!(d.nq > 0.0)) add(where, "nq must be > 0");
    if (!(d.lcl.Lf > 0 && d.lcl.rf > 0 && d.lcl.Cf > 0 && d.lcl.Lc > 0 && d.lcl.rc > 0))
      add(where, "all LCL values must be > 0");
    if (!(d.omega_c > 0.0)) add(where, "omega_c must be > 0");
  }

  if (!(net.virtual_resistance > 0.0)) add("virtual_resistance", "must be > 0");
  if (!(net.bases.power_va > 0 && net.bases.voltage_v > 0 && net.bases.frequency_rad_s > 0))
    add("bases", "all base quantities must be > 0");
  return out;
}

void require_valid(const NetworkModel& network) {
  const auto diags = validate_model(network);
  if (diags.empty()) return;
  std::string msg = "invalid network model:";
  for (const auto& d : diags) msg += "\n  " + d.where + ": " + d.message;
  throw InvalidArgument(msg);
}

Eigen::MatrixXcd build_admittance(const NetworkModel& network, double omega) {
  if (!(omega > 0.0)) throw InvalidArgument("build_admittance: omega must be > 0");
  if (electrical_component_count(network) != 1)
    throw InvalidArgument("build_admittance: electrical graph is not connected");
  const int n = network.bus_count;
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& l : network.lines) {
    const std::complex<double> yb = 1.0 / std::complex<double>(l.resistance, omega * l.inductance);
    y(l.from_bus, l.to_bus) -= yb;
    y(l.to_bus, l.from_bus) -= yb;
    y(l.from_bus, l.from_bus) += yb;
    y(l.to_bus, l.to_bus) += yb;
  }
  if (std::isfinite(network.virtual_resistance)) {
    const double g = 1.0 / network.virtual_resistance;
    for (int k = 0; k < n; ++k) y(k, k) += g;
  }
  return y;
}

PowerPair aggregate_load(const NetworkModel& network) {
  PowerPair total;
  for (const auto& [bus, load] : network.loads) {
    const auto s = rated_power(load);
    total.p += s.real();
    total.q += s.imag();
  }
  return total;
}

void scale_loads(NetworkModel& network, const NetworkModel& base, const std::vector<int>& buses,
                 double factor) {
  if (!(factor > 0.0)) throw InvalidArgument("load scale factor must be > 0");
  for (int bus : buses) {
    auto it = base.loads.find(bus);
    if (it == base.loads.end()) throw InvalidArgument(fmt::format("no load at bus {}", bus + 1));
    network.loads[bus] = LoadRL{it->second.resistance / factor, it->second.inductance / factor};
  }
}

namespace {

int bus_index(const std::string& tok, int bus_count, const std::string& what) {
  const int b = textio::to_int(tok);
  if (b < 1 || b > bus_count) throw ParseError(fmt::format("{}: bus {} out of range 1..{}", what, b, bus_count));
  return b - 1;
}

}  // namespace

NetworkModel parse_network(std::string_view text, const std::filesystem::path& source) {
  const auto doc = textio::parse(text, source);
  NetworkModel net;

  const auto& bases = doc.require("bases");
  net.bases.power_va = bases.get_double("power");
  net.bases.voltage_v = bases.get_double("voltage");
  net.bases.frequency_rad_s = bases.get_double("frequency");

  const auto& buses = doc.require("buses");
  net.bus_count = buses.get_int("count");
  net.virtual_resistance = buses.get_double("virtual_resistance", 1000.0);
  net.reference_bus = bus_index(buses.get("reference"), net.bus_count, "[buses] reference");

  const auto& lines = doc.require("lines");
  for (std::size_t i = 0; i < lines.rows.size(); ++i) {
    const auto& r = lines.rows[i];
    const std::string where = fmt::format("{}:{}", source.string(), lines.row_lines[i]);
    if (r.size() != 4) throw ParseError(where + ": expected 'from to R L'");
    net.lines.push_back(Line{bus_index(r[0], net.bus_count, where), bus_index(r[1], net.bus_count, where),
                             textio::to_double(r[2]), textio::to_double(r[3])});
  }

  if (const auto* loads = doc.find("loads")) {
    for (std::size_t i = 0; i < loads->rows.size(); ++i) {
      const auto& r = loads->rows[i];
      const std::string where = fmt::format("{}:{}", source.string(), loads->row_lines[i]);
      if (r.size() != 3) throw ParseError(where + ": expected 'bus P Q'");
      const int bus = bus_index(r[0], net.bus_count, where);
      if (net.loads.count(bus)) throw ParseError(where + ": duplicate load bus");
      net.loads[bus] = load_from_rated(textio::to_double(r[1]), textio::to_double(r[2]));
    }
  }

  const auto& dgs = doc.require("dgs");
  DgParams shared;
  shared.lcl = LclFilter{dgs.get_double("Lf"), dgs.get_double("rf"), dgs.get_double("Cf"),
                         dgs.get_double("Lc"), dgs.get_double("rc")};
  shared.omega_c = dgs.get_double("omega_c");
  shared.gains = InnerLoopGains{dgs.get_double("Kpv"), dgs.get_double("Kiv"), dgs.get_double("Kpc"),
                                dgs.get_double("Kic"), dgs.get_double("KF"),
                                dgs.get_int("cross_coupling", 1) != 0};
  for (std::size_t i = 0; i < dgs.rows.size(); ++i) {
    const auto& r = dgs.rows[i];
    const std::string where = fmt::format("{}:{}", source.string(), dgs.row_lines[i]);
    if (r.size() != 3) throw ParseError(where + ": expected 'bus mp nq'");
    DgParams p = shared;
    p.mp = textio::to_double(r[1]);
    p.nq = textio::to_double(r[2]);
    net.dg_buses.push_back(bus_index(r[0], net.bus_count, where));
    net.dgs.push_back(p);
  }
  return net;
}

NetworkModel read_network(const std::filesystem::path& path) {
  return parse_network(textio::read_file(path), path);
}

}  // namespace mgpin
