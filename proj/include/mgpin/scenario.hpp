#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mgpin/dynamics.hpp"
#include "mgpin/pindecide.hpp"

namespace mgpin {

struct ScenarioEvent {
  enum class Kind { LoadScale, CutEdges, Repin };
  double t = 0.0;
  Kind kind = Kind::LoadScale;
  std::vector<int> buses;   // load_scale, 0-based
  double factor = 1.0;      // load_scale, relative to the base case
  std::vector<Edge> edges;  // cut_edges, 0-based
};

const char* event_kind_name(ScenarioEvent::Kind kind);

enum class PinningMode { Fixed, Ga, Learned };

struct Scenario {
  std::filesystem::path source;
  std::filesystem::path network_file;
  // [cyber]: either a graph file or a seeded small-world draw
  std::filesystem::path cyber_file;
  int small_world_degree = 0;
  double small_world_rewire = 0.2;
  // [gains]
  double C = 30.0;
  double c_pin = 1.0;
  double rho_star = 10.0;
  double omega_ref = 1.0;
  double V_ref = 1.0;
  // [pinning]
  PinningMode mode = PinningMode::Fixed;
  std::vector<int> fixed_pins;  // 0-based
  std::filesystem::path model_file;
  GaParams ga;
  // [events], sorted by t
  std::vector<ScenarioEvent> events;
  // [sim]
  SimSettings sim;
  std::uint64_t seed = 1;
};

/// Sectioned scenario text. Paths are resolved against `source`'s directory.
///
///   [network]  file = desk4.net
///   [cyber]    file = g.graph | small_world = 4, rewire = 0.2
///   [gains]    C = 30, c_pin = 1, rho_star = 10, omega_ref = 1, V_ref = 1
///   [pinning]  mode = fixed|ga|learned, pins = 1 3, model = m.txt
///   [events]   rows `t load_scale 2-10 0.5`, `t cut_edges 1-3 2-4`, `t repin`
///   [sim]      t_end, rel_tol, abs_tol, max_step, report_step, seed
Scenario parse_scenario(std::string_view text, const std::filesystem::path& source = {});
Scenario read_scenario(const std::filesystem::path& path);

struct DecisionRecord {
  double t = 0.0;
  std::string trigger;  // "initial", "cut_edges", "repin"
  PinningProblem problem;
  PinningDecision decision;
};

struct RunResult {
  PowerFlowSolution powerflow;
  std::vector<DecisionRecord> decisions;
  Eigen::VectorXd final_state;
  ode::Stats stats;
  std::string summary;
};

/// Power flow, steady state, then integration with the scenario events.
/// Writes powerflow.txt, powerflow.csv, timeseries.csv, events.csv,
/// decisions.txt, run.txt and summary.txt into `out_dir`, each atomically.
RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

/// Summary of a finished run directory: per-event settle times, maximum
/// deviations, final m_p P spread and the cyber-event rate lines.
std::string report(const std::filesystem::path& out_dir);

}  // namespace mgpin
