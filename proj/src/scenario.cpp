#include "mgpin/scenario.hpp"

#include <algorithm>
#include <iterator>
#include <memory>

#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/pinlearn.hpp"
#include "mgpin/textio.hpp"

namespace mgpin {

const char* event_kind_name(ScenarioEvent::Kind kind) {
  switch (kind) {
    case ScenarioEvent::Kind::LoadScale:
      return "load_scale";
    case ScenarioEvent::Kind::CutEdges:
      return "cut_edges";
    case ScenarioEvent::Kind::Repin:
      return "repin";
  }
  return "?";
}

namespace {

// "2-10", "3", "2,4,7-9" (1-based) to 0-based bus indices.
std::vector<int> parse_bus_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : textio::split(text, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(textio::to_int(part) - 1);
      continue;
    }
    const int lo = textio::to_int(part.substr(0, dash));
    const int hi = textio::to_int(part.substr(dash + 1));
    if (hi < lo) throw ParseError("bus range '" + part + "' is reversed");
    for (int b = lo; b <= hi; ++b) out.push_back(b - 1);
  }
  return out;
}

std::string format_bus_list(const std::vector<int>& buses) {
  std::string s;
  for (int b : buses) s += (s.empty() ? "" : " ") + std::to_string(b + 1);
  return s;
}

std::filesystem::path resolve(const std::filesystem::path& source, const std::string& file) {
  const std::filesystem::path p(file);
  if (p.is_absolute() || source.empty()) return p;
  return source.parent_path() / p;
}

std::string where(const std::filesystem::path& source, int line) {
  return fmt::format("{}:{}", source.empty() ? "<scenario>" : source.string(), line);
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& source) {
  const textio::Document doc = textio::parse(text, source);
  Scenario s;
  s.source = source;

  s.network_file = resolve(source, doc.require("network").get("file"));

  const textio::Section& cyber = doc.require("cyber");
  if (cyber.has("file")) {
    s.cyber_file = resolve(source, cyber.get("file"));
  } else if (cyber.has("small_world")) {
    s.small_world_degree = cyber.get_int("small_world");
    s.small_world_rewire = cyber.get_double("rewire", 0.2);
    if (s.small_world_degree < 2) throw ParseError("[cyber] small_world degree must be >= 2");
  } else {
    throw ParseError("[cyber] needs `file` or `small_world`");
  }

  if (const auto* g = doc.find("gains")) {
    s.C = g->get_double("C", s.C);
    s.c_pin = g->get_double("c_pin", s.c_pin);
    s.rho_star = g->get_double("rho_star", s.rho_star);
    s.omega_ref = g->get_double("omega_ref", s.omega_ref);
    s.V_ref = g->get_double("V_ref", s.V_ref);
  }
  if (!(s.C > 0.0) || !(s.c_pin > 0.0) || !(s.rho_star >= 0.0))
    throw ParseError("[gains] C and c_pin must be positive, rho_star non-negative");

  if (const auto* p = doc.find("pinning")) {
    const std::string mode = p->get_string("mode", "fixed");
    if (mode == "fixed") {
      s.mode = PinningMode::Fixed;
      for (const auto& tok : textio::split(p->get("pins"), ' '))
        if (!tok.empty()) s.fixed_pins.push_back(textio::to_int(tok) - 1);
    } else if (mode == "ga") {
      s.mode = PinningMode::Ga;
    } else if (mode == "learned") {
      s.mode = PinningMode::Learned;
      s.model_file = resolve(source, p->get("model"));
    } else {
      throw ParseError("[pinning] unknown mode '" + mode + "'");
    }
    s.ga.population = p->get_int("ga_population", s.ga.population);
    s.ga.generations = p->get_int("ga_generations", s.ga.generations);
  } else {
    throw ParseError("missing section [pinning]");
  }

  if (const auto* sim = doc.find("sim")) {
    s.sim.t_end = sim->get_double("t_end", s.sim.t_end);
    s.sim.rel_tol = sim->get_double("rel_tol", s.sim.rel_tol);
    s.sim.abs_tol = sim->get_double("abs_tol", s.sim.abs_tol);
    s.sim.max_step = sim->get_double("max_step", s.sim.max_step);
    s.sim.report_step = sim->get_double("report_step", s.sim.report_step);
    if (sim->has("seed")) s.seed = std::stoull(sim->get("seed"));
  }
  if (!(s.sim.t_end > 0.0) || !(s.sim.report_step > 0.0) || !(s.sim.rel_tol > 0.0) || !(s.sim.abs_tol > 0.0))
    throw ParseError("[sim] t_end, report_step and tolerances must be positive");

  if (const auto* ev = doc.find("events")) {
    for (std::size_t r = 0; r < ev->rows.size(); ++r) {
      const auto& row = ev->rows[r];
      const std::string at = where(source, ev->row_lines[r]);
      if (row.size() < 2) throw ParseError(at + ": event needs a time and a kind");
      ScenarioEvent e;
      e.t = textio::to_double(row[0]);
      const std::string& kind = row[1];
      if (kind == "load_scale") {
        if (row.size() != 4) throw ParseError(at + ": load_scale takes <buses> <factor>");
        e.kind = ScenarioEvent::Kind::LoadScale;
        e.buses = parse_bus_list(row[2]);
        e.factor = textio::to_double(row[3]);
        if (!(e.factor > 0.0)) throw ParseError(at + ": load factor must be positive");
      } else if (kind == "cut_edges") {
        if (row.size() < 3) throw ParseError(at + ": cut_edges needs at least one edge");
        e.kind = ScenarioEvent::Kind::CutEdges;
        for (std::size_t i = 2; i < row.size(); ++i) {
          const auto edges = parse_edges(row[i]);
          e.edges.insert(e.edges.end(), edges.begin(), edges.end());
        }
      } else if (kind == "repin") {
        if (row.size() != 2) throw ParseError(at + ": repin takes no arguments");
        e.kind = ScenarioEvent::Kind::Repin;
      } else {
        throw ParseError(at + ": unknown event kind '" + kind + "'");
      }
      if (!(e.t > 0.0) || e.t >= s.sim.t_end) throw ParseError(at + ": event time must lie in (0, t_end)");
      if (!s.events.empty() && e.t < s.events.back().t) throw ParseError(at + ": events must be sorted by time");
      s.events.push_back(std::move(e));
    }
  }
  return s;
}

Scenario read_scenario(const std::filesystem::path& path) { return parse_scenario(textio::read_file(path), path); }

namespace {

// Checks that every referenced bus exists and every cut edge is present
// when its event fires.
void validate_events(const Scenario& s, const NetworkModel& net, CommGraph graph) {
  for (const auto& e : s.events) {
    const std::string at = fmt::format("event at t={}", textio::format_double(e.t));
    for (int b : e.buses) {
      if (b < 0 || b >= net.bus_count) throw InvalidArgument(fmt::format("{}: bus {} does not exist", at, b + 1));
      if (!net.loads.count(b)) throw InvalidArgument(fmt::format("{}: bus {} has no load", at, b + 1));
    }
    for (const auto& [u, v] : e.edges)
      if (!graph.remove_edge(u, v))
        throw InvalidArgument(fmt::format("{}: edge {}-{} is not in the cyber graph", at, u + 1, v + 1));
  }
}

struct Pinner {
  const Scenario& scenario;
  std::unique_ptr<MlpModel> model;
  std::uint64_t stream;
  int count = 0;

  PinningDecision operator()(const PinningProblem& problem) {
    GaParams ga = scenario.ga;
    ga.seed = derive_seed(stream, static_cast<std::uint64_t>(count++));
    if (scenario.mode == PinningMode::Learned) return mgpin::decide(*model, problem, ga).decision;
    return ga_pinning(problem, ga);
  }
};

PinningDecision fixed_decision(const PinningProblem& problem, const PinningSet& pins) {
  PinningDecision d;
  const Verification v = verify(problem, pins);
  d.feasible = v.feasible;
  d.rate = v.rate;
  d.pins = pins;
  d.cardinality = pins.count();
  d.method = "fixed";
  return d;
}

std::string format_decisions(const std::vector<DecisionRecord>& records) {
  std::string s;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    s += fmt::format("[decision]\nindex = {}\nt = {}\ntrigger = {}\nnodes = {}\nedges = {}\n", i + 1,
                     textio::format_double(r.t), r.trigger, r.problem.graph.node_count(),
                     format_edges(r.problem.graph.edges()));
    s += format_decision_report(r.problem, r.decision);
    s += "\n";
  }
  return s;
}

}  // namespace

RunResult run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
  const NetworkModel base = read_network(s.network_file);
  const int m = base.dg_count();

  CommGraph graph;
  if (!s.cyber_file.empty()) {
    graph = read_graph(s.cyber_file);
  } else {
    Rng rng(derive_seed(s.seed, "cyber"));
    graph = small_world(m, s.small_world_degree, s.small_world_rewire, rng);
  }
  if (graph.node_count() != m)
    throw InvalidArgument(fmt::format("cyber graph has {} nodes but the network has {} DGs", graph.node_count(), m));
  validate_events(s, base, graph);

  Pinner pinner{s, nullptr, derive_seed(s.seed, "pinning")};
  if (s.mode == PinningMode::Learned) pinner.model = std::make_unique<MlpModel>(read_model(s.model_file));

  RunResult result;
  const auto problem_for = [&](const CommGraph& g) { return PinningProblem{g, s.C, s.c_pin, s.rho_star}; };
  {
    DecisionRecord rec{0.0, "initial", problem_for(graph), {}};
    if (s.mode == PinningMode::Fixed) {
      for (int k : s.fixed_pins)
        if (k < 0 || k >= m) throw InvalidArgument(fmt::format("pinned DG {} does not exist", k + 1));
      rec.decision = fixed_decision(rec.problem, PinningSet::from_indices(m, s.fixed_pins));
    } else {
      rec.decision = pinner(rec.problem);
      if (!rec.decision.feasible) throw Error("no feasible pinning set for the initial cyber graph");
    }
    result.decisions.push_back(std::move(rec));
  }

  PfSettings pf;
  pf.omega_ref = s.omega_ref;
  pf.V_ref = s.V_ref;
  result.powerflow = solve_power_flow(base, pf);
  const Eigen::VectorXd x0 = extract_steady_state(result.powerflow, base);

  MicrogridSystem sys(base, graph, result.decisions.front().decision.pins,
                      ControlGains::uniform(s.C, s.c_pin, s.omega_ref, s.V_ref));

  std::string events_csv = "t,kind,payload\n";
  std::vector<TimedEvent> timed;
  for (const auto& e : s.events) {
    timed.push_back({e.t, [&, e](MicrogridSystem& sy, double t) {
                       const std::string ts = fmt::format("{:.12g}", t);
                       if (e.kind == ScenarioEvent::Kind::LoadScale) {
                         scale_loads(sy.network, base, e.buses, e.factor);
                         events_csv += fmt::format("{},load_scale,buses={};factor={}\n", ts, format_bus_list(e.buses),
                                                   textio::format_double(e.factor));
                         return;
                       }
                       const PinningSet pins_before = sy.pins;
                       const double rate_before = convergence_rate(sy.graph, sy.pins, s.C, s.c_pin);
                       std::string payload = fmt::format("rate_before={};", textio::format_double(rate_before));
                       bool new_pins = e.kind == ScenarioEvent::Kind::Repin;
                       if (e.kind == ScenarioEvent::Kind::CutEdges) {
                         for (const auto& [u, v] : e.edges) sy.graph.remove_edge(u, v);
                         const double rate_cut = convergence_rate(sy.graph, sy.pins, s.C, s.c_pin);
                         payload = fmt::format("edges={};{}rate_cut={};", format_edges(e.edges), payload,
                                               textio::format_double(rate_cut));
                         new_pins = rate_cut < s.rho_star;
                       }
                       new_pins = new_pins && s.mode != PinningMode::Fixed;
                       if (new_pins) {
                         DecisionRecord rec{t, event_kind_name(e.kind), problem_for(sy.graph), {}};
                         rec.decision = pinner(rec.problem);
                         if (!rec.decision.feasible)
                           throw Error(fmt::format("no feasible pinning set after the event at t={}", ts));
                         sy.pins = rec.decision.pins;
                         result.decisions.push_back(std::move(rec));
                       }
                       const double rate_after = convergence_rate(sy.graph, sy.pins, s.C, s.c_pin);
                       events_csv += fmt::format(
                           "{},{},{}rate_after={};repinned={};pins_before={};pins_after={}\n", ts,
                           event_kind_name(e.kind), payload, textio::format_double(rate_after), new_pins ? "yes" : "no",
                           pins_before.to_string(), sy.pins.to_string());
                     }});
  }

  std::string ts_csv = "t";
  for (int k = 1; k <= m; ++k) ts_csv += fmt::format(",dg{0}.omega,dg{0}.V,dg{0}.P,dg{0}.Q,dg{0}.mpP", k);
  ts_csv += "\n";
  auto out = std::back_inserter(ts_csv);
  const Sampler sampler = [&](double t, const Eigen::VectorXd& x, const MicrogridSystem& sy) {
    const DgOutputs o = dg_outputs(sy, x);
    fmt::format_to(out, "{:.12g}", t);
    for (int k = 0; k < m; ++k)
      fmt::format_to(out, ",{:.12g},{:.12g},{:.12g},{:.12g},{:.12g}", o.omega[k], o.V[k], o.P[k], o.Q[k], o.mpP[k]);
    ts_csv += '\n';
  };

  const IntegrationResult ir = integrate(sys, x0, std::move(timed), s.sim, sampler);
  result.final_state = ir.final_state;
  result.stats = ir.stats;

  std::filesystem::create_directories(out_dir);
  textio::write_file_atomic(out_dir / "powerflow.txt", format_power_flow(result.powerflow, base));
  textio::write_file_atomic(out_dir / "powerflow.csv", format_power_flow_csv(result.powerflow, base));
  textio::write_file_atomic(out_dir / "timeseries.csv", ts_csv);
  textio::write_file_atomic(out_dir / "events.csv", events_csv);
  textio::write_file_atomic(out_dir / "decisions.txt", format_decisions(result.decisions));
  std::string run;
  run += fmt::format("[run]\nscenario = {}\nseed = {}\n", s.source.string(), s.seed);
  run += fmt::format("omega_ref = {}\nV_ref = {}\n", textio::format_double(s.omega_ref), textio::format_double(s.V_ref));
  run += fmt::format("C = {}\nc_pin = {}\nrho_star = {}\n", textio::format_double(s.C), textio::format_double(s.c_pin),
                     textio::format_double(s.rho_star));
  run += fmt::format("dg_count = {}\nt_end = {}\n", m, textio::format_double(s.sim.t_end));
  run += fmt::format("steps = {}\nrejected = {}\nrhs_evals = {}\njacobian_evals = {}\n", ir.stats.steps,
                     ir.stats.rejected, ir.stats.rhs_evals, ir.stats.jacobian_evals);
  textio::write_file_atomic(out_dir / "run.txt", run);
  result.summary = report(out_dir);
  textio::write_file_atomic(out_dir / "summary.txt", result.summary);
  return result;
}

}  // namespace mgpin
