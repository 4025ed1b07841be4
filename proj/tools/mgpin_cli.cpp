#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/pinlearn.hpp"
#include "mgpin/powerflow.hpp"
#include "mgpin/scenario.hpp"
#include "mgpin/textio.hpp"

namespace fs = std::filesystem;
using namespace mgpin;

namespace {

struct Global {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

struct GraphOpts {
  int m = 10;
  int degree = 4;
  double rewire = 0.2;
  int max_removals = 0;
  bool allow_disconnect = false;
  double G_c = 30.0;
  double c_pin = 1.0;
  double rho_star = 10.0;

  void add(CLI::App* app) {
    app->add_option("--m", m, "Number of DGs (graph nodes)");
    app->add_option("--degree", degree, "Mean degree of the small-world graphs");
    app->add_option("--rewire", rewire, "Rewiring probability");
    app->add_option("--max-removals", max_removals, "Random edge cuts per sample, drawn from 0..N");
    app->add_flag("--allow-disconnect", allow_disconnect, "Let cuts split the graph");
    add_problem(app);
  }
  void add_problem(CLI::App* app) {
    app->add_option("--G-c", G_c, "Consensus gain");
    app->add_option("--c-pin", c_pin, "Pinning gain");
    app->add_option("--rho-star", rho_star, "Required convergence rate");
  }
  DatasetParams params(std::uint64_t seed) const {
    DatasetParams p;
    p.m = m;
    p.mean_degree = degree;
    p.rewire_prob = rewire;
    p.disruption.max_removals = max_removals;
    p.disruption.keep_connected = !allow_disconnect;
    p.G_c = G_c;
    p.c_pin = c_pin;
    p.rho_star = rho_star;
    p.seed = seed;
    return p;
  }
};

void emit(const Global& g, const std::string& text, const fs::path& fallback_name = {}) {
  std::fputs(text.c_str(), stdout);
  if (g.out.empty()) return;
  fs::path path = g.out;
  if (!fallback_name.empty() && (fs::is_directory(path) || g.out.back() == '/')) path /= fallback_name;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  textio::write_file_atomic(path, text);
}

Scenario load_scenario(const Global& g) {
  if (g.config.empty()) throw InvalidArgument("--config <scenario file> is required");
  Scenario s = read_scenario(g.config);
  if (g.seed) s.seed = *g.seed;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microgrid simulator and pinning-decision toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--config", g.config, "Scenario file");

  // powerflow
  auto* pf = app.add_subcommand("powerflow", "Solve the droop power flow of a network");
  std::string pf_network;
  bool pf_csv = false;
  pf->add_option("--network", pf_network, "Network file (default: the scenario's network)");
  pf->add_flag("--csv", pf_csv, "Print the CSV table instead of text");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a scenario and write its artifacts to --out");

  // decide
  auto* dec = app.add_subcommand("decide", "Choose a pinning set for a communication graph");
  std::string dec_graph, dec_method = "exhaustive", dec_model;
  GraphOpts dec_opts;
  dec->add_option("--graph", dec_graph, "Graph file")->required();
  dec->add_option("--method", dec_method, "exhaustive, ga or learned")
      ->check(CLI::IsMember({"exhaustive", "ga", "learned"}));
  dec->add_option("--model", dec_model, "Model file for --method learned");
  dec_opts.add_problem(dec);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a labelled training set");
  int gen_count = 10000;
  GraphOpts gen_opts;
  gen->add_option("--count", gen_count, "Number of distinct samples");
  gen_opts.add(gen);

  // train
  auto* tr = app.add_subcommand("train", "Train the pin-probability network");
  std::string tr_data;
  std::vector<int> tr_hidden;
  TrainParams tp;
  tr->add_option("--data", tr_data, "Dataset CSV")->required();
  tr->add_option("--hidden", tr_hidden, "Hidden layer widths")->delimiter(',');
  tr->add_option("--lr", tp.learning_rate, "Learning rate");
  tr->add_option("--epochs", tp.epochs, "Epochs");
  tr->add_option("--batch", tp.batch_size, "Mini-batch size");
  tr->add_option("--momentum", tp.momentum, "Momentum");
  tr->add_option("--val-split", tp.validation_split, "Validation fraction");

  // eval
  auto* ev = app.add_subcommand("eval", "Check learned decisions on held-out graphs");
  std::string ev_model;
  int ev_count = 500;
  GraphOpts ev_opts;
  ev->add_option("--model", ev_model, "Model file")->required();
  ev->add_option("--count", ev_count, "Number of held-out graphs");
  ev_opts.add(ev);

  // report
  auto* rep = app.add_subcommand("report", "Summarize a finished run directory (--out)");

  CLI11_PARSE(app, argc, argv);
  const std::uint64_t seed = g.seed.value_or(1);

  try {
    if (pf->parsed()) {
      NetworkModel net;
      PfSettings settings;
      if (!pf_network.empty()) {
        net = read_network(pf_network);
      } else {
        const Scenario s = load_scenario(g);
        net = read_network(s.network_file);
        settings.omega_ref = s.omega_ref;
        settings.V_ref = s.V_ref;
      }
      const PowerFlowSolution sol = solve_power_flow(net, settings);
      emit(g, pf_csv ? format_power_flow_csv(sol, net) : format_power_flow(sol, net),
           pf_csv ? "powerflow.csv" : "powerflow.txt");
    } else if (sim->parsed()) {
      const Scenario s = load_scenario(g);
      const RunResult r = run_scenario(s, g.out.empty() ? fs::path("out") : fs::path(g.out));
      std::fputs(r.summary.c_str(), stdout);
    } else if (dec->parsed()) {
      const PinningProblem problem{read_graph(dec_graph), dec_opts.G_c, dec_opts.c_pin, dec_opts.rho_star};
      GaParams ga;
      ga.seed = derive_seed(seed, "ga");
      PinningDecision d;
      std::string extra;
      if (dec_method == "exhaustive") {
        d = exhaustive_pinning(problem);
      } else if (dec_method == "ga") {
        d = ga_pinning(problem, ga);
      } else {
        if (dec_model.empty()) throw InvalidArgument("--method learned needs --model");
        const LearnedDecision ld = decide(read_model(dec_model), problem, ga);
        d = ld.decision;
        extra = fmt::format("source = {}\n", ld.source);
      }
      emit(g, format_decision_report(problem, d) + extra, "decision.txt");
      if (!d.feasible) {
        std::fputs("mgpin: no feasible pinning set\n", stderr);
        return 2;
      }
    } else if (gen->parsed()) {
      DatasetParams p = gen_opts.params(seed);
      p.count = gen_count;
      DatasetStats st;
      const auto samples = gen_dataset(p, &st);
      const fs::path path = g.out.empty() ? fs::path("dataset.csv") : fs::path(g.out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      textio::write_file_atomic(path, format_dataset_csv(samples, p.m));
      fmt::print("samples = {}\ncandidates = {}\nduplicates = {}\ninfeasible = {}\nfile = {}\n", samples.size(),
                 st.candidates, st.duplicates, st.infeasible, path.string());
    } else if (tr->parsed()) {
      if (!tr_hidden.empty()) tp.hidden = tr_hidden;
      tp.seed = derive_seed(seed, "train");
      Eigen::MatrixXd x, y;
      dataset_matrices(parse_dataset_csv(textio::read_file(tr_data)), x, y);
      TrainReport rep_out;
      const MlpModel model = train_mlp(x, y, tp, &rep_out);
      for (std::size_t e = 0; e < rep_out.train_loss.size(); ++e)
        fmt::print("epoch {} train {:.6f}{}\n", e + 1, rep_out.train_loss[e],
                   rep_out.validation_loss.empty() ? "" : fmt::format(" val {:.6f}", rep_out.validation_loss[e]));
      const fs::path path = g.out.empty() ? fs::path("model.txt") : fs::path(g.out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      textio::write_file_atomic(path, format_model(model));
      fmt::print("model = {}\n", path.string());
    } else if (ev->parsed()) {
      const MlpModel model = read_model(ev_model);
      DatasetParams p = ev_opts.params(seed);
      p.m = model.output_size();
      emit(g, format_eval_report(evaluate_decisions(model, p, ev_count)), "eval.txt");
    } else if (rep->parsed()) {
      std::fputs(report(g.out.empty() ? fs::path("out") : fs::path(g.out)).c_str(), stdout);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mgpin: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
