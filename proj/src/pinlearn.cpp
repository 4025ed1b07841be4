#include "mgpin/pinlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <unordered_set>

#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/textio.hpp"

namespace mgpin {

Eigen::VectorXd vectorize_laplacian(const Eigen::MatrixXd& L) {
  const long m = L.rows();
  if (L.cols() != m) throw InvalidArgument("vectorize_laplacian: matrix is not square");
  if (m > 0 && (L - L.transpose()).cwiseAbs().maxCoeff() > 0.0)
    throw InvalidArgument("vectorize_laplacian: matrix is not symmetric");
  Eigen::VectorXd f(m * (m + 1) / 2);
  long k = 0;
  for (long i = 0; i < m; ++i)
    for (long j = 0; j <= i; ++j) f(k++) = L(i, j);
  return f;
}

Eigen::MatrixXd devectorize_laplacian(const Eigen::VectorXd& f) {
  const long n = f.size();
  const long m = std::lround((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0);
  if (m * (m + 1) / 2 != n) throw InvalidArgument(fmt::format("{} is not a triangular feature length", n));
  Eigen::MatrixXd L(m, m);
  long k = 0;
  for (long i = 0; i < m; ++i)
    for (long j = 0; j <= i; ++j) {
      L(i, j) = f(k);
      L(j, i) = f(k);
      ++k;
    }
  return L;
}

namespace {

void check_params(const DatasetParams& p) {
  if (p.count < 1) throw InvalidArgument("dataset count must be >= 1");
  if (p.m < 2 || p.m > 64) throw InvalidArgument("dataset node count must lie in [2, 64]");
  if (p.disruption.max_removals < 0) throw InvalidArgument("max_removals must be >= 0");
}

struct Candidate {
  std::string key;
  bool feasible = false;
  TrainingSample sample;
};

CommGraph draw_graph(const DatasetParams& p, Rng& rng) {
  CommGraph g = small_world(p.m, p.mean_degree, p.rewire_prob, rng);
  const int cuts = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(p.disruption.max_removals) + 1));
  for (int c = 0; c < cuts && g.edge_count() > 0; ++c) {
    if (!p.disruption.keep_connected) {
      g = disrupt_random(g, 1, rng).graph;
      continue;
    }
    std::vector<Edge> order = g.edges();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    bool cut = false;
    for (const Edge& e : order) {
      CommGraph next = g;
      next.remove_edge(e.first, e.second);
      if (components(next).size() == 1) {
        g = std::move(next);
        cut = true;
        break;
      }
    }
    if (!cut) break;  // every remaining edge is a bridge
  }
  return g;
}

Candidate make_candidate(const DatasetParams& p, std::uint64_t index) {
  Rng rng(derive_seed(p.seed, index));
  Candidate c;
  const CommGraph g = draw_graph(p, rng);
  c.key = g.canonical_key();
  PinningProblem problem{g, p.G_c, p.c_pin, p.rho_star};
  PinningDecision d;
  if (p.m <= 12) {
    d = exhaustive_pinning_serial(problem);
  } else {
    GaParams ga = p.ga;
    ga.seed = derive_seed(derive_seed(p.seed, index), "ga");
    d = ga_pinning(problem, ga);
  }
  c.feasible = d.feasible;
  c.sample.index = index;
  c.sample.features = vectorize_laplacian(laplacian(g));
  c.sample.edge_count = g.edge_count();
  c.sample.labels.resize(static_cast<std::size_t>(p.m));
  for (int k = 0; k < p.m; ++k) c.sample.labels[k] = d.pins.pinned(k) ? 1 : 0;
  return c;
}

template <bool Parallel>
std::vector<TrainingSample> generate(const DatasetParams& p, DatasetStats* stats) {
  check_params(p);
  const long max_candidates = p.max_candidates > 0 ? p.max_candidates : 50L * p.count;
  const long batch = Parallel ? std::max<long>(64, p.count / 8) : 1;
  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(p.count));
  std::unordered_set<std::string> seen;
  DatasetStats st;
  long next = 0;
  while (static_cast<long>(out.size()) < p.count) {
    if (next >= max_candidates)
      throw Error(fmt::format("dataset: only {} distinct feasible samples after {} candidates", out.size(),
                              max_candidates));
    const long hi = std::min(next + batch, max_candidates);
    std::vector<Candidate> cands(static_cast<std::size_t>(hi - next));
    if constexpr (Parallel) {
      const long n = hi - next;
#pragma omp parallel for schedule(dynamic, 4)
      for (long i = 0; i < n; ++i) cands[i] = make_candidate(p, static_cast<std::uint64_t>(next + i));
    } else {
      for (long i = 0; i < hi - next; ++i) cands[i] = make_candidate(p, static_cast<std::uint64_t>(next + i));
    }
    for (auto& c : cands) {
      if (static_cast<long>(out.size()) >= p.count) break;
      ++st.candidates;
      if (!c.feasible) {
        ++st.infeasible;
        continue;
      }
      if (!seen.insert(c.key).second) {
        ++st.duplicates;
        continue;
      }
      out.push_back(std::move(c.sample));
    }
    next = hi;
  }
  if (stats) *stats = st;
  return out;
}

}  // namespace

CommGraph dataset_graph(const DatasetParams& params, std::uint64_t index) {
  Rng rng(derive_seed(params.seed, index));
  return draw_graph(params, rng);
}

std::vector<TrainingSample> gen_dataset(const DatasetParams& params, DatasetStats* stats) {
  return generate<true>(params, stats);
}

std::vector<TrainingSample> gen_dataset_serial(const DatasetParams& params, DatasetStats* stats) {
  return generate<false>(params, stats);
}

std::string format_dataset_csv(const std::vector<TrainingSample>& samples, int m) {
  const int nf = m * (m + 1) / 2;
  std::string s;
  for (int i = 1; i <= nf; ++i) s += fmt::format("f{},", i);
  for (int i = 1; i <= m; ++i) s += fmt::format("y{}{}", i, i == m ? "\n" : ",");
  for (const auto& smp : samples) {
    if (smp.features.size() != nf || static_cast<int>(smp.labels.size()) != m)
      throw InvalidArgument("format_dataset_csv: sample size mismatch");
    for (double f : smp.features) s += textio::format_double(f) + ",";
    for (int i = 0; i < m; ++i) s += fmt::format("{}{}", smp.labels[i], i + 1 == m ? "\n" : ",");
  }
  return s;
}

std::vector<TrainingSample> parse_dataset_csv(std::string_view text) {
  std::vector<TrainingSample> out;
  std::size_t pos = 0;
  int nf = -1, m = -1;
  long line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = textio::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cols = textio::split(line, ',');
    if (nf < 0) {
      nf = static_cast<int>(std::count_if(cols.begin(), cols.end(), [](const std::string& c) { return c[0] == 'f'; }));
      m = static_cast<int>(cols.size()) - nf;
      if (m < 1 || m * (m + 1) / 2 != nf) throw ParseError("dataset header does not describe m(m+1)/2 features");
      continue;
    }
    if (static_cast<int>(cols.size()) != nf + m) throw ParseError(fmt::format("dataset line {}: wrong column count", line_no));
    TrainingSample smp;
    smp.index = out.size();
    smp.features.resize(nf);
    for (int i = 0; i < nf; ++i) smp.features(i) = textio::to_double(cols[i]);
    for (int i = 0; i < m; ++i) {
      const int v = textio::to_int(cols[nf + i]);
      if (v != 0 && v != 1) throw ParseError(fmt::format("dataset line {}: labels must be 0 or 1", line_no));
      smp.labels.push_back(static_cast<std::uint8_t>(v));
    }
    out.push_back(std::move(smp));
  }
  return out;
}

void dataset_matrices(const std::vector<TrainingSample>& samples, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  if (samples.empty()) throw InvalidArgument("dataset is empty");
  const long nf = samples.front().features.size();
  const long m = static_cast<long>(samples.front().labels.size());
  x.resize(nf, static_cast<long>(samples.size()));
  y.resize(m, static_cast<long>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != nf || static_cast<long>(samples[i].labels.size()) != m)
      throw InvalidArgument("dataset samples differ in size");
    x.col(static_cast<long>(i)) = samples[i].features;
    for (long k = 0; k < m; ++k) y(k, static_cast<long>(i)) = samples[i].labels[k];
  }
}

LearnedDecision decide(const MlpModel& model, const PinningProblem& problem, const GaParams& fallback) {
  const auto t0 = std::chrono::steady_clock::now();
  const int m = problem.graph.node_count();
  if (model.output_size() != m || model.input_size() != m * (m + 1) / 2)
    throw InvalidArgument(fmt::format("model shape does not fit a {}-node graph", m));
  LearnedDecision out;
  out.probabilities = model.predict(vectorize_laplacian(laplacian(problem.graph)));

  // Descending probability, ties by index.
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return out.probabilities(a) > out.probabilities(b); });

  PinningSet pins(m);
  for (int k = 0; k < m; ++k) pins.set(k, out.probabilities(k) >= 0.5);
  Verification v = verify(problem, pins);
  out.source = "learned";
  if (!v.feasible) {
    out.source = "repaired";
    for (int k : order) {
      if (pins.pinned(k)) continue;
      pins.set(k, true);
      v = verify(problem, pins);
      if (v.feasible) break;
    }
    if (v.feasible) {
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (!pins.pinned(*it)) continue;
        pins.set(*it, false);
        const Verification trial = verify(problem, pins);
        if (trial.feasible) {
          v = trial;
        } else {
          pins.set(*it, true);
        }
      }
    }
  }

  if (v.feasible) {
    out.decision.feasible = true;
    out.decision.pins = pins;
    out.decision.cardinality = pins.count();
    out.decision.rate = v.rate;
    out.decision.method = out.source;
  } else {
    out.source = "fallback";
    out.decision = ga_pinning(problem, fallback);
  }
  out.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.decision.wall_time_s = out.latency_s;
  return out;
}

}  // namespace mgpin

namespace mgpin {

EvalReport evaluate_decisions(const MlpModel& model, const DatasetParams& params, int count) {
  if (count < 1) throw InvalidArgument("evaluation needs at least one graph");
  DatasetParams p = params;
  p.seed = derive_seed(params.seed, "eval");
  EvalReport r;
  std::vector<double> latency;
  for (int i = 0; i < count; ++i) {
    const CommGraph g = dataset_graph(p, static_cast<std::uint64_t>(i));
    const PinningProblem problem{g, p.G_c, p.c_pin, p.rho_star};
    PinningDecision ref;
    if (g.node_count() <= 12) {
      ref = exhaustive_pinning(problem);
    } else {
      GaParams ga = p.ga;
      ga.seed = derive_seed(p.seed, static_cast<std::uint64_t>(i));
      ref = ga_pinning(problem, ga);
    }
    GaParams fallback = p.ga;
    fallback.seed = derive_seed(derive_seed(p.seed, static_cast<std::uint64_t>(i)), "fallback");
    const LearnedDecision d = decide(model, problem, fallback);
    ++r.graphs;
    latency.push_back(d.latency_s);
    if (ref.feasible) ++r.feasible_instances;
    if (d.decision.feasible && verify(problem, d.decision.pins).feasible) {
      ++r.feasible_returned;
      if (ref.feasible && d.decision.cardinality == ref.cardinality) ++r.optimal_cardinality;
    }
    if (d.source == "learned") ++r.learned;
    if (d.source == "repaired") ++r.repaired;
    if (d.source == "fallback") ++r.fallback;
  }
  std::sort(latency.begin(), latency.end());
  const std::size_t n = latency.size();
  r.median_latency_s = n % 2 ? latency[n / 2] : 0.5 * (latency[n / 2 - 1] + latency[n / 2]);
  r.max_latency_s = latency.back();
  return r;
}

std::string format_eval_report(const EvalReport& r) {
  std::string s;
  s += fmt::format("graphs = {}\n", r.graphs);
  s += fmt::format("feasible_instances = {}\n", r.feasible_instances);
  s += fmt::format("feasible_returned = {}\n", r.feasible_returned);
  s += fmt::format("learned = {}\nrepaired = {}\nfallback = {}\n", r.learned, r.repaired, r.fallback);
  s += fmt::format("learned_share = {:.4f}\n", r.graphs ? static_cast<double>(r.learned) / r.graphs : 0.0);
  s += fmt::format("optimal_cardinality = {}\n", r.optimal_cardinality);
  s += fmt::format("median_latency_ms = {:.4f}\nmax_latency_ms = {:.4f}\n", 1e3 * r.median_latency_s,
                   1e3 * r.max_latency_s);
  return s;
}

}  // namespace mgpin
