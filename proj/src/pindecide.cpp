#include "mgpin/pindecide.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/rng.hpp"
#include "mgpin/textio.hpp"

namespace mgpin {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_problem(const PinningProblem& p) {
  if (!(p.G_c > 0.0) || !(p.c_pin > 0.0)) throw InvalidArgument("pinning problem gains must be > 0");
  if (!(p.rho_star >= 0.0)) throw InvalidArgument("rho_star must be >= 0");
  if (p.graph.node_count() <= 0) throw InvalidArgument("pinning problem needs at least one node");
}

// Rate for a pin mask given a precomputed Laplacian. Negative round-off
// below zero is clamped: L + c Psi is positive semidefinite.
double rate_of(const Eigen::MatrixXd& lap, std::uint64_t mask, double G_c, double c_pin) {
  Eigen::MatrixXd m = lap;
  for (int k = 0; k < m.rows(); ++k)
    if ((mask >> k) & 1U) m(k, k) += c_pin;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return G_c * std::max(0.0, es.eigenvalues()(0));
}

// All masks with `card` bits set out of m, in lexicographic order of the
// sorted index sequence.
std::vector<std::uint64_t> combinations(int m, int card) {
  std::vector<std::uint64_t> out;
  std::vector<int> idx(static_cast<std::size_t>(card));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    std::uint64_t mask = 0;
    for (int i : idx) mask |= std::uint64_t{1} << i;
    out.push_back(mask);
    int i = card - 1;
    while (i >= 0 && idx[i] == m - card + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < card; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

bool better_rate(double candidate, double incumbent) {
  return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

template <bool Parallel>
PinningDecision exhaustive_impl(const PinningProblem& problem, const char* method) {
  check_problem(problem);
  const int m = problem.graph.node_count();
  if (m > kExhaustiveMaxNodes)
    throw InvalidArgument(fmt::format("exhaustive pinning limited to m <= {} (got {})", kExhaustiveMaxNodes, m));
  const auto t0 = Clock::now();
  const Eigen::MatrixXd lap = laplacian(problem.graph);

  for (int card = 0; card <= m; ++card) {
    const auto masks = combinations(m, card);
    std::vector<double> rates(masks.size());
    const auto n = static_cast<long>(masks.size());
    if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
      for (long i = 0; i < n; ++i) rates[i] = rate_of(lap, masks[i], problem.G_c, problem.c_pin);
    } else {
      for (long i = 0; i < n; ++i) rates[i] = rate_of(lap, masks[i], problem.G_c, problem.c_pin);
    }
    long best = -1;
    for (long i = 0; i < n; ++i) {
      if (rates[i] < problem.rho_star) continue;
      if (best < 0 || better_rate(rates[i], rates[best])) best = i;
    }
    if (best >= 0) {
      PinningDecision d;
      d.feasible = true;
      d.pins = PinningSet::from_mask(m, masks[best]);
      d.cardinality = card;
      d.rate = rates[best];
      d.method = method;
      d.wall_time_s = seconds_since(t0);
      return d;
    }
  }
  PinningDecision d;
  d.feasible = false;
  d.pins = PinningSet::from_mask(m, (m == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << m) - 1));
  d.cardinality = m;
  d.rate = rate_of(lap, d.pins.mask(), problem.G_c, problem.c_pin);
  d.method = method;
  d.wall_time_s = seconds_since(t0);
  return d;
}

double fitness_from_rate(double rate, int pins, int m, const PinningProblem& problem) {
  if (rate >= problem.rho_star) {
    const double lambda = rate / problem.G_c;
    return 1.0 + (m - pins) + lambda / (1.0 + lambda);
  }
  return rate / problem.rho_star;  // rho_star > 0 here, since rate >= 0
}

}  // namespace

Verification verify(const PinningProblem& problem, const PinningSet& pins) {
  check_problem(problem);
  if (pins.size() != problem.graph.node_count()) throw InvalidArgument("verify: pin vector size mismatch");
  const double rate = std::max(0.0, convergence_rate(problem.graph, pins, problem.G_c, problem.c_pin));
  return Verification{rate >= problem.rho_star, rate};
}

PinningDecision exhaustive_pinning(const PinningProblem& problem) {
  return exhaustive_impl<true>(problem, "exhaustive");
}

PinningDecision exhaustive_pinning_serial(const PinningProblem& problem) {
  return exhaustive_impl<false>(problem, "exhaustive");
}

double ga_fitness(const PinningProblem& problem, std::uint64_t mask) {
  const int m = problem.graph.node_count();
  const double rate = rate_of(laplacian(problem.graph), mask, problem.G_c, problem.c_pin);
  return fitness_from_rate(rate, std::popcount(mask), m, problem);
}

PinningDecision ga_pinning(const PinningProblem& problem, const GaParams& params) {
  check_problem(problem);
  const int m = problem.graph.node_count();
  if (m > 64) throw InvalidArgument("ga_pinning supports at most 64 nodes");
  if (params.population < 2) throw InvalidArgument("GA population must be >= 2");
  if (params.generations < 0) throw InvalidArgument("GA generations must be >= 0");
  if (!(params.crossover_prob >= 0.0 && params.crossover_prob <= 1.0))
    throw InvalidArgument("GA crossover probability must lie in [0, 1]");
  if (params.mutation_prob > 1.0) throw InvalidArgument("GA mutation probability must lie in [0, 1]");
  const int elitism = std::clamp(params.elitism, 0, params.population);
  const double pm = params.mutation_prob < 0.0 ? 1.0 / m : params.mutation_prob;
  const std::uint64_t full = (m == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << m) - 1);

  const auto t0 = Clock::now();
  const Eigen::MatrixXd lap = laplacian(problem.graph);
  std::unordered_map<std::uint64_t, double> rate_cache;
  Rng rng(params.seed);

  auto evaluate = [&](const std::vector<std::uint64_t>& pop) {
    std::vector<std::uint64_t> todo;
    for (auto c : pop)
      if (!rate_cache.count(c) && std::find(todo.begin(), todo.end(), c) == todo.end()) todo.push_back(c);
    std::vector<double> rates(todo.size());
    const auto n = static_cast<long>(todo.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) rates[i] = rate_of(lap, todo[i], problem.G_c, problem.c_pin);
    for (long i = 0; i < n; ++i) rate_cache.emplace(todo[i], rates[i]);
    std::vector<double> fit(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i)
      fit[i] = fitness_from_rate(rate_cache.at(pop[i]), std::popcount(pop[i]), m, problem);
    return fit;
  };

  std::vector<std::uint64_t> pop(static_cast<std::size_t>(params.population));
  pop[0] = full;
  for (std::size_t i = 1; i < pop.size(); ++i) {
    const double density = uniform01(rng);
    std::uint64_t c = 0;
    for (int k = 0; k < m; ++k)
      if (bernoulli(rng, density)) c |= std::uint64_t{1} << k;
    pop[i] = c;
  }

  std::uint64_t best = pop[0];
  double best_fit = -1.0;
  auto track = [&](const std::vector<std::uint64_t>& p, const std::vector<double>& f) {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (f[i] > best_fit || (f[i] == best_fit && p[i] < best)) {
        best_fit = f[i];
        best = p[i];
      }
  };

  auto fit = evaluate(pop);
  track(pop, fit);
  for (int gen = 0; gen < params.generations; ++gen) {
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return fit[a] > fit[b] || (fit[a] == fit[b] && pop[a] < pop[b]);
    });
    std::vector<std::uint64_t> next;
    next.reserve(pop.size());
    for (int e = 0; e < elitism; ++e) next.push_back(pop[order[e]]);
    auto tournament = [&]() {
      const auto a = uniform_index(rng, pop.size());
      const auto b = uniform_index(rng, pop.size());
      return fit[a] >= fit[b] ? pop[a] : pop[b];
    };
    while (next.size() < pop.size()) {
      std::uint64_t p1 = tournament();
      std::uint64_t p2 = tournament();
      if (bernoulli(rng, params.crossover_prob)) {
        std::uint64_t take = 0;
        for (int k = 0; k < m; ++k)
          if (bernoulli(rng, 0.5)) take |= std::uint64_t{1} << k;
        const std::uint64_t c1 = (p1 & take) | (p2 & ~take);
        const std::uint64_t c2 = (p2 & take) | (p1 & ~take);
        p1 = c1;
        p2 = c2;
      }
      for (std::uint64_t* c : {&p1, &p2})
        for (int k = 0; k < m; ++k)
          if (bernoulli(rng, pm)) *c ^= std::uint64_t{1} << k;
      next.push_back(p1 & full);
      if (next.size() < pop.size()) next.push_back(p2 & full);
    }
    pop = std::move(next);
    fit = evaluate(pop);
    track(pop, fit);
  }

  PinningDecision d;
  d.pins = PinningSet::from_mask(m, best);
  d.cardinality = std::popcount(best);
  d.rate = rate_cache.at(best);
  d.feasible = d.rate >= problem.rho_star;
  d.method = "ga";
  d.seed = params.seed;
  d.wall_time_s = seconds_since(t0);
  return d;
}

std::string format_decision_report(const PinningProblem& problem, const PinningDecision& d) {
  std::string s;
  s += fmt::format("graph_hash = {:016x}\n", problem.graph.hash());
  s += fmt::format("rho_star = {}\n", textio::format_double(problem.rho_star));
  s += fmt::format("G_c = {}\n", textio::format_double(problem.G_c));
  s += fmt::format("c_pin = {}\n", textio::format_double(problem.c_pin));
  s += fmt::format("pins = {}\n", d.pins.to_string());
  s += fmt::format("cardinality = {}\n", d.cardinality);
  s += fmt::format("rate = {}\n", textio::format_double(d.rate));
  s += fmt::format("feasible = {}\n", d.feasible ? "true" : "false");
  s += fmt::format("method = {}\n", d.method);
  s += fmt::format("seed = {}\n", d.seed);
  s += fmt::format("wall_time = {:.6f}\n", d.wall_time_s);
  return s;
}

}  // namespace mgpin
