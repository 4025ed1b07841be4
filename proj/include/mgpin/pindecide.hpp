#pragma once

#include <cstdint>
#include <string>

#include "mgpin/cybergraph.hpp"

namespace mgpin {

struct PinningProblem {
  CommGraph graph;
  double G_c = 30.0;
  double c_pin = 1.0;
  double rho_star = 10.0;  // target convergence rate
};

struct Verification {
  bool feasible = false;
  double rate = 0.0;
};

/// rate = G_c * lambda_min(L + c_pin Psi); feasible iff rate >= rho_star.
Verification verify(const PinningProblem& problem, const PinningSet& pins);

struct PinningDecision {
  bool feasible = false;
  PinningSet pins;   // best-found set (all pins when exhaustive finds nothing)
  int cardinality = 0;
  double rate = 0.0;
  std::string method;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

/// Largest node count accepted by the exhaustive search.
inline constexpr int kExhaustiveMaxNodes = 20;

/// Minimum-cardinality feasible set with the largest rate; ties go to the
/// lexicographically smallest index sequence. Subsets of one cardinality are
/// scored in parallel and reduced in enumeration order.
PinningDecision exhaustive_pinning(const PinningProblem& problem);

/// Single-threaded reference for exhaustive_pinning; same result bit for bit.
PinningDecision exhaustive_pinning_serial(const PinningProblem& problem);

struct GaParams {
  int population = 50;
  int generations = 200;
  double crossover_prob = 0.8;
  double mutation_prob = -1.0;  // negative selects 1/m
  int elitism = 2;
  std::uint64_t seed = 1;
};

/// Boolean-chromosome genetic algorithm with a scalar lexicographic fitness:
/// infeasible sets score rate/rho_star in [0, 1); feasible sets score
/// 1 + (m - |pins|) + lambda/(1 + lambda), so feasibility dominates, then
/// fewer pins, then a larger lambda_min.
PinningDecision ga_pinning(const PinningProblem& problem, const GaParams& params);

/// Scalar GA fitness for one chromosome.
double ga_fitness(const PinningProblem& problem, std::uint64_t mask);

/// Structured `key = value` decision record.
std::string format_decision_report(const PinningProblem& problem, const PinningDecision& d);

}  // namespace mgpin
