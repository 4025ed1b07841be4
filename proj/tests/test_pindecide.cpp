#include <gtest/gtest.h>

#include <bit>

#include "mgpin/error.hpp"
#include "mgpin/pindecide.hpp"
#include "test_support.hpp"

using namespace mgpin;
using mgpin::testing::cycle_graph;
using mgpin::testing::path_graph;

namespace {

// Brute force over all masks: smallest feasible cardinality and the best rate
// at that cardinality.
std::pair<int, double> brute_force(const PinningProblem& p) {
  const int m = p.graph.node_count();
  int best_card = m + 1;
  double best_rate = -1.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    const Verification v = verify(p, PinningSet::from_mask(m, mask));
    const int card = std::popcount(mask);
    if (!v.feasible) continue;
    if (card < best_card || (card == best_card && v.rate > best_rate)) {
      best_card = card;
      best_rate = v.rate;
    }
  }
  return {best_card, best_rate};
}

}  // namespace

TEST(Verify, MatchesConvergenceRate) {
  const PinningProblem p{cycle_graph(4), 30.0, 1.0, 10.0};
  const PinningSet pins = PinningSet::from_indices(4, {0, 2});
  const Verification v = verify(p, pins);
  EXPECT_DOUBLE_EQ(v.rate, convergence_rate(p.graph, pins, 30.0, 1.0));
  EXPECT_TRUE(v.feasible);  // 30 * 0.438 > 10
  EXPECT_FALSE(verify(PinningProblem{cycle_graph(4), 30.0, 1.0, 14.0}, pins).feasible);
}

TEST(Exhaustive, AgreesWithBruteForce) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 5 + static_cast<int>(uniform_index(rng, 4));
    const CommGraph g = small_world(m, 2, 0.4, rng);
    const double rho = 30.0 * (0.05 + 0.9 * uniform01(rng)) * lambda_min(laplacian(g) + Eigen::MatrixXd::Identity(m, m));
    const PinningProblem p{g, 30.0, 1.0, rho};
    const PinningDecision d = exhaustive_pinning(p);
    const auto [card, rate] = brute_force(p);
    ASSERT_TRUE(d.feasible);
    EXPECT_EQ(d.cardinality, card);
    EXPECT_NEAR(d.rate, rate, 1e-9);
    EXPECT_TRUE(verify(p, d.pins).feasible);
  }
}

TEST(Exhaustive, ParallelMatchesSerial) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const PinningProblem p{small_world(12, 4, 0.2, rng), 30.0, 1.0, 10.0};
    const PinningDecision a = exhaustive_pinning(p);
    const PinningDecision b = exhaustive_pinning_serial(p);
    EXPECT_EQ(a.pins, b.pins);
    EXPECT_EQ(a.rate, b.rate);
  }
}

TEST(Exhaustive, ZeroTargetNeedsNoPins) {
  const PinningDecision d = exhaustive_pinning(PinningProblem{path_graph(4), 30.0, 1.0, 0.0});
  EXPECT_TRUE(d.feasible);
  EXPECT_EQ(d.cardinality, 0);
}

TEST(Exhaustive, UnreachableTargetIsReportedInfeasible) {
  // All pins give rate G_c * c_pin = 30, so 31 cannot be met.
  const PinningDecision d = exhaustive_pinning(PinningProblem{cycle_graph(5), 30.0, 1.0, 31.0});
  EXPECT_FALSE(d.feasible);
  EXPECT_EQ(d.pins.count(), 5);
}

TEST(Exhaustive, RejectsLargeGraphs) {
  EXPECT_THROW(exhaustive_pinning(PinningProblem{path_graph(kExhaustiveMaxNodes + 1), 1.0, 1.0, 0.1}),
               InvalidArgument);
}

TEST(Ga, DeterministicUnderSeed) {
  Rng rng(4);
  const PinningProblem p{small_world(10, 4, 0.2, rng), 30.0, 1.0, 10.0};
  GaParams ga;
  ga.seed = 99;
  const PinningDecision a = ga_pinning(p, ga);
  const PinningDecision b = ga_pinning(p, ga);
  EXPECT_EQ(a.pins, b.pins);
  EXPECT_EQ(a.rate, b.rate);
  EXPECT_EQ(a.seed, 99u);
}

TEST(Ga, NeverUndercutsExhaustiveAndAlwaysVerifies) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const PinningProblem p{small_world(10, 4, 0.2, rng), 30.0, 1.0, 10.0};
    GaParams ga;
    ga.seed = static_cast<std::uint64_t>(trial);
    const PinningDecision g = ga_pinning(p, ga);
    const PinningDecision e = exhaustive_pinning(p);
    ASSERT_TRUE(g.feasible);
    EXPECT_TRUE(verify(p, g.pins).feasible);
    EXPECT_GE(g.cardinality, e.cardinality);
  }
}

TEST(Ga, AllPinsInfeasibleReported) {
  GaParams ga;
  const PinningDecision d = ga_pinning(PinningProblem{cycle_graph(6), 30.0, 1.0, 1000.0}, ga);
  EXPECT_FALSE(d.feasible);
}

TEST(Ga, FitnessBandsOrderFeasibilityThenSize) {
  const PinningProblem p{cycle_graph(6), 30.0, 1.0, 10.0};
  const PinningDecision best = exhaustive_pinning(p);
  ASSERT_TRUE(best.feasible);
  ASSERT_LT(best.cardinality, 6);
  EXPECT_LT(ga_fitness(p, 0b000001), 1.0);
  EXPECT_GE(ga_fitness(p, 0b111111), 1.0);
  EXPECT_GT(ga_fitness(p, best.pins.mask()), ga_fitness(p, 0b111111));
}

TEST(Report, ContainsAllFields) {
  const PinningProblem p{cycle_graph(4), 30.0, 1.0, 10.0};
  const std::string r = format_decision_report(p, exhaustive_pinning(p));
  for (const char* key : {"graph_hash", "rho_star", "G_c", "c_pin", "pins", "cardinality", "rate", "method", "seed",
                          "wall_time"})
    EXPECT_NE(r.find(std::string(key) + " = "), std::string::npos) << key;
}
