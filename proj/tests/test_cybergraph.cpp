#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mgpin/cybergraph.hpp"
#include "mgpin/error.hpp"
#include "test_support.hpp"

using namespace mgpin;
using mgpin::testing::cycle_graph;
using mgpin::testing::path_graph;

TEST(CommGraph, EdgesAreNormalizedAndUnique) {
  CommGraph g(4);
  EXPECT_TRUE(g.add_edge(2, 0));
  EXPECT_FALSE(g.add_edge(0, 2));
  EXPECT_TRUE(g.has_edge(0, 2));
  EXPECT_EQ(g.edges().front(), Edge(0, 2));
  EXPECT_TRUE(g.remove_edge(2, 0));
  EXPECT_FALSE(g.remove_edge(2, 0));
  EXPECT_EQ(g.edge_count(), 0);
}

TEST(CommGraph, CanonicalKeyIgnoresInsertionOrder) {
  CommGraph a(5, {{0, 1}, {3, 4}, {1, 2}});
  CommGraph b(5, {{4, 3}, {2, 1}, {1, 0}});
  EXPECT_EQ(a.canonical_key(), b.canonical_key());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a, b);
}

TEST(Laplacian, RowsSumToZeroAndSymmetric) {
  const CommGraph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {1, 4}});
  const Eigen::MatrixXd L = laplacian(g);
  EXPECT_LT(L.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(L, L.transpose());
  EXPECT_EQ(L.diagonal(), degree_vector(g));
  EXPECT_EQ(L, Eigen::MatrixXd(degree_vector(g).asDiagonal()) - adjacency(g));
}

TEST(LambdaMin, PathOfThreePinnedAtEnd) {
  // L + Psi for the path 1-2-3 pinned at 1 has characteristic polynomial
  // x^3 - 5x^2 + 6x - 1; its smallest root by bisection is the oracle.
  auto p = [](double x) { return x * x * x - 5 * x * x + 6 * x - 1; };
  double lo = 0.0, hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (p(lo) * p(mid) <= 0 ? hi : lo) = mid;
  }
  const double rate = convergence_rate(path_graph(3), PinningSet::from_indices(3, {0}), 1.0, 1.0);
  EXPECT_NEAR(rate, 0.5 * (lo + hi), 1e-9);
  EXPECT_NEAR(rate, 0.19806226419516, 1e-9);
}

TEST(LambdaMin, CycleOfFourPinnedAtOppositeNodes) {
  const double rate = convergence_rate(cycle_graph(4), PinningSet::from_indices(4, {0, 2}), 1.0, 1.0);
  EXPECT_NEAR(rate, (5.0 - std::sqrt(17.0)) / 2.0, 1e-9);
}

TEST(LambdaMin, RejectsAsymmetricInput) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 0, 1;
  EXPECT_THROW(lambda_min(m), InvalidArgument);
}

TEST(LambdaMin, ScalesWithGainsAndUnpinnedIsZero) {
  const CommGraph g = cycle_graph(5);
  EXPECT_NEAR(convergence_rate(g, PinningSet(5), 30.0, 1.0), 0.0, 1e-12);
  const PinningSet pins = PinningSet::from_indices(5, {1});
  EXPECT_NEAR(convergence_rate(g, pins, 30.0, 1.0), 30.0 * convergence_rate(g, pins, 1.0, 1.0), 1e-10);
  // All pins with c_pin = 1 shifts the Laplacian spectrum by exactly one.
  EXPECT_NEAR(convergence_rate(g, PinningSet::from_indices(5, {0, 1, 2, 3, 4}), 1.0, 1.0), 1.0, 1e-12);
}

TEST(SmallWorld, EdgeCountConnectivityAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const CommGraph g = small_world(10, 4, 0.2, a);
    EXPECT_EQ(g.edge_count(), 20);
    EXPECT_EQ(components(g).size(), 1u);
    EXPECT_EQ(g, small_world(10, 4, 0.2, b));
  }
}

TEST(SmallWorld, ZeroRewireIsTheRingLattice) {
  Rng rng(3);
  const CommGraph g = small_world(8, 4, 0.0, rng);
  for (int i = 0; i < 8; ++i) {
    EXPECT_TRUE(g.has_edge(i, (i + 1) % 8));
    EXPECT_TRUE(g.has_edge(i, (i + 2) % 8));
  }
}

TEST(SmallWorld, RejectsBadArguments) {
  Rng rng(1);
  EXPECT_THROW(small_world(10, 3, 0.2, rng), InvalidArgument);
  EXPECT_THROW(small_world(4, 4, 0.2, rng), InvalidArgument);
  EXPECT_THROW(small_world(10, 4, 1.5, rng), InvalidArgument);
}

TEST(Components, SplitsAndIsolatedNodes) {
  const CommGraph g(6, {{0, 1}, {1, 2}, {4, 5}});
  const auto c = components(g);
  ASSERT_EQ(c.size(), 3u);
  std::set<std::size_t> sizes;
  for (const auto& comp : c) sizes.insert(comp.size());
  EXPECT_EQ(sizes, (std::set<std::size_t>{1, 2, 3}));
}

TEST(Disrupt, ExplicitRemovalAndMissingEdge) {
  const CommGraph g = cycle_graph(5);
  const DisruptResult r = disrupt_explicit(g, {{0, 1}});
  EXPECT_EQ(r.graph.edge_count(), 4);
  EXPECT_FALSE(r.graph.has_edge(0, 1));
  EXPECT_FALSE(r.disconnected_found);
  EXPECT_THROW(disrupt_explicit(g, {{0, 2}}), InvalidArgument);
}

TEST(Disrupt, UntilDisconnectedStopsAtFirstSplit) {
  Rng rng(5);
  const CommGraph g = cycle_graph(6);
  const DisruptResult r = disrupt_until_disconnected(g, rng);
  EXPECT_TRUE(r.disconnected_found);
  EXPECT_EQ(components(r.graph).size(), 1u);
  CommGraph split = r.graph;
  split.remove_edge(r.disconnecting_edge.first, r.disconnecting_edge.second);
  EXPECT_GT(components(split).size(), 1u);
}

TEST(GraphFile, RoundTrip) {
  Rng rng(9);
  const CommGraph g = small_world(12, 4, 0.3, rng);
  EXPECT_EQ(parse_graph(format_graph(g)), g);
  EXPECT_EQ(parse_edges(format_edges(g.edges())), g.edges());
  EXPECT_THROW(parse_graph("3\n1 4\n"), Error);
  EXPECT_THROW(parse_edges("1_2"), ParseError);
}

TEST(PinningSet, MaskAndIndices) {
  const PinningSet p = PinningSet::from_indices(6, {0, 3, 5});
  EXPECT_EQ(p.count(), 3);
  EXPECT_EQ(p.mask(), 0b101001u);
  EXPECT_EQ(PinningSet::from_mask(6, p.mask()), p);
  EXPECT_EQ(p.to_string(), "1 4 6");
  EXPECT_EQ(PinningSet(3).to_string(), "-");
}

// Edge removal never raises lambda_min(L + c Psi); adding a pin never lowers it.
TEST(Property, MonotoneUnderCutsAndPins) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 4 + static_cast<int>(uniform_index(rng, 9));
    CommGraph g = small_world(m, 2 * (1 + static_cast<int>(uniform_index(rng, (m - 1) / 2))), 0.3, rng);
    PinningSet pins(m);
    for (int k = 0; k < m; ++k) pins.set(k, bernoulli(rng, 0.3));
    const double c = 0.1 + 2.0 * uniform01(rng);
    const double base = convergence_rate(g, pins, 1.0, c);
    const Edge e = g.edges()[uniform_index(rng, g.edges().size())];
    CommGraph cut = g;
    cut.remove_edge(e.first, e.second);
    EXPECT_LE(convergence_rate(cut, pins, 1.0, c), base + 1e-10);
    PinningSet more = pins;
    more.set(static_cast<int>(uniform_index(rng, m)), true);
    EXPECT_GE(convergence_rate(g, more, 1.0, c), base - 1e-10);
  }
}
