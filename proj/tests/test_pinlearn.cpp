#include <gtest/gtest.h>

#include <set>

#include "mgpin/error.hpp"
#include "mgpin/pinlearn.hpp"
#include "test_support.hpp"

using namespace mgpin;
using mgpin::testing::cycle_graph;
using mgpin::testing::path_graph;

namespace {

DatasetParams small_params(int count) {
  DatasetParams p;
  p.count = count;
  p.disruption.max_removals = 4;
  p.seed = 21;
  return p;
}

// Output-layer biases pushed to `bias` so every probability sits on one side.
MlpModel biased_model(int m, double bias, std::uint64_t seed) {
  Rng rng(seed);
  MlpModel model = MlpModel::create({m * (m + 1) / 2, 8, m}, rng);
  model.biases.back().setConstant(bias);
  model.weights.back().setZero();
  return model;
}

}  // namespace

TEST(Vectorize, LengthsAndRoundTrip) {
  const Eigen::MatrixXd L = laplacian(cycle_graph(10));
  const Eigen::VectorXd f = vectorize_laplacian(L);
  EXPECT_EQ(f.size(), 55);
  EXPECT_EQ(devectorize_laplacian(f), L);
  const Eigen::MatrixXd L2 = laplacian(path_graph(2));
  EXPECT_EQ(vectorize_laplacian(L2).size(), 3);
  EXPECT_EQ(vectorize_laplacian(L2), Eigen::Vector3d(1, -1, 1));
  EXPECT_EQ(devectorize_laplacian(vectorize_laplacian(L2)), L2);
}

TEST(Vectorize, RejectsAsymmetricAndBadLength) {
  Eigen::MatrixXd L = laplacian(path_graph(3));
  L(0, 2) = 0.5;
  EXPECT_THROW(vectorize_laplacian(L), InvalidArgument);
  EXPECT_THROW(devectorize_laplacian(Eigen::VectorXd::Zero(4)), InvalidArgument);
}

TEST(Dataset, SamplesAreFeasibleAndDistinct) {
  const DatasetParams p = small_params(100);
  DatasetStats st;
  const auto samples = gen_dataset(p, &st);
  ASSERT_EQ(samples.size(), 100u);
  std::set<std::string> keys;
  for (const auto& s : samples) {
    const Eigen::MatrixXd L = devectorize_laplacian(s.features);
    const CommGraph g = dataset_graph(p, s.index);
    EXPECT_EQ(L, laplacian(g));
    EXPECT_EQ(s.edge_count, g.edge_count());
    keys.insert(g.canonical_key());
    std::vector<int> pins;
    for (int k = 0; k < p.m; ++k)
      if (s.labels[k]) pins.push_back(k);
    EXPECT_TRUE(verify(PinningProblem{g, p.G_c, p.c_pin, p.rho_star}, PinningSet::from_indices(p.m, pins)).feasible);
  }
  EXPECT_EQ(keys.size(), samples.size());
  EXPECT_EQ(st.candidates, 100 + st.duplicates + st.infeasible);
}

TEST(Dataset, ParallelMatchesSerial) {
  const DatasetParams p = small_params(150);
  DatasetStats a, b;
  const auto par = gen_dataset(p, &a);
  const auto ser = gen_dataset_serial(p, &b);
  EXPECT_EQ(format_dataset_csv(par, p.m), format_dataset_csv(ser, p.m));
  EXPECT_EQ(a.candidates, b.candidates);
  EXPECT_EQ(a.duplicates, b.duplicates);
}

TEST(Dataset, NoRemovalsKeepsAllEdges) {
  DatasetParams p = small_params(20);
  p.disruption.max_removals = 0;
  for (const auto& s : gen_dataset(p)) EXPECT_EQ(s.edge_count, 20);
}

TEST(Dataset, ConnectedPolicyHolds) {
  DatasetParams p = small_params(60);
  p.disruption.max_removals = 12;
  for (const auto& s : gen_dataset(p)) EXPECT_EQ(components(dataset_graph(p, s.index)).size(), 1u);
}

TEST(Dataset, CsvRoundTripAndDeterminism) {
  const DatasetParams p = small_params(30);
  const std::string csv = format_dataset_csv(gen_dataset(p), p.m);
  EXPECT_EQ(csv, format_dataset_csv(gen_dataset(p), p.m));
  EXPECT_EQ(csv.substr(0, 8), "f1,f2,f3");
  const auto parsed = parse_dataset_csv(csv);
  ASSERT_EQ(parsed.size(), 30u);
  EXPECT_EQ(format_dataset_csv(parsed, p.m), csv);
  Eigen::MatrixXd x, y;
  dataset_matrices(parsed, x, y);
  EXPECT_EQ(x.rows(), 55);
  EXPECT_EQ(y.rows(), 10);
  EXPECT_EQ(x.cols(), 30);
}

TEST(Dataset, ExhaustedCandidateBudgetThrows) {
  DatasetParams p = small_params(50);
  p.rho_star = 1e6;  // nothing is feasible
  p.max_candidates = 40;
  EXPECT_THROW(gen_dataset(p), Error);
}

TEST(Decide, ConfidentModelIsUsedDirectly) {
  const MlpModel model = biased_model(10, 8.0, 1);
  const PinningProblem problem{cycle_graph(10), 30.0, 1.0, 10.0};
  const LearnedDecision d = decide(model, problem, GaParams{});
  EXPECT_EQ(d.source, "learned");
  EXPECT_EQ(d.decision.cardinality, 10);
  EXPECT_TRUE(d.decision.feasible);
  EXPECT_GE(d.latency_s, 0.0);
}

TEST(Decide, EmptyPredictionIsRepairedToMinimalSet) {
  const MlpModel model = biased_model(10, -8.0, 1);
  const PinningProblem problem{cycle_graph(10), 30.0, 1.0, 10.0};
  const LearnedDecision d = decide(model, problem, GaParams{});
  EXPECT_EQ(d.source, "repaired");
  ASSERT_TRUE(d.decision.feasible);
  EXPECT_TRUE(verify(problem, d.decision.pins).feasible);
  for (int k : d.decision.pins.indices()) {
    PinningSet fewer = d.decision.pins;
    fewer.set(k, false);
    EXPECT_FALSE(verify(problem, fewer).feasible) << "pin " << k + 1 << " is redundant";
  }
}

TEST(Decide, UnreachableTargetFallsBack) {
  const MlpModel model = biased_model(10, 0.0, 1);
  const PinningProblem problem{cycle_graph(10), 30.0, 1.0, 31.0};
  const LearnedDecision d = decide(model, problem, GaParams{});
  EXPECT_EQ(d.source, "fallback");
  EXPECT_FALSE(d.decision.feasible);
}

TEST(Decide, SizeMismatchThrows) {
  EXPECT_THROW(decide(biased_model(5, 0.0, 1), PinningProblem{cycle_graph(10)}, GaParams{}), InvalidArgument);
}

// Whatever the network predicts, a feasible instance gets a feasible answer.
TEST(Decide, AdversarialProbabilitiesStayFeasible) {
  const DatasetParams p = small_params(1);
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    Rng init(derive_seed(5, static_cast<std::uint64_t>(trial)));
    MlpModel model = MlpModel::create({55, 6, 10}, init);
    for (long i = 0; i < model.biases.back().size(); ++i) model.biases.back()(i) = 6.0 * standard_normal(rng);
    const PinningProblem problem{dataset_graph(p, static_cast<std::uint64_t>(trial)), 30.0, 1.0,
                                 5.0 + 20.0 * uniform01(rng)};
    const bool feasible = verify(problem, PinningSet::from_mask(10, (1u << 10) - 1)).feasible;
    const LearnedDecision d = decide(model, problem, GaParams{});
    EXPECT_EQ(d.decision.feasible, feasible);
    if (feasible) EXPECT_TRUE(verify(problem, d.decision.pins).feasible);
  }
}

TEST(Evaluate, CountsAddUp) {
  DatasetParams p = small_params(1);
  const MlpModel model = biased_model(10, -8.0, 3);
  const EvalReport r = evaluate_decisions(model, p, 20);
  EXPECT_EQ(r.graphs, 20);
  EXPECT_EQ(r.learned + r.repaired + r.fallback, 20);
  EXPECT_EQ(r.feasible_returned, r.feasible_instances);
  EXPECT_LE(r.optimal_cardinality, r.feasible_instances);
  EXPECT_NE(format_eval_report(r).find("learned_share"), std::string::npos);
}
