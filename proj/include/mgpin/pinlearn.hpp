#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgpin/mlp.hpp"
#include "mgpin/pindecide.hpp"

namespace mgpin {

/// Lower triangle including the diagonal, row by row: m(m+1)/2 entries.
Eigen::VectorXd vectorize_laplacian(const Eigen::MatrixXd& L);
/// Inverse of vectorize_laplacian; m is recovered from the length.
Eigen::MatrixXd devectorize_laplacian(const Eigen::VectorXd& f);

struct TrainingSample {
  std::uint64_t index = 0;  // candidate index the sample was drawn from
  Eigen::VectorXd features;
  std::vector<std::uint8_t> labels;
  int edge_count = 0;
};

struct DisruptionPolicy {
  int max_removals = 0;        // 0..max_removals random edge cuts per sample
  bool keep_connected = true;  // skip cuts that would split the graph
};

struct DatasetParams {
  int count = 10000;
  int m = 10;
  int mean_degree = 4;
  double rewire_prob = 0.2;
  DisruptionPolicy disruption;
  double G_c = 30.0;
  double c_pin = 1.0;
  double rho_star = 10.0;
  GaParams ga;                  // labels for m > 12; seed is overridden per sample
  std::uint64_t seed = 1;
  long max_candidates = 0;      // 0 selects 50 * count
};

struct DatasetStats {
  long candidates = 0;
  long duplicates = 0;
  long infeasible = 0;
};

/// Monte-Carlo training set: per candidate index, a small-world graph, random
/// cuts, and the optimal pin set as labels. Candidates are generated in
/// parallel from independent seeded streams and merged in index order, so
/// the thread count never changes the result. Duplicate edge sets are kept
/// once.
std::vector<TrainingSample> gen_dataset(const DatasetParams& params, DatasetStats* stats = nullptr);
/// Single-threaded reference for gen_dataset.
std::vector<TrainingSample> gen_dataset_serial(const DatasetParams& params, DatasetStats* stats = nullptr);

/// Graph behind one candidate index (same stream as gen_dataset).
CommGraph dataset_graph(const DatasetParams& params, std::uint64_t index);

/// CSV rows `f1..fK,y1..ym` with a header line.
std::string format_dataset_csv(const std::vector<TrainingSample>& samples, int m);
std::vector<TrainingSample> parse_dataset_csv(std::string_view text);

/// Features as columns / labels as columns for training.
void dataset_matrices(const std::vector<TrainingSample>& samples, Eigen::MatrixXd& x, Eigen::MatrixXd& y);

struct LearnedDecision {
  PinningDecision decision;
  std::string source;  // "learned", "repaired" or "fallback"
  Eigen::VectorXd probabilities;
  double latency_s = 0.0;
};

/// Thresholds the predicted pin probabilities at 0.5. An infeasible candidate
/// is repaired by adding pins in descending probability, then trimmed by
/// dropping pins in ascending probability while it stays feasible. If even
/// all pins fail, the GA decides.
LearnedDecision decide(const MlpModel& model, const PinningProblem& problem, const GaParams& fallback);

struct EvalReport {
  int graphs = 0;
  int feasible_instances = 0;   // the exhaustive/GA reference found a feasible set
  int feasible_returned = 0;    // decide returned a verify-feasible set
  int learned = 0;              // by source
  int repaired = 0;
  int fallback = 0;
  int optimal_cardinality = 0;  // returned cardinality equals the reference
  double median_latency_s = 0.0;
  double max_latency_s = 0.0;
};

/// Runs decide on `count` graphs drawn like the dataset but from a stream
/// derived from `params.seed` under "eval", so they are disjoint from the
/// training stream.
EvalReport evaluate_decisions(const MlpModel& model, const DatasetParams& params, int count);
std::string format_eval_report(const EvalReport& r);

}  // namespace mgpin
