#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mgpin/rng.hpp"

namespace mgpin {

using Edge = std::pair<int, int>;  // stored with first < second

/// Undirected communication graph over the m DGs. Edges are kept sorted and
/// unique, so two graphs with the same edge set compare equal.
class CommGraph {
 public:
  CommGraph() = default;
  explicit CommGraph(int m) : m_(m) {}
  CommGraph(int m, const std::vector<Edge>& edges);

  int node_count() const { return m_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  bool has_edge(int u, int v) const;
  /// Returns false if the edge already exists.
  bool add_edge(int u, int v);
  /// Returns false if the edge does not exist.
  bool remove_edge(int u, int v);
  std::vector<int> degrees() const;

  /// Sorted edge list as text; identical edge sets give identical keys.
  std::string canonical_key() const;
  std::uint64_t hash() const;

  friend bool operator==(const CommGraph&, const CommGraph&) = default;

 private:
  int m_ = 0;
  std::vector<Edge> edges_;
};

/// Boolean pin indicators (the diagonal of the pinning matrix).
class PinningSet {
 public:
  PinningSet() = default;
  explicit PinningSet(int m) : flags_(static_cast<std::size_t>(m), 0) {}
  static PinningSet from_indices(int m, const std::vector<int>& pinned);
  static PinningSet from_mask(int m, std::uint64_t mask);

  int size() const { return static_cast<int>(flags_.size()); }
  bool pinned(int k) const { return flags_[static_cast<std::size_t>(k)] != 0; }
  void set(int k, bool on) { flags_[static_cast<std::size_t>(k)] = on ? 1 : 0; }
  int count() const;
  std::vector<int> indices() const;
  std::uint64_t mask() const;
  Eigen::VectorXd diagonal() const;
  /// 1-based, space separated, e.g. "1 2 6 9"; "-" when empty.
  std::string to_string() const;

  friend bool operator==(const PinningSet&, const PinningSet&) = default;

 private:
  std::vector<std::uint8_t> flags_;
};

Eigen::MatrixXd adjacency(const CommGraph& g);
Eigen::VectorXd degree_vector(const CommGraph& g);
/// L = D - A.
Eigen::MatrixXd laplacian(const CommGraph& g);

/// Watts-Strogatz graph: ring lattice with `mean_degree` neighbours per node,
/// each lattice edge rewired with probability `rewire_prob`; redrawn until
/// connected.
CommGraph small_world(int m, int mean_degree, double rewire_prob, Rng& rng);

struct DisruptResult {
  CommGraph graph;            // result (for until-disconnected: last connected graph)
  std::vector<Edge> removed;  // edges removed to reach `graph`
  bool disconnected_found = false;
  Edge disconnecting_edge{-1, -1};  // removal that first split the graph
};

DisruptResult disrupt_explicit(const CommGraph& g, const std::vector<Edge>& removal);
DisruptResult disrupt_random(const CommGraph& g, int count, Rng& rng);
DisruptResult disrupt_until_disconnected(const CommGraph& g, Rng& rng);

std::vector<std::vector<int>> components(const CommGraph& g);

/// Smallest eigenvalue of a symmetric matrix. Inputs with asymmetry above
/// 1e-10 (relative to the largest entry) are rejected; the rest are
/// symmetrized before solving.
double lambda_min(const Eigen::MatrixXd& m);

/// G_c * lambda_min(L + c_pin * Psi).
double convergence_rate(const CommGraph& g, const PinningSet& pins, double G_c, double c_pin);

/// Graph file: first line `m`, then one `u v` pair per line (1-based).
CommGraph parse_graph(std::string_view text);
CommGraph read_graph(const std::filesystem::path& path);
std::string format_graph(const CommGraph& g);
/// Edge list "u-v u-v" (1-based) as used in event payloads.
std::string format_edges(const std::vector<Edge>& edges);
std::vector<Edge> parse_edges(std::string_view text);

}  // namespace mgpin
