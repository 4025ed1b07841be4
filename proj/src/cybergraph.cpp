#include "mgpin/cybergraph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/textio.hpp"

namespace mgpin {

namespace {

Edge ordered(int u, int v) { return u < v ? Edge{u, v} : Edge{v, u}; }

}  // namespace

CommGraph::CommGraph(int m, const std::vector<Edge>& edges) : m_(m) {
  for (const auto& [u, v] : edges)
    if (!add_edge(u, v)) throw InvalidArgument(fmt::format("duplicate edge {}-{}", u + 1, v + 1));
}

bool CommGraph::has_edge(int u, int v) const {
  return std::binary_search(edges_.begin(), edges_.end(), ordered(u, v));
}

bool CommGraph::add_edge(int u, int v) {
  if (u == v) throw InvalidArgument(fmt::format("self-loop at node {}", u + 1));
  if (u < 0 || v < 0 || u >= m_ || v >= m_)
    throw InvalidArgument(fmt::format("edge {}-{} outside 1..{}", u + 1, v + 1, m_));
  const Edge e = ordered(u, v);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
  if (it != edges_.end() && *it == e) return false;
  edges_.insert(it, e);
  return true;
}

bool CommGraph::remove_edge(int u, int v) {
  const Edge e = ordered(u, v);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
  if (it == edges_.end() || *it != e) return false;
  edges_.erase(it);
  return true;
}

std::vector<int> CommGraph::degrees() const {
  std::vector<int> d(static_cast<std::size_t>(m_), 0);
  for (const auto& [u, v] : edges_) {
    ++d[u];
    ++d[v];
  }
  return d;
}

std::string CommGraph::canonical_key() const {
  std::string key = std::to_string(m_) + ":";
  for (const auto& [u, v] : edges_) key += fmt::format("{}-{},", u, v);
  return key;
}

std::uint64_t CommGraph::hash() const { return fnv1a(canonical_key()); }

PinningSet PinningSet::from_indices(int m, const std::vector<int>& pinned) {
  PinningSet p(m);
  for (int k : pinned) {
    if (k < 0 || k >= m) throw InvalidArgument(fmt::format("pin {} outside 1..{}", k + 1, m));
    p.set(k, true);
  }
  return p;
}

PinningSet PinningSet::from_mask(int m, std::uint64_t mask) {
  PinningSet p(m);
  for (int k = 0; k < m; ++k) p.set(k, (mask >> k) & 1U);
  return p;
}

int PinningSet::count() const { return static_cast<int>(std::count(flags_.begin(), flags_.end(), 1)); }

std::vector<int> PinningSet::indices() const {
  std::vector<int> out;
  for (int k = 0; k < size(); ++k)
    if (pinned(k)) out.push_back(k);
  return out;
}

std::uint64_t PinningSet::mask() const {
  std::uint64_t m = 0;
  for (int k = 0; k < size() && k < 64; ++k)
    if (pinned(k)) m |= (std::uint64_t{1} << k);
  return m;
}

Eigen::VectorXd PinningSet::diagonal() const {
  Eigen::VectorXd d(size());
  for (int k = 0; k < size(); ++k) d(k) = pinned(k) ? 1.0 : 0.0;
  return d;
}

std::string PinningSet::to_string() const {
  std::string s;
  for (int k : indices()) s += (s.empty() ? "" : " ") + std::to_string(k + 1);
  return s.empty() ? "-" : s;
}

Eigen::MatrixXd adjacency(const CommGraph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.node_count(), g.node_count());
  for (const auto& [u, v] : g.edges()) a(u, v) = a(v, u) = 1.0;
  return a;
}

Eigen::VectorXd degree_vector(const CommGraph& g) {
  const auto d = g.degrees();
  Eigen::VectorXd out(g.node_count());
  for (int k = 0; k < g.node_count(); ++k) out(k) = d[k];
  return out;
}

Eigen::MatrixXd laplacian(const CommGraph& g) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(g.node_count(), g.node_count());
  for (const auto& [u, v] : g.edges()) {
    l(u, v) -= 1.0;
    l(v, u) -= 1.0;
    l(u, u) += 1.0;
    l(v, v) += 1.0;
  }
  return l;
}

std::vector<std::vector<int>> components(const CommGraph& g) {
  const int m = g.node_count();
  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(m));
  for (const auto& [u, v] : g.edges()) {
    nbr[u].push_back(v);
    nbr[v].push_back(u);
  }
  std::vector<int> label(static_cast<std::size_t>(m), -1);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < m; ++s) {
    if (label[s] >= 0) continue;
    std::vector<int> comp{s};
    label[s] = static_cast<int>(out.size());
    for (std::size_t i = 0; i < comp.size(); ++i)
      for (int w : nbr[comp[i]])
        if (label[w] < 0) {
          label[w] = label[s];
          comp.push_back(w);
        }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

CommGraph small_world(int m, int mean_degree, double rewire_prob, Rng& rng) {
  if (mean_degree <= 0 || mean_degree % 2 != 0 || mean_degree >= m)
    throw InvalidArgument(fmt::format("small_world: mean degree {} must be even, positive and < m = {}",
                                      mean_degree, m));
  if (!(rewire_prob >= 0.0 && rewire_prob <= 1.0))
    throw InvalidArgument("small_world: rewire probability must lie in [0, 1]");
  const int half = mean_degree / 2;
  // A complete graph leaves no target to rewire to; the lattice is then the only option.
  const bool can_rewire = m * half < m * (m - 1) / 2;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    CommGraph g(m);
    for (int u = 0; u < m; ++u)
      for (int j = 1; j <= half; ++j) g.add_edge(u, (u + j) % m);
    if (can_rewire && rewire_prob > 0.0) {
      for (int j = 1; j <= half; ++j) {
        for (int u = 0; u < m; ++u) {
          const int v = (u + j) % m;
          if (!bernoulli(rng, rewire_prob)) continue;
          if (!g.has_edge(u, v)) continue;
          if (static_cast<int>(g.degrees()[u]) >= m - 1) continue;
          int w = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));
          while (w == u || g.has_edge(u, w)) w = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));
          g.remove_edge(u, v);
          g.add_edge(u, w);
        }
      }
    }
    if (components(g).size() == 1) return g;
  }
  throw Error("small_world: failed to draw a connected graph");
}

DisruptResult disrupt_explicit(const CommGraph& g, const std::vector<Edge>& removal) {
  DisruptResult r{g, {}, false, {-1, -1}};
  for (const auto& [u, v] : removal) {
    if (!r.graph.remove_edge(u, v))
      throw InvalidArgument(fmt::format("cannot remove missing edge {}-{}", u + 1, v + 1));
    r.removed.push_back(ordered(u, v));
  }
  return r;
}

DisruptResult disrupt_random(const CommGraph& g, int count, Rng& rng) {
  if (count < 0 || count > g.edge_count())
    throw InvalidArgument(fmt::format("cannot remove {} of {} edges", count, g.edge_count()));
  DisruptResult r{g, {}, false, {-1, -1}};
  for (int i = 0; i < count; ++i) {
    const auto& edges = r.graph.edges();
    const Edge e = edges[uniform_index(rng, edges.size())];
    r.graph.remove_edge(e.first, e.second);
    r.removed.push_back(e);
  }
  return r;
}

DisruptResult disrupt_until_disconnected(const CommGraph& g, Rng& rng) {
  DisruptResult r{g, {}, false, {-1, -1}};
  if (components(g).size() > 1) return r;
  while (r.graph.edge_count() > 0) {
    const auto& edges = r.graph.edges();
    const Edge e = edges[uniform_index(rng, edges.size())];
    CommGraph next = r.graph;
    next.remove_edge(e.first, e.second);
    if (components(next).size() > 1) {
      r.disconnected_found = true;
      r.disconnecting_edge = e;
      return r;
    }
    r.graph = std::move(next);
    r.removed.push_back(e);
  }
  return r;
}

double lambda_min(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("lambda_min: matrix must be square");
  if (m.rows() == 0) throw InvalidArgument("lambda_min: empty matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("lambda_min: matrix is not symmetric");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericFailure("lambda_min: eigensolver failed");
  return es.eigenvalues()(0);
}

double convergence_rate(const CommGraph& g, const PinningSet& pins, double G_c, double c_pin) {
  if (!(G_c > 0.0) || !(c_pin > 0.0)) throw InvalidArgument("convergence_rate: gains must be > 0");
  if (pins.size() != g.node_count()) throw InvalidArgument("convergence_rate: pin vector size mismatch");
  Eigen::MatrixXd m = laplacian(g);
  m.diagonal() += c_pin * pins.diagonal();
  return G_c * lambda_min(m);
}

CommGraph parse_graph(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int m = -1;
  CommGraph g;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (m < 0) {
      if (tok.size() != 1) throw ParseError(fmt::format("graph line {}: expected node count", line_no));
      m = textio::to_int(tok[0]);
      if (m <= 0) throw ParseError("graph node count must be positive");
      g = CommGraph(m);
      continue;
    }
    if (tok.size() != 2) throw ParseError(fmt::format("graph line {}: expected 'u v'", line_no));
    const int u = textio::to_int(tok[0]) - 1;
    const int v = textio::to_int(tok[1]) - 1;
    if (!g.add_edge(u, v)) throw ParseError(fmt::format("graph line {}: duplicate edge", line_no));
  }
  if (m < 0) throw ParseError("graph file is empty");
  return g;
}

CommGraph read_graph(const std::filesystem::path& path) { return parse_graph(textio::read_file(path)); }

std::string format_graph(const CommGraph& g) {
  std::string s = std::to_string(g.node_count()) + "\n";
  for (const auto& [u, v] : g.edges()) s += fmt::format("{} {}\n", u + 1, v + 1);
  return s;
}

std::string format_edges(const std::vector<Edge>& edges) {
  std::string s;
  for (const auto& [u, v] : edges) s += fmt::format("{}{}-{}", s.empty() ? "" : " ", u + 1, v + 1);
  return s;
}

std::vector<Edge> parse_edges(std::string_view text) {
  std::vector<Edge> out;
  std::istringstream in{std::string(text)};
  for (std::string tok; in >> tok;) {
    const auto dash = tok.find('-');
    if (dash == std::string::npos) throw ParseError("edge '" + tok + "' must look like u-v");
    out.emplace_back(textio::to_int(tok.substr(0, dash)) - 1, textio::to_int(tok.substr(dash + 1)) - 1);
  }
  return out;
}

}  // namespace mgpin
