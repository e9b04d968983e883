#include "decopt/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace decopt {
namespace {

constexpr int kRandomRegularRetries = 1000;

bool connected(int n, const std::vector<std::vector<int>>& adj) {
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == n;
}

Vector symmetric_spectrum(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

// Pairing model: stubs are matched one pair at a time, redrawing a partner
// that would create a loop or a repeated edge. A dead end or a disconnected
// result restarts the attempt.
std::vector<Edge> random_regular_edges(int n, int degree, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < kRandomRegularRetries; ++attempt) {
    std::vector<int> stubs;
    stubs.reserve(static_cast<std::size_t>(n) * degree);
    for (int v = 0; v < n; ++v) stubs.insert(stubs.end(), degree, v);
    std::set<Edge> chosen;
    bool dead_end = false;
    while (!stubs.empty() && !dead_end) {
      bool placed = false;
      for (int tries = 0; tries < 50 && !placed; ++tries) {
        std::uniform_int_distribution<std::size_t> pick(0, stubs.size() - 1);
        std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        if (a == b) continue;
        int u = stubs[a], v = stubs[b];
        if (u == v) continue;
        Edge e{std::min(u, v), std::max(u, v)};
        if (chosen.count(e)) continue;
        chosen.insert(e);
        // remove the larger index first so the smaller stays valid
        stubs.erase(stubs.begin() + static_cast<std::ptrdiff_t>(std::max(a, b)));
        stubs.erase(stubs.begin() + static_cast<std::ptrdiff_t>(std::min(a, b)));
        placed = true;
      }
      dead_end = !placed;
    }
    if (dead_end) continue;
    std::vector<std::vector<int>> adj(n);
    for (const Edge& e : chosen) {
      adj[e.i].push_back(e.j);
      adj[e.j].push_back(e.i);
    }
    if (!connected(n, adj)) continue;
    return {chosen.begin(), chosen.end()};
  }
  throw ValidationError("random_regular: no connected simple graph after " +
                        std::to_string(kRandomRegularRetries) + " attempts");
}

}  // namespace

Graph::Graph(int n, std::vector<Edge> edges, std::string kind)
    : n_(n), edges_(std::move(edges)), adjacency_(n > 0 ? n : 0), kind_(std::move(kind)) {
  if (n < 2) throw ValidationError("graph needs at least 2 nodes");
  for (Edge& e : edges_) {
    if (e.i == e.j) throw ValidationError("graph: self-loop at node " + std::to_string(e.i));
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.i < 0 || e.j >= n) throw ValidationError("graph: edge endpoint out of range");
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ValidationError("graph: duplicate edge");
  }
  degrees_ = Eigen::VectorXi::Zero(n);
  for (const Edge& e : edges_) {
    adjacency_[e.i].push_back(e.j);
    adjacency_[e.j].push_back(e.i);
    ++degrees_(e.i);
    ++degrees_(e.j);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
  if (!connected(n, adjacency_)) throw ValidationError("graph (" + kind_ + ") is not connected");
}

bool Graph::has_edge(int i, int j) const {
  if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_) return false;
  const auto& nb = adjacency_[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

bool Graph::is_bipartite() const {
  std::vector<int> colour(n_, -1);
  std::queue<int> frontier;
  colour[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adjacency_[u]) {
      if (colour[v] < 0) {
        colour[v] = 1 - colour[u];
        frontier.push(v);
      } else if (colour[v] == colour[u]) {
        return false;
      }
    }
  }
  return true;
}

std::string Graph::edge_list_text() const {
  std::ostringstream out;
  for (const Edge& e : edges_) out << e.i << ' ' << e.j << '\n';
  return out.str();
}

Graph build_graph(std::string_view kind, int n, int degree, std::uint64_t seed) {
  if (n < 2) throw ValidationError("build_graph: n must be >= 2");
  std::vector<Edge> edges;
  if (kind == "complete") {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  } else if (kind == "path" || kind == "line") {
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  } else if (kind == "cycle") {
    if (n < 3) throw ValidationError("build_graph: cycle needs n >= 3");
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
    edges.push_back({0, n - 1});
  } else if (kind == "star") {
    for (int i = 1; i < n; ++i) edges.push_back({0, i});
  } else if (kind == "hypercube") {
    if ((n & (n - 1)) != 0) throw ValidationError("build_graph: hypercube needs n a power of two");
    for (int i = 0; i < n; ++i)
      for (int bit = 1; bit < n; bit <<= 1)
        if ((i ^ bit) > i) edges.push_back({i, i ^ bit});
  } else if (kind == "random_regular") {
    if (degree < 1 || degree >= n) {
      throw ValidationError("build_graph: random_regular needs 1 <= degree < n");
    }
    if ((static_cast<long>(n) * degree) % 2 != 0) {
      throw ValidationError("build_graph: random_regular needs n*degree even");
    }
    std::mt19937_64 rng(seed);
    edges = random_regular_edges(n, degree, rng);
  } else {
    throw ValidationError("build_graph: unknown graph kind '" + std::string(kind) + "'");
  }
  return Graph(n, std::move(edges), std::string(kind));
}

double laplacian_ratio(const Graph& g) {
  Vector ev = symmetric_spectrum(laplacian_matrix(g));
  double ratio = ev(1) / ev(ev.size() - 1);
  // The ratio is at most 1; snap rounding noise from equal eigenvalues.
  if (ratio > 1.0 - 64 * std::numeric_limits<double>::epsilon()) ratio = 1.0;
  return ratio;
}

MixingMatrix::MixingMatrix(const Graph& g, Matrix w, double tol) : w_(std::move(w)) {
  const int n = g.size();
  if (w_.rows() != n || w_.cols() != n) {
    throw ValidationError("mixing matrix must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  MixingValidation& v = validation_;
  std::ostringstream why;
  v.symmetric = (w_ - w_.transpose()).cwiseAbs().maxCoeff() <= tol;
  if (!v.symmetric) why << "not symmetric; ";
  v.unit_row_sums = (w_.rowwise().sum().array() - 1.0).abs().maxCoeff() <= tol;
  if (!v.unit_row_sums) why << "rows do not sum to 1; ";
  v.sparsity_matches = true;
  for (int i = 0; i < n && v.sparsity_matches; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      bool edge = g.has_edge(i, j);
      if ((edge && !(w_(i, j) > 0.0)) || (!edge && w_(i, j) != 0.0)) {
        v.sparsity_matches = false;
        why << "sparsity mismatch at (" << i << "," << j << "); ";
        break;
      }
    }
  }
  spectrum_ = symmetric_spectrum(0.5 * (w_ + w_.transpose()));
  const double top = spectrum_(n - 1);
  v.simple_unit_eigenvalue = std::abs(top - 1.0) <= tol && spectrum_(n - 2) < 1.0 - tol;
  if (!v.simple_unit_eigenvalue) why << "eigenvalue 1 is not simple (P1); ";
  v.spectrum_in_range = spectrum_(0) >= -1.0 - tol && top <= 1.0 + tol;
  if (!v.spectrum_in_range) why << "eigenvalues outside [-1, 1] (P2); ";
  v.boundary_eigenvalue = spectrum_(0) <= -1.0 + tol;
  if (v.boundary_eigenvalue) why << "warning: lambda_min(W) = -1; ";
  v.message = why.str();
  if (v.message.size() >= 2) v.message.resize(v.message.size() - 2);
}

bool MixingMatrix::gt_extra_relation() const {
  // Shared eigenvectors reduce both orderings to 0 <= lambda <= 1.
  constexpr double tol = 1e-12;
  return spectrum_(0) >= -tol && spectrum_(spectrum_.size() - 1) <= 1.0 + tol;
}

MixingMatrix max_degree_mixing(const Graph& g) {
  const double dmax = g.max_degree();
  Matrix w = adjacency_matrix(g) / dmax;
  for (int i = 0; i < g.size(); ++i) w(i, i) = 1.0 - g.degrees()(i) / dmax;
  return MixingMatrix(g, std::move(w));
}

MixingMatrix lazy_max_degree_mixing(const Graph& g) {
  Matrix w = 0.5 * (Matrix::Identity(g.size(), g.size()) + max_degree_mixing(g).matrix());
  return MixingMatrix(g, std::move(w));
}

MixingMatrix explicit_mixing(const Graph& g, const Matrix& entries) {
  MixingMatrix w(g, entries);
  if (!w.validation().ok()) {
    throw ValidationError("explicit mixing matrix rejected: " + w.validation().message);
  }
  return w;
}

Topology::Topology(Graph g, MixingMatrix w)
    : graph_(std::move(g)),
      mixing_(std::move(w)),
      incidence_(incidence_matrix(graph_)),
      adjacency_(adjacency_matrix(graph_)),
      laplacian_(laplacian_matrix(graph_)) {
  if (mixing_.size() != graph_.size()) throw ValidationError("topology: W size != graph size");
  laplacian_spectrum_ = symmetric_spectrum(laplacian_);
}

double Topology::spectral_ratio() const { return laplacian_ratio(graph_); }

}  // namespace decopt
