#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "decopt/types.hpp"

namespace decopt {

struct Edge {
  int i;
  int j;  // i < j

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Undirected, simple, connected graph on nodes 0..n-1. Edges are stored in
// lexicographic order, which fixes the row order of the incidence matrix.
class Graph {
 public:
  Graph(int n, std::vector<Edge> edges, std::string kind = "custom");

  int size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const Eigen::VectorXi& degrees() const { return degrees_; }
  int max_degree() const { return degrees_.maxCoeff(); }
  const std::string& kind() const { return kind_; }
  const std::vector<int>& neighbors(int i) const { return adjacency_[i]; }
  bool has_edge(int i, int j) const;
  bool is_bipartite() const;

  // One "i j" pair per line, 0-indexed.
  std::string edge_list_text() const;

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  Eigen::VectorXi degrees_;
  std::string kind_;
};

// Generators: complete | cycle | path | line | star | hypercube |
// random_regular. `degree` is only read by random_regular.
Graph build_graph(std::string_view kind, int n, int degree = 0, std::uint64_t seed = 0);

// |E| x n with +1 at (e, i) and -1 at (e, j) for edge e = (i, j), i < j.
template <typename Scalar = double>
StackT<Scalar> incidence_matrix(const Graph& g) {
  StackT<Scalar> a = StackT<Scalar>::Zero(g.edge_count(), g.size());
  for (int e = 0; e < g.edge_count(); ++e) {
    a(e, g.edges()[e].i) = Scalar(1);
    a(e, g.edges()[e].j) = Scalar(-1);
  }
  return a;
}

template <typename Scalar = double>
StackT<Scalar> adjacency_matrix(const Graph& g) {
  StackT<Scalar> adj = StackT<Scalar>::Zero(g.size(), g.size());
  for (const Edge& e : g.edges()) {
    adj(e.i, e.j) = Scalar(1);
    adj(e.j, e.i) = Scalar(1);
  }
  return adj;
}

// L_G = D - Adjacency (equals A^T A).
template <typename Scalar = double>
StackT<Scalar> laplacian_matrix(const Graph& g) {
  StackT<Scalar> lap = -adjacency_matrix<Scalar>(g);
  for (int i = 0; i < g.size(); ++i) lap(i, i) = Scalar(g.degrees()(i));
  return lap;
}

// Smallest non-zero over largest Laplacian eigenvalue, in (0, 1].
double laplacian_ratio(const Graph& g);

// Outcome of checking the three mixing-matrix conditions plus the
// structural ones (symmetry, unit row sums).
struct MixingValidation {
  bool symmetric = false;
  bool unit_row_sums = false;
  bool sparsity_matches = false;   // P3
  bool simple_unit_eigenvalue = false;  // P1
  bool spectrum_in_range = false;  // P2, inclusive of -1
  bool boundary_eigenvalue = false;  // lambda_min == -1 (bipartite case)
  std::string message;

  bool ok() const {
    return symmetric && unit_row_sums && sparsity_matches && simple_unit_eigenvalue &&
           spectrum_in_range;
  }
};

class MixingMatrix {
 public:
  // Validates but never throws; callers inspect validation().
  MixingMatrix(const Graph& g, Matrix w, double tol = 1e-10);

  const Matrix& matrix() const { return w_; }
  int size() const { return static_cast<int>(w_.rows()); }
  // Ascending eigenvalues.
  const Vector& spectrum() const { return spectrum_; }
  double lambda_min() const { return spectrum_(0); }
  double second_largest() const { return spectrum_(spectrum_.size() - 2); }
  const MixingValidation& validation() const { return validation_; }

  // D2 needs lambda_min(W) > -1/3.
  bool satisfies_d2_condition() const { return lambda_min() > -1.0 / 3.0; }
  // W >= W^2 >= 2W - I, the relation tying GT to generalized EXTRA.
  bool gt_extra_relation() const;

 private:
  Matrix w_;
  Vector spectrum_;
  MixingValidation validation_;
};

// W_ij = 1/d_max on edges, W_ii = 1 - d_i/d_max.
MixingMatrix max_degree_mixing(const Graph& g);
// (I + W) / 2 of the max-degree weights; all eigenvalues in [0, 1].
MixingMatrix lazy_max_degree_mixing(const Graph& g);
// Throws ValidationError unless the entries pass every check.
MixingMatrix explicit_mixing(const Graph& g, const Matrix& entries);

// Graph plus the matrices every algorithm reads. Immutable once built.
class Topology {
 public:
  Topology(Graph g, MixingMatrix w);

  const Graph& graph() const { return graph_; }
  const MixingMatrix& mixing() const { return mixing_; }
  const Matrix& incidence() const { return incidence_; }
  const Matrix& adjacency() const { return adjacency_; }
  const Matrix& laplacian() const { return laplacian_; }
  const Vector& laplacian_spectrum() const { return laplacian_spectrum_; }
  int size() const { return graph_.size(); }
  double spectral_ratio() const;

 private:
  Graph graph_;
  MixingMatrix mixing_;
  Matrix incidence_;
  Matrix adjacency_;
  Matrix laplacian_;
  Vector laplacian_spectrum_;
};

// One synchronous neighbour exchange: returns W X and charges one round.
template <typename Derived>
Stack mix(const MixingMatrix& w, const Eigen::MatrixBase<Derived>& x, Counters& counters) {
  if (x.rows() != w.size()) {
    throw ValidationError("mix: stack has " + std::to_string(x.rows()) + " rows, W is " +
                          std::to_string(w.size()) + "x" + std::to_string(w.size()));
  }
  ++counters.comm_rounds;
  return w.matrix() * x;
}

// L_G X, also one exchange round.
template <typename Derived>
Stack apply_laplacian(const Topology& topo, const Eigen::MatrixBase<Derived>& x,
                      Counters& counters) {
  if (x.rows() != topo.size()) throw ValidationError("apply_laplacian: dimension mismatch");
  ++counters.comm_rounds;
  return topo.laplacian() * x;
}

// Sum of neighbour values, Adjacency X: one exchange round.
template <typename Derived>
Stack neighbor_sum(const Topology& topo, const Eigen::MatrixBase<Derived>& x, Counters& counters) {
  if (x.rows() != topo.size()) throw ValidationError("neighbor_sum: dimension mismatch");
  ++counters.comm_rounds;
  return topo.adjacency() * x;
}

}  // namespace decopt
