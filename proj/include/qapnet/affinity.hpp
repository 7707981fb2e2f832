#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "qapnet/matrix.hpp"
#include "qapnet/numerics.hpp"

namespace qapnet {

struct Point {
  double x = 0.0;
  double y = 0.0;
};
using PointSet = std::vector<Point>;

using Edge = std::pair<std::size_t, std::size_t>;
using Triangle = std::array<std::size_t, 3>;

/// Undirected geometric graph. Edges satisfy first < second; the edge feature
/// is the Euclidean edge length. Delaunay graphs also carry their triangles.
struct Graph {
  PointSet points;
  std::vector<Edge> edges;
  std::vector<double> edge_feature;
  std::vector<Triangle> triangles;

  std::size_t size() const { return points.size(); }
};

/// Delaunay triangulation (Bowyer-Watson). Cocircular and near-degenerate
/// inputs are retried under a deterministic 1e-9-scale perturbation.
Graph delaunay(const PointSet& points);
Graph fully_connected(const PointSet& points);

/// Second-order affinity over edge lengths:
/// K(ia, jb) = exp(-(f_ij - f_ab)^2 / sigma2) for (i,j) in E1, (a,b) in E2,
/// both orientations. The diagonal is node_affinity(i, a) when provided.
/// Entries that evaluate to zero are not stored.
SparseMatrix build_affinity_matrix(const Graph& g1, const Graph& g2, double sigma2,
                                   const Matrix* node_affinity = nullptr);

struct TensorDiagnostics {
  std::size_t degenerate_triangles = 0;
};

/// Third-order affinity over interior-angle sines. Hyperedges of g1 are its
/// triangles (Delaunay), hyperedges of g2 are all node triples:
/// H(w1,w2,w3) = exp(-(sum_q |sin t1_q - sin t2_q|) / sigma3^2).
SparseTensor3 build_affinity_tensor(const Graph& g1, const Graph& g2, double sigma3,
                                    TensorDiagnostics* diagnostics = nullptr);

/// Interior angle sines at each vertex of triangle (a, b, c), in that order.
/// Returns nullopt for a triangle with a zero-length side.
std::optional<std::array<double, 3>> triangle_sines(const Point& a, const Point& b, const Point& c);

enum class Sense { kMaximize, kMinimize };

struct LawlerForm {
  SparseMatrix k;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

struct KoopmansBeckmannForm {
  Matrix f1;
  Matrix f2;
  std::optional<Matrix> kp;
};

struct QapInstance {
  std::variant<LawlerForm, KoopmansBeckmannForm> form;
  Sense sense = Sense::kMaximize;

  const LawlerForm& lawler() const;
};

QapInstance make_lawler(SparseMatrix k, std::size_t n1, std::size_t n2, Sense sense = Sense::kMaximize);

/// Association graph of a Lawler instance: vertices are candidate
/// correspondences, weights are the off-diagonal affinities restricted to
/// one-to-one compatible pairs, v0 is the diagonal (or all ones when the
/// diagonal is zero) and a_norm is the column-normalized binary adjacency.
/// `weights` and `a_norm` share one sparsity pattern.
struct AssociationGraph {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  SparseMatrix weights;
  std::vector<double> v0;
  SparseMatrix a_norm;

  std::size_t vertex_count() const { return n1 * n2; }
};

AssociationGraph build_association(const QapInstance& instance);

double lawler_objective(const SparseMatrix& k, const Assignment& x);
double lawler_objective(const SparseMatrix& k, const Matrix& x);
double kb_objective(const Matrix& f1, const Matrix& f2, const Matrix* kp, const Assignment& x);
double hyper_objective(const SparseTensor3& h, const Assignment& x);

/// Lawler form with the same quadratic objective as tr(X^T F1 X F2) + tr(Kp^T X).
/// The affinity is the symmetric part of F2^T (x) F1, which equals F2 (x) F1
/// when F1 and F2 are both symmetric; vec(Kp) is added on the diagonal.
QapInstance kb_to_lawler(const Matrix& f1, const Matrix& f2, const Matrix* kp = nullptr,
                         std::size_t max_entries = kMaxDenseEntries);

}  // namespace qapnet
