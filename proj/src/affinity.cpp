#include "qapnet/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qapnet/error.hpp"

namespace qapnet {

SparseMatrix build_affinity_matrix(const Graph& g1, const Graph& g2, double sigma2, const Matrix* node_affinity) {
  if (!(sigma2 > 0.0)) throw InvalidArgument("build_affinity_matrix: sigma2 must be positive");
  const std::size_t n1 = g1.size(), n2 = g2.size();
  const std::size_t dim = n1 * n2;
  if (node_affinity && (node_affinity->rows() != n1 || node_affinity->cols() != n2)) {
    throw InvalidArgument("build_affinity_matrix: node affinity must be n1 x n2");
  }

  std::vector<Triplet> entries;
  for (std::size_t e1 = 0; e1 < g1.edges.size(); ++e1) {
    const auto [i, j] = g1.edges[e1];
    for (std::size_t e2 = 0; e2 < g2.edges.size(); ++e2) {
      const auto [a, b] = g2.edges[e2];
      const double diff = g1.edge_feature[e1] - g2.edge_feature[e2];
      const double value = std::exp(-diff * diff / sigma2);
      if (value == 0.0) continue;
      // Both orientations of each edge pair.
      entries.push_back({vec_index(i, a, n1), vec_index(j, b, n1), value});
      entries.push_back({vec_index(j, b, n1), vec_index(i, a, n1), value});
      entries.push_back({vec_index(i, b, n1), vec_index(j, a, n1), value});
      entries.push_back({vec_index(j, a, n1), vec_index(i, b, n1), value});
    }
  }
  if (node_affinity) {
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t a = 0; a < n2; ++a) {
        const double v = (*node_affinity)(i, a);
        if (v != 0.0) entries.push_back({vec_index(i, a, n1), vec_index(i, a, n1), v});
      }
  }
  return SparseMatrix(dim, dim, std::move(entries));
}

std::optional<std::array<double, 3>> triangle_sines(const Point& a, const Point& b, const Point& c) {
  const double ab = std::hypot(b.x - a.x, b.y - a.y);
  const double bc = std::hypot(c.x - b.x, c.y - b.y);
  const double ca = std::hypot(a.x - c.x, a.y - c.y);
  if (ab == 0.0 || bc == 0.0 || ca == 0.0) return std::nullopt;
  // |cross| is twice the area; sin(angle at a) = 2 area / (|ab| |ac|).
  const double cross = std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
  return std::array<double, 3>{std::min(1.0, cross / (ab * ca)), std::min(1.0, cross / (ab * bc)),
                               std::min(1.0, cross / (bc * ca))};
}

SparseTensor3 build_affinity_tensor(const Graph& g1, const Graph& g2, double sigma3, TensorDiagnostics* diagnostics) {
  if (!(sigma3 > 0.0)) throw InvalidArgument("build_affinity_tensor: sigma3 must be positive");
  const std::size_t n1 = g1.size(), n2 = g2.size();
  const double inv = 1.0 / (sigma3 * sigma3);
  std::size_t degenerate = 0;

  auto sines_or_zero = [&](const Point& a, const Point& b, const Point& c) {
    auto s = triangle_sines(a, b, c);
    if (!s) {
      ++degenerate;
      return std::array<double, 3>{0.0, 0.0, 0.0};
    }
    return *s;
  };

  // Sines of every ordered triple in g2 are a permutation of the sines of the
  // sorted triple, so compute them once per ordered triple on the fly.
  std::vector<TensorEntry> canonical;
  for (const auto& tri : g1.triangles) {
    const auto s1 = sines_or_zero(g1.points[tri[0]], g1.points[tri[1]], g1.points[tri[2]]);
    for (std::size_t a = 0; a < n2; ++a)
      for (std::size_t b = 0; b < n2; ++b) {
        if (b == a) continue;
        for (std::size_t c = 0; c < n2; ++c) {
          if (c == a || c == b) continue;
          const auto s2 = sines_or_zero(g2.points[a], g2.points[b], g2.points[c]);
          const double dist = std::abs(s1[0] - s2[0]) + std::abs(s1[1] - s2[1]) + std::abs(s1[2] - s2[2]);
          const double value = std::exp(-dist * inv);
          if (value == 0.0) continue;
          canonical.push_back({static_cast<std::uint32_t>(vec_index(tri[0], a, n1)),
                               static_cast<std::uint32_t>(vec_index(tri[1], b, n1)),
                               static_cast<std::uint32_t>(vec_index(tri[2], c, n1)), value});
        }
      }
  }
  if (diagnostics) diagnostics->degenerate_triangles = degenerate;
  return SparseTensor3::from_canonical(n1 * n2, canonical);
}

// ---------------------------------------------------------------------------

const LawlerForm& QapInstance::lawler() const {
  if (const auto* l = std::get_if<LawlerForm>(&form)) return *l;
  throw InvalidArgument("QapInstance: Lawler form required");
}

QapInstance make_lawler(SparseMatrix k, std::size_t n1, std::size_t n2, Sense sense) {
  if (k.rows() != n1 * n2 || k.cols() != n1 * n2) throw InvalidArgument("make_lawler: K must be (n1 n2)^2");
  return QapInstance{LawlerForm{std::move(k), n1, n2}, sense};
}

AssociationGraph build_association(const QapInstance& instance) {
  const LawlerForm& form = instance.lawler();
  const std::size_t n1 = form.n1, n2 = form.n2;
  const std::size_t dim = n1 * n2;

  AssociationGraph g;
  g.n1 = n1;
  g.n2 = n2;
  g.v0.assign(dim, 0.0);
  std::vector<Triplet> w;
  std::vector<std::size_t> col_count(dim, 0);
  for (const auto& t : form.k.entries()) {
    if (t.row == t.col) {
      g.v0[t.row] = t.value;
      continue;
    }
    const std::size_t i = t.row % n1, a = t.row / n1;
    const std::size_t j = t.col % n1, b = t.col / n1;
    if (i == j || a == b || !(t.value > 0.0)) continue;
    w.push_back(t);
    ++col_count[t.col];
  }
  if (w.empty()) throw InvalidArgument("build_association: affinity has no off-diagonal support");
  if (std::all_of(g.v0.begin(), g.v0.end(), [](double v) { return v == 0.0; })) g.v0.assign(dim, 1.0);

  std::vector<Triplet> a_norm;
  a_norm.reserve(w.size());
  for (const auto& t : w) a_norm.push_back({t.row, t.col, 1.0 / static_cast<double>(col_count[t.col])});
  g.weights = SparseMatrix(dim, dim, std::move(w));
  g.a_norm = SparseMatrix(dim, dim, std::move(a_norm));
  return g;
}

// ---------------------------------------------------------------------------

double lawler_objective(const SparseMatrix& k, const Assignment& x) {
  const std::size_t dim = x.rows() * x.cols();
  if (k.rows() != dim || k.cols() != dim) throw InvalidArgument("lawler_objective: K does not match X");
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (x[i] == Assignment::kUnassigned) throw InvalidArgument("lawler_objective: every row must be matched");
    selected.push_back(vec_index(i, static_cast<std::size_t>(x[i]), x.rows()));
  }
  double total = 0.0;
  for (std::size_t p : selected)
    for (std::size_t q : selected) total += k.at(p, q);
  return total;
}

double lawler_objective(const SparseMatrix& k, const Matrix& x) {
  return lawler_objective(k, Assignment::from_matrix(x));
}

double kb_objective(const Matrix& f1, const Matrix& f2, const Matrix* kp, const Assignment& x) {
  const std::size_t n1 = x.rows(), n2 = x.cols();
  if (f1.rows() != n1 || f1.cols() != n1 || f2.rows() != n2 || f2.cols() != n2) {
    throw InvalidArgument("kb_objective: F1 must be n1 x n1 and F2 n2 x n2");
  }
  if (kp && (kp->rows() != n1 || kp->cols() != n2)) throw InvalidArgument("kb_objective: Kp must be n1 x n2");
  const Matrix xm = x.to_matrix();
  const Matrix inner = matmul(matmul(xm.transposed(), f1), xm);  // n2 x n2
  double total = 0.0;
  for (std::size_t a = 0; a < n2; ++a)
    for (std::size_t b = 0; b < n2; ++b) total += inner(a, b) * f2(b, a);
  if (kp) {
    for (std::size_t i = 0; i < n1; ++i)
      if (x[i] != Assignment::kUnassigned) total += (*kp)(i, x[i]);
  }
  return total;
}

double hyper_objective(const SparseTensor3& h, const Assignment& x) {
  const std::size_t dim = x.rows() * x.cols();
  if (h.nnz() > 0 && h.dim() != dim) throw InvalidArgument("hyper_objective: tensor does not match X");
  const std::vector<double> xv = vec(x.to_matrix());
  double total = 0.0;
  for (const auto& e : h.entries()) total += e.value * xv[e.i] * xv[e.j] * xv[e.k];
  return total;
}

QapInstance kb_to_lawler(const Matrix& f1, const Matrix& f2, const Matrix* kp, std::size_t max_entries) {
  if (f1.rows() != f1.cols() || f2.rows() != f2.cols() || f1.empty() || f2.empty()) {
    throw InvalidArgument("kb_to_lawler: F1 and F2 must be square and non-empty");
  }
  const std::size_t n1 = f1.rows(), n2 = f2.rows();
  if (kp && (kp->rows() != n1 || kp->cols() != n2)) throw InvalidArgument("kb_to_lawler: Kp must be n1 x n2");

  std::vector<Triplet> nz1, nz2;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n1; ++j)
      if (f1(i, j) != 0.0) nz1.push_back({i, j, f1(i, j)});
  for (std::size_t a = 0; a < n2; ++a)
    for (std::size_t b = 0; b < n2; ++b)
      if (f2(a, b) != 0.0) nz2.push_back({a, b, f2(a, b)});
  if (!nz2.empty() && nz1.size() > max_entries / (2 * nz2.size())) {
    throw SizeLimitError("kb_to_lawler: affinity would exceed the size cap");
  }

  // vec(X)^T (F2^T (x) F1) vec(X) = tr(X^T F1 X F2); store the symmetric part.
  const std::size_t dim = n1 * n2;
  std::vector<Triplet> raw;
  raw.reserve(2 * nz1.size() * nz2.size() + dim);
  for (const auto& e1 : nz1)
    for (const auto& e2 : nz2) {
      const double half = 0.5 * e1.value * e2.value;
      // (F2^T (x) F1)[ia, jb] = F2[b, a] F1[i, j]
      raw.push_back({vec_index(e1.row, e2.col, n1), vec_index(e1.col, e2.row, n1), half});
      raw.push_back({vec_index(e1.col, e2.row, n1), vec_index(e1.row, e2.col, n1), half});
    }
  if (kp) {
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t a = 0; a < n2; ++a)
        if ((*kp)(i, a) != 0.0) raw.push_back({vec_index(i, a, n1), vec_index(i, a, n1), (*kp)(i, a)});
  }
  std::sort(raw.begin(), raw.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Triplet> merged;
  merged.reserve(raw.size());
  for (const auto& t : raw) {
    if (!merged.empty() && merged.back().row == t.row && merged.back().col == t.col) {
      merged.back().value += t.value;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const Triplet& t) { return t.value == 0.0; });
  return make_lawler(SparseMatrix(dim, dim, std::move(merged)), n1, n2);
}

}  // namespace qapnet
