#include "qapnet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qapnet/error.hpp"

namespace qapnet {

Assignment::Assignment(std::size_t rows, std::size_t cols, std::vector<std::ptrdiff_t> col_of_row)
    : rows_(rows), cols_(cols), col_of_row_(std::move(col_of_row)) {
  if (col_of_row_.size() != rows_) throw InvalidArgument("Assignment: one entry per row required");
  std::vector<bool> used(cols_, false);
  std::size_t assigned = 0;
  for (auto c : col_of_row_) {
    if (c == kUnassigned) continue;
    if (c < 0 || static_cast<std::size_t>(c) >= cols_) throw InvalidArgument("Assignment: column out of range");
    if (used[c]) throw InvalidArgument("Assignment: column " + std::to_string(c) + " used twice");
    used[c] = true;
    ++assigned;
  }
  if (assigned != std::min(rows_, cols_)) throw InvalidArgument("Assignment: every row must be assigned");
}

Assignment Assignment::identity(std::size_t n) {
  std::vector<std::ptrdiff_t> cols(n);
  std::iota(cols.begin(), cols.end(), 0);
  return Assignment(n, n, std::move(cols));
}

Assignment Assignment::from_matrix(const Matrix& m) {
  std::vector<std::ptrdiff_t> cols(m.rows(), kUnassigned);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (v == 0.0) continue;
      if (v != 1.0) throw InvalidArgument("Assignment: matrix is not binary");
      if (cols[r] != kUnassigned) throw InvalidArgument("Assignment: row " + std::to_string(r) + " has two ones");
      cols[r] = static_cast<std::ptrdiff_t>(c);
    }
  }
  return Assignment(m.rows(), m.cols(), std::move(cols));
}

Matrix Assignment::to_matrix() const {
  Matrix m(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    if (col_of_row_[r] != kUnassigned) m(r, col_of_row_[r]) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------

Matrix kron(const Matrix& a, const Matrix& b, std::size_t max_entries) {
  if (a.empty() || b.empty()) throw InvalidArgument("kron: empty operand");
  const std::size_t rows = a.rows() * b.rows();
  const std::size_t cols = a.cols() * b.cols();
  if (rows / b.rows() != a.rows() || cols / b.cols() != a.cols() || (cols != 0 && rows > max_entries / cols)) {
    throw SizeLimitError("kron: result of " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " exceeds the size cap");
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double s = a(i, j);
      if (s == 0.0) continue;
      for (std::size_t p = 0; p < b.rows(); ++p)
        for (std::size_t q = 0; q < b.cols(); ++q) out(i * b.rows() + p, j * b.cols() + q) = s * b(p, q);
    }
  return out;
}

// ---------------------------------------------------------------------------

Matrix DoublyStochasticResult::valid() const {
  Matrix out(valid_rows, valid_cols);
  for (std::size_t r = 0; r < valid_rows; ++r)
    for (std::size_t c = 0; c < valid_cols; ++c) out(r, c) = transposed ? matrix(c, r) : matrix(r, c);
  return out;
}

DoublyStochasticResult sinkhorn(const Matrix& s, const SinkhornOptions& options) {
  if (s.empty()) throw InvalidArgument("sinkhorn: empty matrix");
  if (!s.all_finite()) throw InvalidArgument("sinkhorn: non-finite input");
  for (double v : s.data())
    if (v < 0.0) throw InvalidArgument("sinkhorn: negative entry");

  DoublyStochasticResult result;
  result.valid_rows = s.rows();
  result.valid_cols = s.cols();
  result.transposed = s.rows() > s.cols();
  const Matrix oriented = result.transposed ? s.transposed() : s;
  const std::size_t n1 = oriented.rows();
  const std::size_t n = oriented.cols();

  Matrix m(n, n, options.epsilon);
  for (std::size_t r = 0; r < n1; ++r)
    for (std::size_t c = 0; c < n; ++c) m(r, c) = oriented(r, c);

  for (std::size_t r = 0; r < n; ++r) {
    double row_sum = 0.0;
    for (double v : m.row(r)) row_sum += v;
    if (!(row_sum > 0.0)) throw InvalidArgument("sinkhorn: row " + std::to_string(r) + " is all zero");
  }

  std::vector<double> col_sum(n);
  auto measure = [&]() {
    double residual = 0.0;
    std::fill(col_sum.begin(), col_sum.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double row_sum = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        row_sum += m(r, c);
        col_sum[c] += m(r, c);
      }
      residual = std::max(residual, std::abs(row_sum - 1.0));
    }
    for (double cs : col_sum) residual = std::max(residual, std::abs(cs - 1.0));
    return residual;
  };

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    std::fill(col_sum.begin(), col_sum.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) col_sum[c] += m(r, c);
    for (std::size_t c = 0; c < n; ++c)
      if (!(col_sum[c] > 0.0)) throw InvalidArgument("sinkhorn: column " + std::to_string(c) + " is all zero");
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) m(r, c) /= col_sum[c];
    for (std::size_t r = 0; r < n; ++r) {
      double row_sum = 0.0;
      for (double v : m.row(r)) row_sum += v;
      for (double& v : m.row(r)) v /= row_sum;
    }
    result.iterations = it + 1;
    result.residual = measure();
    if (!std::isfinite(result.residual)) throw NumericalError("sinkhorn: non-finite iterate");
    if (result.residual <= options.tol) {
      result.converged = true;
      break;
    }
  }
  result.matrix = std::move(m);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

// Shortest augmenting path assignment on a rows <= cols cost matrix
// (minimization). Returns the column of each row.
std::vector<std::ptrdiff_t> min_cost_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::ptrdiff_t> col_of_row(n, Assignment::kUnassigned);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) col_of_row[p[j] - 1] = static_cast<std::ptrdiff_t>(j - 1);
  return col_of_row;
}

}  // namespace

Assignment hungarian(const Matrix& score) {
  if (score.empty()) throw InvalidArgument("hungarian: empty matrix");
  if (!score.all_finite()) throw InvalidArgument("hungarian: non-finite score");
  const bool transpose = score.rows() > score.cols();
  const Matrix oriented = transpose ? score.transposed() : score;
  Matrix cost(oriented.rows(), oriented.cols());
  for (std::size_t i = 0; i < cost.size(); ++i) cost.data()[i] = -oriented.data()[i];
  auto cols = min_cost_assignment(cost);
  if (!transpose) return Assignment(score.rows(), score.cols(), std::move(cols));
  std::vector<std::ptrdiff_t> rows_assign(score.rows(), Assignment::kUnassigned);
  for (std::size_t c = 0; c < cols.size(); ++c) rows_assign[cols[c]] = static_cast<std::ptrdiff_t>(c);
  return Assignment(score.rows(), score.cols(), std::move(rows_assign));
}

double assignment_score(const Matrix& score, const Assignment& x) {
  if (score.rows() != x.rows() || score.cols() != x.cols()) throw InvalidArgument("assignment_score: shape mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (x[r] != Assignment::kUnassigned) total += score(r, x[r]);
  return total;
}

// ---------------------------------------------------------------------------

EigenDecomposition sym_eig(const Matrix& s, double symmetry_tol) {
  if (s.rows() != s.cols() || s.empty()) throw InvalidArgument("sym_eig: matrix must be square and non-empty");
  if (!s.all_finite()) throw InvalidArgument("sym_eig: non-finite input");
  if (!s.is_symmetric(symmetry_tol)) throw InvalidArgument("sym_eig: matrix is not symmetric");
  const std::size_t n = s.rows();
  Matrix a = s;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = r + 1; c < n; ++c) a(r, c) = a(c, r) = 0.5 * (a(r, c) + a(c, r));
  Matrix v = Matrix::identity(n);

  double frob = 0.0;
  for (double x : a.data()) frob += x * x;
  frob = std::sqrt(frob);
  const double tol = 1e-10 * std::max(1.0, frob);
  constexpr int kMaxSweeps = 100;

  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) throw ConvergenceError("sym_eig: Jacobi sweeps did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
  }
  for (std::size_t i = 1; i < n; ++i) out.min_gap = std::min(out.min_gap, out.values[i - 1] - out.values[i]);
  return out;
}

EigenDecomposition sym_eig_topk(const Matrix& s, std::size_t k, double symmetry_tol) {
  if (k == 0 || k > s.rows()) throw InvalidArgument("sym_eig_topk: k out of range");
  EigenDecomposition full = sym_eig(s, symmetry_tol);
  EigenDecomposition out;
  out.values.assign(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(k));
  out.vectors = Matrix(s.rows(), k);
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) out.vectors(r, c) = full.vectors(r, c);
  for (std::size_t i = 1; i < k; ++i) out.min_gap = std::min(out.min_gap, out.values[i - 1] - out.values[i]);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_grad: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_diff_grad: non-finite value near coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace qapnet
