#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "qapnet/matrix.hpp"

namespace qapnet {

/// Largest dense matrix (in entries) that kron() and friends will build.
inline constexpr std::size_t kMaxDenseEntries = std::size_t{1} << 27;

/// Binary partial permutation matrix stored as one column index per row.
/// A row holds kUnassigned only when rows > cols.
class Assignment {
 public:
  static constexpr std::ptrdiff_t kUnassigned = -1;

  Assignment() = default;
  Assignment(std::size_t rows, std::size_t cols, std::vector<std::ptrdiff_t> col_of_row);

  static Assignment identity(std::size_t n);
  /// Validates that m is binary with X 1 = 1 and X^T 1 <= 1.
  static Assignment from_matrix(const Matrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::ptrdiff_t operator[](std::size_t r) const { return col_of_row_[r]; }
  std::span<const std::ptrdiff_t> col_of_row() const { return col_of_row_; }
  Matrix to_matrix() const;

  bool operator==(const Assignment& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::ptrdiff_t> col_of_row_;
};

/// Kronecker product. Block (i, j) of the result equals a(i, j) * b.
Matrix kron(const Matrix& a, const Matrix& b, std::size_t max_entries = kMaxDenseEntries);

struct SinkhornOptions {
  double epsilon = 1e-3;   // dummy padding value
  std::size_t max_iter = 100;
  double tol = 1e-6;
};

struct DoublyStochasticResult {
  Matrix matrix;             // padded square matrix in solve orientation
  std::size_t valid_rows = 0;
  std::size_t valid_cols = 0;
  bool transposed = false;   // input had more rows than columns
  std::size_t iterations = 0;
  double residual = 0.0;     // max |row/col sum - 1| of the padded matrix
  bool converged = false;

  /// The valid n1 x n2 block in the caller's orientation.
  Matrix valid() const;
};

/// Alternating column/row normalization of a nonnegative score matrix padded
/// to square with `epsilon`. Stops when the residual drops below `tol`.
DoublyStochasticResult sinkhorn(const Matrix& s, const SinkhornOptions& options = {});

/// Maximum-score assignment. For n1 <= n2 every row is assigned; for n1 > n2
/// every column is. Ties resolve towards the lowest column index row by row.
Assignment hungarian(const Matrix& score);
double assignment_score(const Matrix& score, const Assignment& x);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
  /// Smallest gap between consecutive returned values (infinity for one value).
  double min_gap = std::numeric_limits<double>::infinity();
};

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
EigenDecomposition sym_eig(const Matrix& s, double symmetry_tol = 1e-9);
/// The k largest eigenpairs.
EigenDecomposition sym_eig_topk(const Matrix& s, std::size_t k, double symmetry_tol = 1e-9);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central finite differences; throws NumericalError when f is not finite at a probe.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h = 1e-5);

}  // namespace qapnet
