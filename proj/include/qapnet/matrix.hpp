#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace qapnet {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Matrix transposed() const;
  bool all_finite() const;
  bool is_symmetric(double tol) const;
  double sum() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Vectorization is column-stacking throughout the library: the correspondence
// (i, a) of an n1 x n2 matching matrix lives at index i + a * n1.
inline std::size_t vec_index(std::size_t i, std::size_t a, std::size_t n1) { return i + a * n1; }
std::vector<double> vec(const Matrix& x);
Matrix unvec(std::span<const double> v, std::size_t rows, std::size_t cols);

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Sparse matrix in row-major sorted coordinate form with CSR row offsets.
/// Entries are unique, finite and in range.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

  static SparseMatrix from_dense(const Matrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  std::span<const Triplet> entries() const { return entries_; }
  /// Entries of row r as a contiguous slice.
  std::span<const Triplet> row(std::size_t r) const {
    return {entries_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
  }

  double at(std::size_t r, std::size_t c) const;
  std::vector<double> multiply(std::span<const double> x) const;
  std::vector<double> multiply_transposed(std::span<const double> x) const;
  Matrix to_dense() const;
  bool is_symmetric(double tol) const;
  double max_value() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Triplet> entries_;
  std::vector<std::size_t> offsets_{0};
};

struct TensorEntry {
  std::uint32_t i;
  std::uint32_t j;
  std::uint32_t k;
  double value;
};

/// Symmetric sparse third-order tensor. Storage is fully expanded: every
/// stored (i,j,k) has all of its distinct mode permutations stored with the
/// same value. Entries are sorted lexicographically.
class SparseTensor3 {
 public:
  SparseTensor3() = default;
  /// Takes expanded entries and validates range, sign, uniqueness and symmetry.
  SparseTensor3(std::size_t dim, std::vector<TensorEntry> entries);

  /// Expands canonical entries (one representative per index multiset) to all
  /// distinct permutations.
  static SparseTensor3 from_canonical(std::size_t dim, std::span<const TensorEntry> canonical);

  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return entries_.size(); }
  std::span<const TensorEntry> entries() const { return entries_; }
  double at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const;

 private:
  // Validates range, sign and uniqueness; symmetry is left to the caller.
  void init_sorted(std::size_t dim, std::vector<TensorEntry> entries);

  std::size_t dim_ = 0;
  std::vector<TensorEntry> entries_;
};

}  // namespace qapnet
