#include "qapnet/matrix.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>

#include "qapnet/error.hpp"

namespace qapnet {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw InvalidArgument("Matrix: data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidArgument("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Matrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r + 1; c < cols_; ++c)
      if (std::abs((*this)(r, c) - (*this)(c, r)) > tol) return false;
  return true;
}

double Matrix::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

std::vector<double> vec(const Matrix& x) {
  std::vector<double> v(x.size());
  for (std::size_t a = 0; a < x.cols(); ++a)
    for (std::size_t i = 0; i < x.rows(); ++i) v[vec_index(i, a, x.rows())] = x(i, a);
  return v;
}

Matrix unvec(std::span<const double> v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) throw InvalidArgument("unvec: length mismatch");
  Matrix x(rows, cols);
  for (std::size_t a = 0; a < cols; ++a)
    for (std::size_t i = 0; i < rows; ++i) x(i, a) = v[vec_index(i, a, rows)];
  return x;
}

// ---------------------------------------------------------------------------

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  for (const auto& t : entries_) {
    if (t.row >= rows_ || t.col >= cols_) throw InvalidArgument("SparseMatrix: index out of range");
    if (!std::isfinite(t.value)) throw InvalidArgument("SparseMatrix: non-finite value");
  }
  std::sort(entries_.begin(), entries_.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  for (std::size_t e = 1; e < entries_.size(); ++e) {
    if (entries_[e].row == entries_[e - 1].row && entries_[e].col == entries_[e - 1].col) {
      throw InvalidArgument("SparseMatrix: duplicate entry (" + std::to_string(entries_[e].row) + "," +
                            std::to_string(entries_[e].col) + ")");
    }
  }
  offsets_.assign(rows_ + 1, 0);
  for (const auto& t : entries_) ++offsets_[t.row + 1];
  for (std::size_t r = 0; r < rows_; ++r) offsets_[r + 1] += offsets_[r];
}

SparseMatrix SparseMatrix::from_dense(const Matrix& m) {
  std::vector<Triplet> entries;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) entries.push_back({r, c, m(r, c)});
  return SparseMatrix(m.rows(), m.cols(), std::move(entries));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto row_entries = row(r);
  auto it = std::lower_bound(row_entries.begin(), row_entries.end(), c,
                             [](const Triplet& t, std::size_t col) { return t.col < col; });
  return (it != row_entries.end() && it->col == c) ? it->value : 0.0;
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  if (x.size() != cols_) throw InvalidArgument("SparseMatrix::multiply: length mismatch");
  std::vector<double> y(rows_, 0.0);
  for (const auto& t : entries_) y[t.row] += t.value * x[t.col];
  return y;
}

std::vector<double> SparseMatrix::multiply_transposed(std::span<const double> x) const {
  if (x.size() != rows_) throw InvalidArgument("SparseMatrix::multiply_transposed: length mismatch");
  std::vector<double> y(cols_, 0.0);
  for (const auto& t : entries_) y[t.col] += t.value * x[t.row];
  return y;
}

Matrix SparseMatrix::to_dense() const {
  Matrix m(rows_, cols_);
  for (const auto& t : entries_) m(t.row, t.col) = t.value;
  return m;
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (const auto& t : entries_)
    if (std::abs(at(t.col, t.row) - t.value) > tol) return false;
  return true;
}

double SparseMatrix::max_value() const {
  double m = 0.0;
  for (const auto& t : entries_) m = std::max(m, t.value);
  return m;
}

// ---------------------------------------------------------------------------

namespace {

bool tensor_less(const TensorEntry& a, const TensorEntry& b) {
  return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
}

}  // namespace

void SparseTensor3::init_sorted(std::size_t dim, std::vector<TensorEntry> entries) {
  dim_ = dim;
  entries_ = std::move(entries);
  for (const auto& e : entries_) {
    if (e.i >= dim_ || e.j >= dim_ || e.k >= dim_) throw InvalidArgument("SparseTensor3: index out of range");
    if (!std::isfinite(e.value) || e.value < 0.0) throw InvalidArgument("SparseTensor3: values must be finite and >= 0");
  }
  std::sort(entries_.begin(), entries_.end(), tensor_less);
  for (std::size_t e = 1; e < entries_.size(); ++e) {
    if (!tensor_less(entries_[e - 1], entries_[e])) throw InvalidArgument("SparseTensor3: duplicate entry");
  }
}

SparseTensor3::SparseTensor3(std::size_t dim, std::vector<TensorEntry> entries) {
  init_sorted(dim, std::move(entries));
  for (const auto& e : entries_) {
    const std::array<std::array<std::uint32_t, 3>, 6> perms{{{e.i, e.j, e.k},
                                                             {e.i, e.k, e.j},
                                                             {e.j, e.i, e.k},
                                                             {e.j, e.k, e.i},
                                                             {e.k, e.i, e.j},
                                                             {e.k, e.j, e.i}}};
    for (const auto& p : perms) {
      if (at(p[0], p[1], p[2]) != e.value) throw InvalidArgument("SparseTensor3: entries are not symmetric");
    }
  }
}

SparseTensor3 SparseTensor3::from_canonical(std::size_t dim, std::span<const TensorEntry> canonical) {
  std::vector<TensorEntry> expanded;
  expanded.reserve(canonical.size() * 6);
  for (const auto& e : canonical) {
    std::array<std::uint32_t, 3> idx{e.i, e.j, e.k};
    std::sort(idx.begin(), idx.end());
    do {
      expanded.push_back({idx[0], idx[1], idx[2], e.value});
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  // Symmetric by construction; duplicates (two representatives of one
  // multiset) are still rejected.
  SparseTensor3 t;
  t.init_sorted(dim, std::move(expanded));
  return t;
}

double SparseTensor3::at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
  const TensorEntry key{i, j, k, 0.0};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key, tensor_less);
  if (it != entries_.end() && it->i == i && it->j == j && it->k == k) return it->value;
  return 0.0;
}

}  // namespace qapnet
