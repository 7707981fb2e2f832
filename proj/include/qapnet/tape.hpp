#pragma once

// Reverse-mode differentiation over dense matrices. Every operation records
// its value and a closure that pushes the output gradient to its inputs.
// Sparse operators take their sparsity pattern as a shared constant.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "qapnet/matrix.hpp"
#include "qapnet/numerics.hpp"

namespace qapnet::ad {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Matrix value);
  Var parameter(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient after backward(); an all-zero matrix when nothing flowed in.
  Matrix grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 output and runs every closure in
  /// reverse recording order.
  void backward(Var loss);

  // Interface for operation implementations.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }
  const Matrix& out_grad(Var v) const { return nodes_[v.id].grad; }
  Matrix& grad_ref(Var v);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

/// CSR sparsity pattern of a square or rectangular operator.
struct SparsePattern {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;  // rows + 1
  std::vector<std::size_t> col_index;

  std::size_t nnz() const { return col_index.size(); }
  static SparsePattern from(const SparseMatrix& m);
};

/// Weighted third-order incidence: message(i) = sum w * p(j) * p(k).
struct HyperPattern {
  std::size_t dim = 0;
  std::vector<TensorEntry> entries;  // value holds the weight
};

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var add_bias(Tape& t, Var x, Var bias);  // bias is 1 x cols, broadcast over rows
Var scale(Tape& t, Var x, double c);
Var relu(Tape& t, Var x);
Var exp(Tape& t, Var x);
Var concat_cols(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var x);
Var sum(Tape& t, Var x);

Var gather_rows(Tape& t, Var x, std::shared_ptr<const std::vector<std::size_t>> index);
/// out = M x with M = pattern filled by `weights`.
Var spmm(Tape& t, std::shared_ptr<const SparsePattern> pattern, std::shared_ptr<const std::vector<double>> weights,
         Var x);
/// Channel-wise weighted aggregation:
/// out(r, c) = sum_{e in row r} weight(e) * edges(e, c) * x(col(e), c).
Var edge_aggregate(Tape& t, std::shared_ptr<const SparsePattern> pattern,
                   std::shared_ptr<const std::vector<double>> weights, Var edges, Var x);
Var hyper_message(Tape& t, std::shared_ptr<const HyperPattern> pattern, Var p);

Var unvec(Tape& t, Var x, std::size_t rows, std::size_t cols);  // column vector -> rows x cols
Var vec(Tape& t, Var x);                                         // rows x cols -> column vector
Var pad_rows(Tape& t, Var x, std::size_t total_rows, double value);
Var slice(Tape& t, Var x, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols);
/// Square block matrix from a row-major grid of equally sized blocks.
Var assemble_blocks(Tape& t, std::span<const Var> blocks, std::size_t grid);

Var normalize_cols(Tape& t, Var x);
Var normalize_rows(Tape& t, Var x);
/// Fixed-iteration Sinkhorn on a nonnegative n1 x n2 matrix, padded to
/// square with `epsilon` (transposed internally when n1 > n2). Returns n1 x n2.
Var sinkhorn(Tape& t, Var x, std::size_t iterations, double epsilon);

/// Binary cross-entropy against a 0/1 target with probabilities clamped to
/// [clamp, 1 - clamp]; the gradient is zero where clamping applies.
Var binary_cross_entropy(Tape& t, Var s, const Assignment& target, double clamp = 1e-7);
/// sign * vec(S)^T K vec(S).
Var quadratic_form(Tape& t, Var s, std::shared_ptr<const SparseMatrix> k, double sign);

struct ProjectorInfo {
  std::vector<double> values;  // top-k eigenvalues, descending
  double min_gap = 0.0;        // smallest consecutive gap among them
};
/// scale * U U^T for the top-k eigenvectors U of a symmetric matrix, with the
/// eigenvector perturbation backward.
Var topk_projector(Tape& t, Var x, std::size_t k, double scale, ProjectorInfo* info = nullptr);

/// Takes the forward value `value` but passes gradients to x unchanged.
Var pass_through(Tape& t, Var x, Matrix value);

}  // namespace qapnet::ad
