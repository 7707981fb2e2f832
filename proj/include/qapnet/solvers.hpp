#pragma once

#include <cstddef>

#include "qapnet/matrix.hpp"
#include "qapnet/numerics.hpp"

namespace qapnet {

struct PowerIterationOptions {
  std::size_t max_iter = 1000;
  double tol = 1e-8;
  bool throw_on_failure = true;  // false: return the last iterate with converged = false
};

struct SpectralResult {
  Matrix soft;             // n1 x n2, nonnegative, unit L2 norm
  double eigenvalue = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Spectral matching: leading eigenvector of K by power iteration from the
/// all-ones vector, reshaped (column-stacking) to n1 x n2.
SpectralResult spectral_match(const SparseMatrix& k, std::size_t n1, std::size_t n2,
                              const PowerIterationOptions& options = {});

struct RrwmOptions {
  double alpha_jump = 0.8;  // weight of the reweighted jump; 0 gives a plain random walk
  double beta = 30.0;       // inflation of the reweighting exponent
  double tol = 1e-6;
  std::size_t max_iter = 300;
};

struct RrwmResult {
  Matrix soft;             // n1 x n2, L1-normalized
  std::size_t iterations = 0;
  bool converged = false;  // false: best iterate returned after max_iter
};

/// Reweighted random walk matching on the association graph of K.
RrwmResult rrwm(const SparseMatrix& k, std::size_t n1, std::size_t n2, const RrwmOptions& options = {});

/// Hungarian discretization (maximize), ties to the lowest index.
Assignment discretize(const Matrix& soft);

}  // namespace qapnet
