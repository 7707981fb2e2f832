#include "qapnet/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "qapnet/error.hpp"

namespace qapnet {
namespace {

void check_shape(const SparseMatrix& k, std::size_t n1, std::size_t n2, const char* who) {
  if (n1 == 0 || n2 == 0 || k.rows() != n1 * n2 || k.cols() != n1 * n2) {
    throw InvalidArgument(std::string(who) + ": K must be (n1 n2) x (n1 n2)");
  }
  for (const auto& t : k.entries())
    if (t.value < 0.0) throw InvalidArgument(std::string(who) + ": K must be nonnegative");
}

double norm2(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

SpectralResult spectral_match(const SparseMatrix& k, std::size_t n1, std::size_t n2,
                              const PowerIterationOptions& options) {
  check_shape(k, n1, n2, "spectral_match");
  const std::size_t dim = n1 * n2;
  std::vector<double> x(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  SpectralResult result;
  bool converged = false;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    std::vector<double> y = k.multiply(x);
    const double norm = norm2(y);
    if (!(norm > 0.0)) throw InvalidArgument("spectral_match: K annihilates the iterate (zero matrix)");
    double diff = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      y[i] /= norm;
      diff += (y[i] - x[i]) * (y[i] - x[i]);
    }
    x = std::move(y);
    result.iterations = it + 1;
    if (std::sqrt(diff) < options.tol) {
      converged = true;
      break;
    }
  }
  result.converged = converged;
  if (!converged && options.throw_on_failure) throw ConvergenceError("spectral_match: power iteration did not converge");
  for (double& v : x) v = std::abs(v);
  const double norm = norm2(x);
  for (double& v : x) v /= norm;
  const auto kx = k.multiply(x);
  for (std::size_t i = 0; i < dim; ++i) result.eigenvalue += x[i] * kx[i];
  result.soft = unvec(x, n1, n2);
  return result;
}

RrwmResult rrwm(const SparseMatrix& k, std::size_t n1, std::size_t n2, const RrwmOptions& options) {
  check_shape(k, n1, n2, "rrwm");
  if (options.alpha_jump < 0.0 || options.alpha_jump > 1.0) throw InvalidArgument("rrwm: alpha_jump must lie in [0,1]");
  if (!(options.beta > 0.0)) throw InvalidArgument("rrwm: beta must be positive");
  const std::size_t dim = n1 * n2;

  // Random-walk transition: K scaled by its largest row sum.
  std::vector<double> row_sum(dim, 0.0);
  for (const auto& t : k.entries()) row_sum[t.row] += t.value;
  const double d_max = *std::max_element(row_sum.begin(), row_sum.end());
  if (!(d_max > 0.0)) throw InvalidArgument("rrwm: K is zero");

  std::vector<double> x(dim, 1.0 / static_cast<double>(dim));
  RrwmResult result;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    std::vector<double> walk = k.multiply(x);
    double total = 0.0;
    for (double& v : walk) total += (v /= d_max);
    if (!(total > 0.0)) throw InvalidArgument("rrwm: random walk vanished");
    for (double& v : walk) v /= total;

    std::vector<double> next = walk;
    if (options.alpha_jump > 0.0) {
      const double peak = *std::max_element(walk.begin(), walk.end());
      std::vector<double> jump(dim);
      for (std::size_t i = 0; i < dim; ++i) jump[i] = std::exp(options.beta * walk[i] / peak);
      const Matrix balanced = sinkhorn(unvec(jump, n1, n2)).valid();
      jump = vec(balanced);
      double jump_total = 0.0;
      for (double v : jump) jump_total += v;
      for (std::size_t i = 0; i < dim; ++i)
        next[i] = (1.0 - options.alpha_jump) * walk[i] + options.alpha_jump * jump[i] / jump_total;
    }
    double next_total = 0.0;
    for (double v : next) next_total += v;
    double diff = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      next[i] /= next_total;
      diff += (next[i] - x[i]) * (next[i] - x[i]);
    }
    x = std::move(next);
    result.iterations = it + 1;
    if (std::sqrt(diff) < options.tol) {
      result.converged = true;
      break;
    }
  }
  result.soft = unvec(x, n1, n2);
  return result;
}

Assignment discretize(const Matrix& soft) { return hungarian(soft); }

}  // namespace qapnet
