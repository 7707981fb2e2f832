#pragma once

// QAPLIB instances and solutions.
//
// .dat: n, then n*n entries of A, then n*n entries of B (row-major integers,
//       any ASCII whitespace separates tokens).
// .sln: n, objective, then the 1-indexed permutation p (facility i at
//       location p(i)). Commas are accepted as separators.
//
// Objective convention: minimize sum_ij A[i][j] * B[p(i)][p(j)].

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qapnet/affinity.hpp"

namespace qapnet {

struct QaplibInstance {
  std::string name;
  std::size_t n = 0;
  Matrix a;
  Matrix b;
  std::optional<double> known_feasible_bound;
};

struct QaplibSolution {
  std::size_t n = 0;
  double objective = 0.0;
  Assignment permutation;  // 0-indexed
};

QaplibInstance parse_qaplib(const std::string& text, const std::string& name = {});
std::string format_qaplib(const QaplibInstance& inst);

QaplibSolution parse_qaplib_solution(const std::string& text);
std::string format_qaplib_solution(const QaplibSolution& sol);

double qaplib_objective(const QaplibInstance& inst, const Assignment& p);

/// Lawler form (sense = minimize) with lawler_objective(K, X) equal to the
/// QAPLIB objective of X.
QapInstance qaplib_to_lawler(const QaplibInstance& inst);

/// Maximization affinity for learning-free solvers: (max K) - K on the
/// diagonal and on one-to-one compatible pairs, absent elsewhere.
SparseMatrix qaplib_maximization_affinity(const SparseMatrix& k);

/// (obj - bound) / obj. Negative when the bound is surpassed.
double rel_obj_score(double obj, double bound);

/// Leading alphabetic part of an instance name ("chr12a" -> "chr").
std::string qaplib_category(const std::string& name);

struct QaplibEntry {
  QaplibInstance instance;
  std::optional<QaplibSolution> solution;
  std::filesystem::path dat_path;
};

/// Every *.dat below `dir` with n <= max_n, sorted by name. A matching
/// <name>.sln anywhere below `dir` is attached and sets the feasible bound.
std::vector<QaplibEntry> load_qaplib_dir(const std::filesystem::path& dir, std::size_t max_n = 40);

}  // namespace qapnet
