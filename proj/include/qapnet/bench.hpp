#pragma once

// Shared experiment plumbing for the command-line tool, the acceptance suite
// and the Python module: problem construction, solver dispatch and
// accuracy evaluation, with optional fan-out over worker threads.

#include <span>
#include <string>
#include <vector>

#include "qapnet/multigraph.hpp"
#include "qapnet/qaplib.hpp"
#include "qapnet/solvers.hpp"
#include "qapnet/synthetic.hpp"

namespace qapnet {

enum class ClassicSolver { kSm, kRrwm };

ClassicSolver parse_classic_solver(std::string_view name);

/// Discretized solution of a maximization affinity. Power-iteration
/// non-convergence returns the last iterate; `converged` reports it.
Assignment solve_classic(ClassicSolver solver, const SparseMatrix& k, std::size_t n1, std::size_t n2,
                         bool* converged = nullptr);

std::vector<MatchingProblem> build_problems(std::span<const SynthSample> samples, double sigma2, double sigma3,
                                            bool with_hyper, std::size_t workers = 1);
std::vector<TrainSample> to_train_samples(std::span<const MatchingProblem> problems, std::size_t workers = 1);

/// Train and test problems of a dataset, flattened across sets.
struct SynthProblems {
  std::vector<MatchingProblem> train;
  std::vector<MatchingProblem> test;
};
SynthProblems build_dataset_problems(const SynthDataset& data, bool with_hyper, std::size_t workers = 1);

/// Mean ground-truth accuracy of the network over samples with targets.
double evaluate_network(const NetParams& params, const NetConfig& cfg, std::span<const TrainSample> samples,
                        std::size_t workers = 1);

struct ClassicEvaluation {
  double accuracy = 0.0;
  std::size_t unconverged = 0;
};
ClassicEvaluation evaluate_classic(ClassicSolver solver, std::span<const MatchingProblem> problems,
                                   std::size_t workers = 1);

/// Groups consecutive samples of each set into m-graph instances; leftover
/// samples are dropped. `test` selects the test split.
std::vector<MultiGraphSample> group_multigraph(const SynthDataset& data, std::size_t m, bool test,
                                               std::size_t workers = 1);

struct MultiEvaluation {
  double pairwise = 0.0;      // Hungarian on raw pairwise predictions
  double synchronized = 0.0;  // after permutation synchronization
};
MultiEvaluation evaluate_multigraph(const NetParams& params, const NetConfig& cfg,
                                    std::span<const MultiGraphSample> samples, const SyncOptions& options = {},
                                    std::size_t workers = 1);

// QAPLIB ---------------------------------------------------------------------

/// Network input for a QAPLIB instance: K scaled by its maximum, minimized.
TrainSample qaplib_train_sample(const QaplibInstance& inst);

/// QAPLIB objective of a classic solver run on the maximization affinity.
double solve_qaplib_classic(ClassicSolver solver, const QaplibInstance& inst);
/// QAPLIB objective of the network's discretized prediction.
double solve_qaplib_network(const NetParams& params, const NetConfig& cfg, const TrainSample& sample,
                            const QaplibInstance& inst);

}  // namespace qapnet
