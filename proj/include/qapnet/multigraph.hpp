#pragma once

// Multi-graph matching by permutation synchronization. Pairwise matchings
// S_ij are stacked into the symmetric joint matrix S (S_ii = I, S_ji = S_ij^T);
// its top-n eigenvectors U give the cycle-consistent reconstruction
// S^ = m U U^T, and each block is re-normalized as Sinkhorn(exp(alpha_hat S^_ij)).

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "qapnet/ngm.hpp"

namespace qapnet {

struct JointMatching {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<Matrix> blocks;  // m x m grid, row-major

  const Matrix& block(std::size_t i, std::size_t j) const { return blocks[i * m + j]; }
  Matrix assembled() const;
};

using PairwiseMatchings = std::map<std::pair<std::size_t, std::size_t>, Matrix>;

/// Requires every pair i < j, each n x n with entries in [0, 1].
JointMatching build_joint(const PairwiseMatchings& pairwise, std::size_t m, std::size_t n);

struct SyncOptions {
  double delta = 1e-4;
  double alpha_hat = 20.0;
  SinkhornOptions sinkhorn;
};

/// How the reconstruction was obtained.
struct SyncSpectrum {
  std::vector<double> eigenvalues;  // top n, descending
  double top_gap = 0.0;             // smallest consecutive gap among the top n
  double split_gap = 0.0;           // lambda_n - lambda_{n+1} (infinity when m = 1)
  bool degenerate = false;          // top_gap < delta: eigenvector gradients are not used
  bool projected = false;           // S^ = m U U^T; false means S^ = S
};

struct SyncResult {
  JointMatching output;  // diagonal blocks are the identity
  Matrix reconstruction; // S^, mn x mn
  SyncSpectrum spectrum;
};

/// The projection is applied whenever lambda_n - lambda_{n+1} >= delta, which
/// keeps the top-n subspace well defined even when eigenvalues repeat inside
/// it; a smaller split falls back to S^ = S.
SyncResult synchronize(const JointMatching& joint, const SyncOptions& options = {});

/// Hungarian discretization of every off-diagonal block.
std::vector<Assignment> discretize_blocks(const JointMatching& joint);

// ---------------------------------------------------------------------------
// Differentiable multi-graph network

/// One multi-graph training or evaluation instance: m graphs of n nodes and
/// an association graph for every pair i < j, listed in lexicographic order.
struct MultiGraphSample {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::shared_ptr<const MatchingInput>> inputs;
  std::vector<Assignment> targets;  // optional: one per pair

  void validate() const;
};

struct NmgmTrace {
  std::vector<ad::Var> pairwise;      // NGM outputs S_ij
  std::vector<ad::Var> synchronized;  // Sinkhorn(exp(alpha_hat S^_ij)), same order
  ad::Var loss;                       // summed permutation loss (when targets are present)
  bool has_loss = false;
  SyncSpectrum spectrum;
};

/// Differentiable synchronization of pairwise outputs listed as in `pairs`.
/// Degenerate spectra use a pass-through gradient for the reconstruction.
std::vector<ad::Var> synchronize(ad::Tape& t, std::span<const ad::Var> pairwise,
                                 std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t m,
                                 std::size_t n, const NetConfig& cfg, double delta, SyncSpectrum* spectrum = nullptr);

NmgmTrace nmgm_forward(ad::Tape& t, const BoundNet& net, const NetConfig& cfg, const MultiGraphSample& sample,
                       double delta);

struct NmgmPass {
  ad::Tape tape;
  BoundNet bound;
  NmgmTrace trace;

  NetParams gradients() const;
};

NmgmPass nmgm_forward(const MultiGraphSample& sample, const NetParams& params, const NetConfig& cfg,
                      double delta = 1e-4);

std::vector<EpochRecord> train_nmgm(TrainState& state, std::span<const MultiGraphSample> data, const NetConfig& cfg,
                                    const OptimConfig& opt, double delta = 1e-4,
                                    const EpochCallback& on_epoch = {});

/// Inference: pairwise NGM predictions, then synchronize (NMGM and NMGM-T
/// share this path; they differ only in how the parameters were trained).
/// `workers` > 1 evaluates the pairwise forwards concurrently.
SyncResult predict_multi(const NetParams& params, const NetConfig& cfg, const MultiGraphSample& sample,
                         const SyncOptions& options = {}, std::size_t workers = 1);

/// Pairwise NGM predictions only, keyed by pair.
PairwiseMatchings predict_pairwise(const NetParams& params, const NetConfig& cfg, const MultiGraphSample& sample,
                                   std::size_t workers = 1);

}  // namespace qapnet
