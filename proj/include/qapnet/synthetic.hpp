#pragma once

// Synthetic point-registration benchmark. Each set draws ground-truth points
// uniformly in the unit square; every sample scales and perturbs them, adds
// uniform outliers and shuffles the target nodes. The reference graph is the
// Delaunay triangulation of the ground-truth points, the target graph is
// fully connected.
//
// On-disk layout of a generated run:
//   <run>/manifest.txt                 key=value configuration, seed and hash
//   <run>/set<k>/base.txt              ground-truth points of set k
//   <run>/set<k>/{train,test}/<idx>    one sample per file

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qapnet/affinity.hpp"
#include "qapnet/multigraph.hpp"
#include "qapnet/ngm.hpp"

namespace qapnet {

struct SynthConfig {
  std::size_t num_sets = 10;
  std::size_t train_per_set = 200;
  std::size_t test_per_set = 100;
  std::size_t inliers = 10;
  std::size_t outliers = 0;
  double sigma_n = 0.0;
  double scale_low = 1.0;
  double scale_high = 1.0;
  double sigma2 = 5e-7;
  double sigma3 = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  /// Canonical key=value text, one field per line.
  std::string to_text() const;
  /// FNV-1a hash of to_text().
  std::uint64_t hash() const;
};

struct SynthSample {
  PointSet reference;  // inliers in ground-truth order
  PointSet target;     // perturbed inliers and outliers, shuffled
  Assignment truth;    // reference node i -> target node truth[i]
};

struct SynthSet {
  PointSet base;
  std::vector<SynthSample> train;
  std::vector<SynthSample> test;
};

struct SynthDataset {
  SynthConfig config;
  std::vector<SynthSet> sets;

  std::size_t train_size() const;
  std::size_t test_size() const;
};

SynthDataset gen_synthetic(const SynthConfig& cfg);

/// Graphs, affinities and (optionally) the third-order tensor of one sample.
struct MatchingProblem {
  Graph reference;
  Graph target;
  QapInstance instance;
  std::optional<SparseTensor3> hyper;
  TensorDiagnostics diagnostics;
  Assignment truth;
};

MatchingProblem build_problem(const SynthSample& s, double sigma2, double sigma3, bool with_hyper);

/// Network input (plus training target) for a sample.
TrainSample make_train_sample(const MatchingProblem& p);

/// Combines m outlier-free samples of one set into a multi-graph instance:
/// graph k is the target point set of samples[k]. Pair (i, j) matches the
/// Delaunay graph of i against the fully connected graph of j.
MultiGraphSample make_multigraph(const std::vector<const SynthSample*>& samples, double sigma2);

// Dataset files --------------------------------------------------------------

inline constexpr int kDatasetVersion = 1;

void write_dataset(const std::filesystem::path& run, const SynthDataset& data, const std::string& code_version);
SynthDataset read_dataset(const std::filesystem::path& run);
SynthConfig read_manifest(const std::filesystem::path& run);

std::string format_sample(const SynthSample& s);
SynthSample parse_sample(const std::string& text);

/// Fraction of ground-truth matches recovered.
double accuracy(const Assignment& x, const Assignment& truth);

}  // namespace qapnet
