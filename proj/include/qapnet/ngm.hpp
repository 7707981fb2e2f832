#pragma once

// Neural solvers on the association graph of a Lawler QAP.
//
// Layer k aggregates messages over the association graph,
//   m(k) = (A' o W) f_m(v(k-1)) + f_v(v(k-1)),
// where A' o W is the elementwise product of the column-normalized adjacency
// and the affinity weights (a sparse propagation operator, not a dense
// matrix product). With Sinkhorn embedding the layer output is
//   v(k) = [m(k) | vec(Sinkhorn(exp(alpha * classifier_k(m(k)))))].
// Edge embedding replaces W with per-channel learned edge features, and the
// hypergraph variant adds a third-order message lambda3 * (A3' o H) x2 p x3 p.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qapnet/affinity.hpp"
#include "qapnet/matrix.hpp"
#include "qapnet/numerics.hpp"
#include "qapnet/tape.hpp"

namespace qapnet {

enum class Variant { kNgm, kNgmV, kNgmPlus, kNhgm, kNmgm };

Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);

struct NetConfig {
  std::size_t num_layers = 3;
  std::size_t channels = 16;
  double alpha = 20.0;
  double alpha_hat = 20.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  bool sinkhorn_embedding = true;
  bool edge_embedding = false;
  bool hyper = false;
  std::size_t sinkhorn_iters_in_net = 10;
  double epsilon = 1e-3;

  static NetConfig for_variant(Variant v);
  void validate() const;
  /// Width of the vertex embedding entering layer k (0-based).
  std::size_t input_width(std::size_t layer) const;
  std::size_t output_width() const;
};

template <class T>
struct BasicLinear {
  T weight;  // in x out
  T bias;    // 1 x out
};

/// Two fully-connected layers, each followed by a rectifier.
template <class T>
struct BasicMlp2 {
  BasicLinear<T> fc1;
  BasicLinear<T> fc2;
};

template <class T>
struct BasicLayer {
  BasicMlp2<T> message;
  BasicMlp2<T> self_update;
  std::optional<BasicLinear<T>> classifier;      // Sinkhorn embedding
  std::optional<BasicMlp2<T>> edge_update;       // edge embedding
  std::optional<BasicMlp2<T>> hyper_message;     // third-order messages
};

template <class T>
struct BasicNet {
  std::vector<BasicLayer<T>> layers;
  BasicLinear<T> final_classifier;
};

using NetParams = BasicNet<Matrix>;
using BoundNet = BasicNet<ad::Var>;

/// Visits every parameter with its checkpoint key, in a fixed order.
template <class Net, class F>
void for_each_param(Net& net, F&& f) {
  auto linear = [&](const std::string& prefix, auto& l) {
    f(prefix + ".weight", l.weight);
    f(prefix + ".bias", l.bias);
  };
  auto mlp = [&](const std::string& prefix, auto& m) {
    linear(prefix + ".fc1", m.fc1);
    linear(prefix + ".fc2", m.fc2);
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& layer = net.layers[k];
    const std::string p = "layer" + std::to_string(k);
    mlp(p + ".message", layer.message);
    mlp(p + ".self_update", layer.self_update);
    if (layer.classifier) linear(p + ".classifier", *layer.classifier);
    if (layer.edge_update) mlp(p + ".edge_update", *layer.edge_update);
    if (layer.hyper_message) mlp(p + ".hyper_message", *layer.hyper_message);
  }
  linear("final.classifier", net.final_classifier);
}

/// Uniform(+-1/sqrt(fan_in)) initialization. Parameters shared by all
/// variants draw from one stream; edge and hypergraph extras use their own
/// streams, so variants built from one seed agree on the shared parameters.
NetParams init_params(const NetConfig& cfg, std::uint64_t seed);
std::size_t parameter_count(const NetParams& params);

/// Precomputed association-graph operators for one problem instance.
struct MatchingInput {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  Matrix v0;                                                  // N x 1
  std::shared_ptr<const ad::SparsePattern> pattern;          // support of W
  std::shared_ptr<const std::vector<double>> a_norm;         // A' on the support
  std::shared_ptr<const std::vector<double>> propagation;    // A' o W on the support
  std::shared_ptr<const std::vector<std::size_t>> edge_source;  // column of each support entry
  Matrix edge_init;                                           // nnz x 1, W on the support
  std::shared_ptr<const ad::HyperPattern> hyper;              // A3' o H, optional

  std::size_t vertex_count() const { return n1 * n2; }
};

MatchingInput make_matching_input(const AssociationGraph& assoc, const SparseTensor3* hyper = nullptr);
/// Third-order operator with every slice normalized by its mode-1 count.
ad::HyperPattern make_hyper_pattern(const SparseTensor3& h);

struct ForwardTrace {
  ad::Var output;                       // n1 x n2 soft matching
  std::vector<ad::Var> messages;        // m(k)
  std::vector<ad::Var> embeddings;      // v(k)
  std::vector<ad::Var> edge_embeddings; // W(k), edge embedding only
};

BoundNet bind_params(ad::Tape& tape, const NetParams& params, bool trainable);
/// Parameter gradients after tape.backward(), shaped like the parameters.
NetParams gradients_of(const ad::Tape& tape, const BoundNet& bound);
ForwardTrace forward(ad::Tape& tape, const BoundNet& net, const NetConfig& cfg, const MatchingInput& input);

/// A recorded forward pass that owns its tape.
struct ForwardPass {
  ad::Tape tape;
  BoundNet bound;
  ForwardTrace trace;

  Matrix soft() const { return tape.value(trace.output); }
  /// Gradients of every parameter after tape.backward(loss).
  NetParams gradients() const;
};

ForwardPass forward_ngm(const MatchingInput& input, const NetParams& params, const NetConfig& cfg);
ForwardPass forward_ngm_plus(const MatchingInput& input, const NetParams& params, const NetConfig& cfg);
ForwardPass forward_nhgm(const MatchingInput& input, const NetParams& params, const NetConfig& cfg);

/// Soft matching without recording gradients.
Matrix predict(const NetParams& params, const NetConfig& cfg, const MatchingInput& input);

/// Clamped permutation cross-entropy.
ad::Var perm_loss(ad::Tape& tape, ad::Var s, const Assignment& target);
/// QAP objective vec(S)^T K vec(S), negated for maximization so training
/// always descends.
ad::Var qap_loss(ad::Tape& tape, ad::Var s, std::shared_ptr<const SparseMatrix> k, Sense sense);

// ---------------------------------------------------------------------------
// Training

enum class LossKind { kPermutation, kQapObjective };

struct OptimConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kPermutation;
  Sense sense = Sense::kMaximize;
};

/// Adaptive-moment optimizer state over a parameter set.
struct AdamState {
  NetParams first_moment;
  NetParams second_moment;
  std::size_t step = 0;

  static AdamState zeros_like(const NetParams& params);
  void apply(NetParams& params, const NetParams& grads, const OptimConfig& opt);
};

struct TrainSample {
  std::shared_ptr<const MatchingInput> input;
  std::optional<Assignment> target;                 // permutation loss
  std::shared_ptr<const SparseMatrix> objective;    // objective loss
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;  // permutation loss only
};

struct TrainState {
  NetParams params;
  AdamState optimizer;
  std::size_t epochs_done = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Outcome of one optimization step on one sample.
struct StepOutcome {
  double loss = 0.0;
  NetParams grads;
  double accuracy = 0.0;
};
using StepFunction = std::function<StepOutcome(const NetParams& params, std::size_t sample)>;

/// Generic epoch loop shared by the pairwise and multi-graph trainers: runs
/// opt.epochs epochs over `sample_count` samples in a seeded order and applies
/// one optimizer step per sample.
std::vector<EpochRecord> run_epochs(TrainState& state, std::size_t sample_count, const OptimConfig& opt,
                                    const StepFunction& step, const EpochCallback& on_epoch = {});

/// Loss and gradients of one sample.
double sample_loss_and_grad(const NetParams& params, const NetConfig& cfg, const TrainSample& sample,
                            LossKind loss, Sense sense, NetParams* grads);

/// Runs opt.epochs further epochs from `state`, one sample per step, visiting
/// samples in an order seeded by (opt.seed, epoch). Throws NumericalError on
/// a non-finite loss.
std::vector<EpochRecord> train(TrainState& state, std::span<const TrainSample> data, const NetConfig& cfg,
                               const OptimConfig& opt, const EpochCallback& on_epoch = {});

/// Fraction of rows of x that agree with the ground truth.
double matching_accuracy(const Assignment& x, const Assignment& truth);

}  // namespace qapnet
