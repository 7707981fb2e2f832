#include "qapnet/multigraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qapnet/error.hpp"
#include "qapnet/parallel.hpp"

namespace qapnet {
namespace {

SyncSpectrum analyse_spectrum(const EigenDecomposition& eig, std::size_t n, double delta) {
  SyncSpectrum s;
  s.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(n));
  s.top_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < n; ++i) s.top_gap = std::min(s.top_gap, eig.values[i - 1] - eig.values[i]);
  s.split_gap = eig.values.size() > n ? eig.values[n - 1] - eig.values[n] : std::numeric_limits<double>::infinity();
  s.degenerate = s.top_gap < delta;
  s.projected = s.split_gap >= delta;
  return s;
}

Matrix scaled_projector(const EigenDecomposition& eig, std::size_t n, double scale) {
  const std::size_t dim = eig.vectors.rows();
  Matrix out(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = r; c < dim; ++c) {
      double s = 0.0;
      for (std::size_t q = 0; q < n; ++q) s += eig.vectors(r, q) * eig.vectors(c, q);
      out(r, c) = out(c, r) = scale * s;
    }
  return out;
}

Matrix block_of(const Matrix& full, std::size_t i, std::size_t j, std::size_t n) {
  Matrix b(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) b(r, c) = full(i * n + r, j * n + c);
  return b;
}

void check_pairs(std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t m) {
  if (pairs.size() != m * (m - 1) / 2) throw InvalidArgument("multi-graph: expected one entry per pair i < j");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j, ++idx)
      if (pairs[idx] != std::pair{i, j}) throw InvalidArgument("multi-graph: pairs must be listed in order");
}

}  // namespace

Matrix JointMatching::assembled() const {
  Matrix out(m * n, m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const Matrix& b = block(i, j);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out(i * n + r, j * n + c) = b(r, c);
    }
  return out;
}

JointMatching build_joint(const PairwiseMatchings& pairwise, std::size_t m, std::size_t n) {
  if (m == 0 || n == 0) throw InvalidArgument("build_joint: m and n must be positive");
  JointMatching j{m, n, std::vector<Matrix>(m * m)};
  for (std::size_t a = 0; a < m; ++a) j.blocks[a * m + a] = Matrix::identity(n);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      auto it = pairwise.find({a, b});
      if (it == pairwise.end()) {
        throw InvalidArgument("build_joint: missing pair (" + std::to_string(a) + ", " + std::to_string(b) + ")");
      }
      const Matrix& s = it->second;
      if (s.rows() != n || s.cols() != n) throw InvalidArgument("build_joint: every block must be n x n");
      for (double v : s.data())
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("build_joint: entries must lie in [0, 1]");
      j.blocks[a * m + b] = s;
      j.blocks[b * m + a] = s.transposed();
    }
  for (const auto& [key, value] : pairwise) {
    (void)value;
    if (key.first >= key.second || key.second >= m) throw InvalidArgument("build_joint: pair keys must satisfy i < j < m");
  }
  return j;
}

SyncResult synchronize(const JointMatching& joint, const SyncOptions& options) {
  const std::size_t m = joint.m, n = joint.n;
  if (m == 0 || n == 0 || joint.blocks.size() != m * m) throw InvalidArgument("synchronize: malformed joint matching");
  if (!(options.delta >= 0.0) || !(options.alpha_hat > 0.0)) throw InvalidArgument("synchronize: bad options");
  SyncResult result;
  const Matrix s = joint.assembled();
  if (!s.is_symmetric(1e-9)) throw InvalidArgument("synchronize: joint matrix is not symmetric");

  if (m == 1) {
    result.output = joint;
    result.reconstruction = s;
    result.spectrum.eigenvalues.assign(n, 1.0);
    result.spectrum.top_gap = n > 1 ? 0.0 : std::numeric_limits<double>::infinity();
    result.spectrum.split_gap = std::numeric_limits<double>::infinity();
    result.spectrum.degenerate = n > 1;
    return result;
  }

  const EigenDecomposition eig = sym_eig(s);
  result.spectrum = analyse_spectrum(eig, n, options.delta);
  result.reconstruction = result.spectrum.projected ? scaled_projector(eig, n, static_cast<double>(m)) : s;

  result.output = JointMatching{m, n, std::vector<Matrix>(m * m)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) {
        result.output.blocks[i * m + j] = Matrix::identity(n);
        continue;
      }
      Matrix b = block_of(result.reconstruction, i, j, n);
      for (double& v : b.data()) v = std::exp(options.alpha_hat * v);
      result.output.blocks[i * m + j] = sinkhorn(b, options.sinkhorn).valid();
    }
  return result;
}

std::vector<Assignment> discretize_blocks(const JointMatching& joint) {
  std::vector<Assignment> out;
  for (std::size_t i = 0; i < joint.m; ++i)
    for (std::size_t j = 0; j < joint.m; ++j)
      if (i != j) out.push_back(hungarian(joint.block(i, j)));
  return out;
}

// ---------------------------------------------------------------------------

void MultiGraphSample::validate() const {
  if (m < 2 || n == 0) throw InvalidArgument("MultiGraphSample: need at least two graphs");
  check_pairs(pairs, m);
  if (inputs.size() != pairs.size()) throw InvalidArgument("MultiGraphSample: one input per pair required");
  for (const auto& in : inputs)
    if (!in || in->n1 != n || in->n2 != n) throw InvalidArgument("MultiGraphSample: every pair must be n x n");
  if (!targets.empty() && targets.size() != pairs.size()) {
    throw InvalidArgument("MultiGraphSample: one target per pair required");
  }
}

std::vector<ad::Var> synchronize(ad::Tape& t, std::span<const ad::Var> pairwise,
                                 std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t m,
                                 std::size_t n, const NetConfig& cfg, double delta, SyncSpectrum* spectrum) {
  if (m < 2) throw InvalidArgument("synchronize: need at least two graphs");
  check_pairs(pairs, m);
  if (pairwise.size() != pairs.size()) throw InvalidArgument("synchronize: one block per pair required");

  std::vector<ad::Var> grid(m * m);
  const ad::Var eye = t.constant(Matrix::identity(n));
  for (std::size_t i = 0; i < m; ++i) grid[i * m + i] = eye;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    grid[i * m + j] = pairwise[p];
    grid[j * m + i] = ad::transpose(t, pairwise[p]);
  }
  const ad::Var joint = ad::assemble_blocks(t, grid, m);
  const EigenDecomposition eig = sym_eig(t.value(joint));
  const SyncSpectrum spec = analyse_spectrum(eig, n, delta);
  const double scale = static_cast<double>(m);

  ad::Var recon = joint;
  if (spec.projected && !spec.degenerate) {
    recon = ad::topk_projector(t, joint, n, scale);
  } else if (spec.projected) {
    recon = ad::pass_through(t, joint, scaled_projector(eig, n, scale));
  }
  if (spectrum) *spectrum = spec;

  std::vector<ad::Var> out;
  for (const auto& [i, j] : pairs) {
    const ad::Var b = ad::slice(t, recon, i * n, j * n, n, n);
    out.push_back(ad::sinkhorn(t, ad::exp(t, ad::scale(t, b, cfg.alpha_hat)), cfg.sinkhorn_iters_in_net, cfg.epsilon));
  }
  return out;
}

NmgmTrace nmgm_forward(ad::Tape& t, const BoundNet& net, const NetConfig& cfg, const MultiGraphSample& sample,
                       double delta) {
  sample.validate();
  NmgmTrace trace;
  for (const auto& in : sample.inputs) trace.pairwise.push_back(forward(t, net, cfg, *in).output);
  trace.synchronized = synchronize(t, trace.pairwise, sample.pairs, sample.m, sample.n, cfg, delta, &trace.spectrum);
  if (!sample.targets.empty()) {
    trace.loss = perm_loss(t, trace.synchronized[0], sample.targets[0]);
    for (std::size_t p = 1; p < sample.targets.size(); ++p)
      trace.loss = ad::add(t, trace.loss, perm_loss(t, trace.synchronized[p], sample.targets[p]));
    trace.has_loss = true;
  }
  return trace;
}

NetParams NmgmPass::gradients() const { return gradients_of(tape, bound); }

NmgmPass nmgm_forward(const MultiGraphSample& sample, const NetParams& params, const NetConfig& cfg, double delta) {
  NmgmPass pass;
  pass.bound = bind_params(pass.tape, params, true);
  pass.trace = nmgm_forward(pass.tape, pass.bound, cfg, sample, delta);
  return pass;
}

std::vector<EpochRecord> train_nmgm(TrainState& state, std::span<const MultiGraphSample> data, const NetConfig& cfg,
                                    const OptimConfig& opt, double delta, const EpochCallback& on_epoch) {
  for (const auto& s : data)
    if (s.targets.empty()) throw InvalidArgument("train_nmgm: every sample needs ground-truth targets");
  return run_epochs(
      state, data.size(), opt,
      [&](const NetParams& params, std::size_t idx) {
        NmgmPass pass = nmgm_forward(data[idx], params, cfg, delta);
        StepOutcome out;
        out.loss = pass.tape.value(pass.trace.loss)(0, 0);
        pass.tape.backward(pass.trace.loss);
        out.grads = pass.gradients();
        double acc = 0.0;
        for (std::size_t p = 0; p < data[idx].targets.size(); ++p) {
          const Matrix& s = pass.tape.value(pass.trace.synchronized[p]);
          if (s.all_finite()) acc += matching_accuracy(hungarian(s), data[idx].targets[p]);
        }
        out.accuracy = acc / static_cast<double>(data[idx].targets.size());
        return out;
      },
      on_epoch);
}

PairwiseMatchings predict_pairwise(const NetParams& params, const NetConfig& cfg, const MultiGraphSample& sample,
                                   std::size_t workers) {
  sample.validate();
  std::vector<Matrix> out(sample.pairs.size());
  parallel_for(sample.pairs.size(), workers, [&](std::size_t p) { out[p] = predict(params, cfg, *sample.inputs[p]); });
  PairwiseMatchings result;
  for (std::size_t p = 0; p < out.size(); ++p) result.emplace(sample.pairs[p], std::move(out[p]));
  return result;
}

SyncResult predict_multi(const NetParams& params, const NetConfig& cfg, const MultiGraphSample& sample,
                         const SyncOptions& options, std::size_t workers) {
  return synchronize(build_joint(predict_pairwise(params, cfg, sample, workers), sample.m, sample.n), options);
}

}  // namespace qapnet
