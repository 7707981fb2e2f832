#include "qapnet/ngm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "qapnet/error.hpp"

namespace qapnet {
namespace {

template <class B, class A, class F>
BasicLinear<B> map_linear(const BasicLinear<A>& l, F& f) {
  return {f(l.weight), f(l.bias)};
}

template <class B, class A, class F>
BasicMlp2<B> map_mlp(const BasicMlp2<A>& m, F& f) {
  return {map_linear<B>(m.fc1, f), map_linear<B>(m.fc2, f)};
}

template <class B, class A, class F>
BasicNet<B> map_net(const BasicNet<A>& net, F&& f) {
  BasicNet<B> out;
  for (const auto& layer : net.layers) {
    BasicLayer<B> l{map_mlp<B>(layer.message, f), map_mlp<B>(layer.self_update, f), {}, {}, {}};
    if (layer.classifier) l.classifier = map_linear<B>(*layer.classifier, f);
    if (layer.edge_update) l.edge_update = map_mlp<B>(*layer.edge_update, f);
    if (layer.hyper_message) l.hyper_message = map_mlp<B>(*layer.hyper_message, f);
    out.layers.push_back(std::move(l));
  }
  out.final_classifier = map_linear<B>(net.final_classifier, f);
  return out;
}

std::vector<Matrix*> param_list(NetParams& p) {
  std::vector<Matrix*> out;
  for_each_param(p, [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

BasicLinear<Matrix> init_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  BasicLinear<Matrix> l{Matrix(in, out), Matrix(1, out)};
  for (double& v : l.weight.data()) v = u(rng);
  for (double& v : l.bias.data()) v = u(rng);
  return l;
}

BasicMlp2<Matrix> init_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng) {
  auto fc1 = init_linear(in, hidden, rng);
  auto fc2 = init_linear(hidden, out, rng);
  return {std::move(fc1), std::move(fc2)};
}

ad::Var linear(ad::Tape& t, const BasicLinear<ad::Var>& l, ad::Var x) {
  return ad::add_bias(t, ad::matmul(t, x, l.weight), l.bias);
}

ad::Var mlp(ad::Tape& t, const BasicMlp2<ad::Var>& m, ad::Var x) {
  return ad::relu(t, linear(t, m.fc2, ad::relu(t, linear(t, m.fc1, x))));
}

// Sinkhorn(exp(alpha * classifier(x))) reshaped to n1 x n2.
ad::Var classify(ad::Tape& t, const BasicLinear<ad::Var>& l, ad::Var x, const NetConfig& cfg, std::size_t n1,
                 std::size_t n2) {
  const ad::Var score = ad::exp(t, ad::scale(t, linear(t, l, x), cfg.alpha));
  return ad::sinkhorn(t, ad::unvec(t, score, n1, n2), cfg.sinkhorn_iters_in_net, cfg.epsilon);
}

void check_input(const MatchingInput& input) {
  if (input.n1 == 0 || input.n2 == 0 || !input.pattern || !input.a_norm || !input.propagation ||
      input.v0.rows() != input.vertex_count()) {
    throw InvalidArgument("MatchingInput: incomplete association graph");
  }
}

bool all_finite(const NetParams& p) {
  bool ok = true;
  for_each_param(const_cast<NetParams&>(p), [&](const std::string&, Matrix& m) { ok = ok && m.all_finite(); });
  return ok;
}

}  // namespace

Variant parse_variant(std::string_view name) {
  if (name == "ngm") return Variant::kNgm;
  if (name == "ngm-v") return Variant::kNgmV;
  if (name == "ngm+" || name == "ngm-plus") return Variant::kNgmPlus;
  if (name == "nhgm") return Variant::kNhgm;
  if (name == "nmgm") return Variant::kNmgm;
  throw InvalidArgument("unknown variant '" + std::string(name) + "' (expected ngm, ngm-v, ngm+, nhgm or nmgm)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kNgm: return "ngm";
    case Variant::kNgmV: return "ngm-v";
    case Variant::kNgmPlus: return "ngm+";
    case Variant::kNhgm: return "nhgm";
    case Variant::kNmgm: return "nmgm";
  }
  return "ngm";
}

NetConfig NetConfig::for_variant(Variant v) {
  NetConfig cfg;
  cfg.sinkhorn_embedding = v != Variant::kNgmV;
  cfg.edge_embedding = v == Variant::kNgmPlus;
  cfg.hyper = v == Variant::kNhgm;
  return cfg;
}

void NetConfig::validate() const {
  if (num_layers == 0) throw InvalidArgument("NetConfig: num_layers must be positive");
  if (channels == 0) throw InvalidArgument("NetConfig: channels must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("NetConfig: alpha must be positive");
  if (!(alpha_hat > 0.0) || !std::isfinite(alpha_hat)) throw InvalidArgument("NetConfig: alpha_hat must be positive");
  if (!std::isfinite(lambda2) || !std::isfinite(lambda3)) throw InvalidArgument("NetConfig: lambdas must be finite");
  if (sinkhorn_iters_in_net == 0) throw InvalidArgument("NetConfig: sinkhorn_iters_in_net must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("NetConfig: epsilon must be positive");
}

std::size_t NetConfig::input_width(std::size_t layer) const {
  if (layer == 0) return 1;
  return channels + (sinkhorn_embedding ? 1 : 0);
}

std::size_t NetConfig::output_width() const { return input_width(num_layers); }

NetParams init_params(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 shared(splitmix64(seed));
  std::mt19937_64 edge_rng(splitmix64(seed ^ 0x65646765ULL));
  std::mt19937_64 hyper_rng(splitmix64(seed ^ 0x6879706572ULL));
  const std::size_t c = cfg.channels;
  NetParams p;
  for (std::size_t k = 0; k < cfg.num_layers; ++k) {
    const std::size_t in = cfg.input_width(k);
    BasicLayer<Matrix> layer{init_mlp(in, c, c, shared), init_mlp(in, c, c, shared), {}, {}, {}};
    if (cfg.sinkhorn_embedding) layer.classifier = init_linear(c, 1, shared);
    if (cfg.edge_embedding) {
      const std::size_t edge_in = (k == 0 ? 1 : c) + in;
      layer.edge_update = init_mlp(edge_in, c, c, edge_rng);
    }
    if (cfg.hyper) layer.hyper_message = init_mlp(in, c, c, hyper_rng);
    p.layers.push_back(std::move(layer));
  }
  p.final_classifier = init_linear(cfg.output_width(), 1, shared);
  return p;
}

std::size_t parameter_count(const NetParams& params) {
  std::size_t n = 0;
  for_each_param(const_cast<NetParams&>(params), [&](const std::string&, Matrix& m) { n += m.size(); });
  return n;
}

ad::HyperPattern make_hyper_pattern(const SparseTensor3& h) {
  ad::HyperPattern p;
  p.dim = h.dim();
  std::vector<std::size_t> count(h.dim(), 0);
  for (const auto& e : h.entries()) ++count[e.i];
  p.entries.reserve(h.nnz());
  for (const auto& e : h.entries()) p.entries.push_back({e.i, e.j, e.k, e.value / static_cast<double>(count[e.i])});
  return p;
}

MatchingInput make_matching_input(const AssociationGraph& assoc, const SparseTensor3* hyper) {
  if (assoc.weights.nnz() != assoc.a_norm.nnz()) throw InvalidArgument("make_matching_input: W and A' differ in support");
  MatchingInput in;
  in.n1 = assoc.n1;
  in.n2 = assoc.n2;
  in.v0 = Matrix(assoc.vertex_count(), 1, assoc.v0);
  in.pattern = std::make_shared<const ad::SparsePattern>(ad::SparsePattern::from(assoc.weights));
  const auto w = assoc.weights.entries();
  const auto a = assoc.a_norm.entries();
  std::vector<double> a_norm(w.size()), prop(w.size());
  std::vector<std::size_t> source(w.size());
  in.edge_init = Matrix(w.size(), 1);
  for (std::size_t e = 0; e < w.size(); ++e) {
    if (w[e].row != a[e].row || w[e].col != a[e].col) {
      throw InvalidArgument("make_matching_input: W and A' differ in support");
    }
    a_norm[e] = a[e].value;
    prop[e] = a[e].value * w[e].value;
    source[e] = w[e].col;
    in.edge_init(e, 0) = w[e].value;
  }
  in.a_norm = std::make_shared<const std::vector<double>>(std::move(a_norm));
  in.propagation = std::make_shared<const std::vector<double>>(std::move(prop));
  in.edge_source = std::make_shared<const std::vector<std::size_t>>(std::move(source));
  if (hyper) {
    if (hyper->dim() != assoc.vertex_count()) throw InvalidArgument("make_matching_input: tensor does not match K");
    in.hyper = std::make_shared<const ad::HyperPattern>(make_hyper_pattern(*hyper));
  }
  return in;
}

BoundNet bind_params(ad::Tape& tape, const NetParams& params, bool trainable) {
  return map_net<ad::Var>(params, [&](const Matrix& m) { return trainable ? tape.parameter(m) : tape.constant(m); });
}

ForwardTrace forward(ad::Tape& t, const BoundNet& net, const NetConfig& cfg, const MatchingInput& input) {
  cfg.validate();
  check_input(input);
  if (net.layers.size() != cfg.num_layers) throw InvalidArgument("forward: parameters do not match the layer count");
  if (cfg.hyper && !input.hyper) throw InvalidArgument("forward: hypergraph variant needs a third-order affinity");

  ForwardTrace trace;
  ad::Var v = t.constant(input.v0);
  ad::Var edges = t.constant(input.edge_init);
  for (std::size_t k = 0; k < cfg.num_layers; ++k) {
    const auto& layer = net.layers[k];
    const ad::Var fm = mlp(t, layer.message, v);
    ad::Var msg;
    if (cfg.edge_embedding) {
      if (!layer.edge_update) throw InvalidArgument("forward: missing edge-update parameters");
      const ad::Var gathered = ad::gather_rows(t, v, input.edge_source);
      edges = mlp(t, *layer.edge_update, ad::concat_cols(t, edges, gathered));
      trace.edge_embeddings.push_back(edges);
      msg = ad::edge_aggregate(t, input.pattern, input.a_norm, edges, fm);
    } else {
      msg = ad::spmm(t, input.pattern, input.propagation, fm);
    }
    if (cfg.lambda2 != 1.0) msg = ad::scale(t, msg, cfg.lambda2);
    if (cfg.hyper && cfg.lambda3 != 0.0) {
      if (!layer.hyper_message) throw InvalidArgument("forward: missing third-order parameters");
      const ad::Var p = mlp(t, *layer.hyper_message, v);
      msg = ad::add(t, msg, ad::scale(t, ad::hyper_message(t, input.hyper, p), cfg.lambda3));
    }
    const ad::Var m = ad::add(t, msg, mlp(t, layer.self_update, v));
    trace.messages.push_back(m);
    if (cfg.sinkhorn_embedding) {
      if (!layer.classifier) throw InvalidArgument("forward: missing classifier parameters");
      const ad::Var s = classify(t, *layer.classifier, m, cfg, input.n1, input.n2);
      v = ad::concat_cols(t, m, ad::vec(t, s));
    } else {
      v = m;
    }
    trace.embeddings.push_back(v);
  }
  trace.output = classify(t, net.final_classifier, v, cfg, input.n1, input.n2);
  return trace;
}

NetParams gradients_of(const ad::Tape& tape, const BoundNet& bound) {
  return map_net<Matrix>(bound, [&](ad::Var v) { return tape.grad(v); });
}

NetParams ForwardPass::gradients() const { return gradients_of(tape, bound); }

namespace {

ForwardPass run_forward(const MatchingInput& input, const NetParams& params, const NetConfig& cfg) {
  ForwardPass pass;
  pass.bound = bind_params(pass.tape, params, true);
  pass.trace = forward(pass.tape, pass.bound, cfg, input);
  return pass;
}

}  // namespace

ForwardPass forward_ngm(const MatchingInput& input, const NetParams& params, const NetConfig& cfg) {
  if (cfg.edge_embedding || cfg.hyper) throw InvalidArgument("forward_ngm: configuration enables NGM+/NHGM features");
  return run_forward(input, params, cfg);
}

ForwardPass forward_ngm_plus(const MatchingInput& input, const NetParams& params, const NetConfig& cfg) {
  if (!cfg.edge_embedding) throw InvalidArgument("forward_ngm_plus: edge embedding is disabled");
  return run_forward(input, params, cfg);
}

ForwardPass forward_nhgm(const MatchingInput& input, const NetParams& params, const NetConfig& cfg) {
  if (!cfg.hyper) throw InvalidArgument("forward_nhgm: third-order messages are disabled");
  return run_forward(input, params, cfg);
}

Matrix predict(const NetParams& params, const NetConfig& cfg, const MatchingInput& input) {
  ad::Tape t;
  const BoundNet net = bind_params(t, params, false);
  return t.value(forward(t, net, cfg, input).output);
}

ad::Var perm_loss(ad::Tape& tape, ad::Var s, const Assignment& target) { return ad::binary_cross_entropy(tape, s, target); }

ad::Var qap_loss(ad::Tape& tape, ad::Var s, std::shared_ptr<const SparseMatrix> k, Sense sense) {
  return ad::quadratic_form(tape, s, std::move(k), sense == Sense::kMaximize ? -1.0 : 1.0);
}

// ---------------------------------------------------------------------------

AdamState AdamState::zeros_like(const NetParams& params) {
  auto zeros = [](const Matrix& m) { return Matrix(m.rows(), m.cols()); };
  return {map_net<Matrix>(params, zeros), map_net<Matrix>(params, zeros), 0};
}

void AdamState::apply(NetParams& params, const NetParams& grads, const OptimConfig& opt) {
  auto p = param_list(params);
  auto g = param_list(const_cast<NetParams&>(grads));
  auto m1 = param_list(first_moment);
  auto m2 = param_list(second_moment);
  if (g.size() != p.size() || m1.size() != p.size() || m2.size() != p.size()) {
    throw InvalidArgument("AdamState: parameter structure mismatch");
  }
  ++step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (std::size_t q = 0; q < p.size(); ++q) {
    auto pv = p[q]->data();
    auto gv = g[q]->data();
    auto mv = m1[q]->data();
    auto vv = m2[q]->data();
    if (gv.size() != pv.size() || mv.size() != pv.size() || vv.size() != pv.size()) {
      throw InvalidArgument("AdamState: parameter shape mismatch");
    }
    for (std::size_t i = 0; i < pv.size(); ++i) {
      mv[i] = opt.beta1 * mv[i] + (1.0 - opt.beta1) * gv[i];
      vv[i] = opt.beta2 * vv[i] + (1.0 - opt.beta2) * gv[i] * gv[i];
      pv[i] -= opt.learning_rate * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + opt.epsilon);
    }
  }
}

namespace {

struct StepResult {
  double loss = 0.0;
  Matrix soft;
};

StepResult loss_and_grad(const NetParams& params, const NetConfig& cfg, const TrainSample& sample, LossKind kind,
                         Sense sense, NetParams* grads) {
  if (!sample.input) throw InvalidArgument("TrainSample: missing input");
  ForwardPass pass = run_forward(*sample.input, params, cfg);
  ad::Var loss;
  if (kind == LossKind::kPermutation) {
    if (!sample.target) throw InvalidArgument("TrainSample: permutation loss needs a ground truth");
    loss = perm_loss(pass.tape, pass.trace.output, *sample.target);
  } else {
    if (!sample.objective) throw InvalidArgument("TrainSample: objective loss needs an affinity matrix");
    loss = qap_loss(pass.tape, pass.trace.output, sample.objective, sense);
  }
  StepResult r{pass.tape.value(loss)(0, 0), pass.soft()};
  if (grads) {
    pass.tape.backward(loss);
    *grads = pass.gradients();
  }
  return r;
}

}  // namespace

double sample_loss_and_grad(const NetParams& params, const NetConfig& cfg, const TrainSample& sample, LossKind loss,
                            Sense sense, NetParams* grads) {
  return loss_and_grad(params, cfg, sample, loss, sense, grads).loss;
}

std::vector<EpochRecord> run_epochs(TrainState& state, std::size_t sample_count, const OptimConfig& opt,
                                    const StepFunction& step, const EpochCallback& on_epoch) {
  if (sample_count == 0) throw InvalidArgument("train: no training samples");
  if (!(opt.learning_rate >= 0.0)) throw InvalidArgument("train: learning rate must be nonnegative");
  if (state.optimizer.step == 0) state.optimizer = AdamState::zeros_like(state.params);

  std::vector<EpochRecord> log;
  std::vector<std::size_t> order(sample_count);
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    const std::size_t epoch = state.epochs_done;
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix64(opt.seed ^ splitmix64(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0, correct = 0.0;
    for (std::size_t idx : order) {
      const StepOutcome r = step(state.params, idx);
      if (!std::isfinite(r.loss) || !all_finite(r.grads)) {
        throw NumericalError("train: non-finite loss or gradient at epoch " + std::to_string(epoch));
      }
      state.optimizer.apply(state.params, r.grads, opt);
      total += r.loss;
      correct += r.accuracy;
    }
    ++state.epochs_done;
    const double count = static_cast<double>(sample_count);
    EpochRecord rec{epoch, total / count, correct / count};
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

std::vector<EpochRecord> train(TrainState& state, std::span<const TrainSample> data, const NetConfig& cfg,
                               const OptimConfig& opt, const EpochCallback& on_epoch) {
  return run_epochs(
      state, data.size(), opt,
      [&](const NetParams& params, std::size_t idx) {
        StepOutcome out;
        const StepResult r = loss_and_grad(params, cfg, data[idx], opt.loss, opt.sense, &out.grads);
        out.loss = r.loss;
        if (data[idx].target && r.soft.all_finite()) out.accuracy = matching_accuracy(hungarian(r.soft), *data[idx].target);
        return out;
      },
      on_epoch);
}

double matching_accuracy(const Assignment& x, const Assignment& truth) {
  if (x.rows() != truth.rows() || x.cols() != truth.cols()) throw InvalidArgument("matching_accuracy: shape mismatch");
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    if (truth[i] == Assignment::kUnassigned) continue;
    ++total;
    if (x[i] == truth[i]) ++hit;
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace qapnet
