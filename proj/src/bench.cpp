#include "qapnet/bench.hpp"

#include "qapnet/error.hpp"
#include "qapnet/parallel.hpp"

namespace qapnet {

ClassicSolver parse_classic_solver(std::string_view name) {
  if (name == "sm") return ClassicSolver::kSm;
  if (name == "rrwm") return ClassicSolver::kRrwm;
  throw InvalidArgument("unknown classic solver '" + std::string(name) + "'");
}

Assignment solve_classic(ClassicSolver solver, const SparseMatrix& k, std::size_t n1, std::size_t n2,
                         bool* converged) {
  if (solver == ClassicSolver::kSm) {
    PowerIterationOptions opt;
    opt.throw_on_failure = false;
    const SpectralResult r = spectral_match(k, n1, n2, opt);
    if (converged) *converged = r.converged;
    return discretize(r.soft);
  }
  const RrwmResult r = rrwm(k, n1, n2);
  if (converged) *converged = r.converged;
  return discretize(r.soft);
}

std::vector<MatchingProblem> build_problems(std::span<const SynthSample> samples, double sigma2, double sigma3,
                                            bool with_hyper, std::size_t workers) {
  std::vector<MatchingProblem> out(samples.size());
  parallel_for(samples.size(), workers,
               [&](std::size_t i) { out[i] = build_problem(samples[i], sigma2, sigma3, with_hyper); });
  return out;
}

std::vector<TrainSample> to_train_samples(std::span<const MatchingProblem> problems, std::size_t workers) {
  std::vector<TrainSample> out(problems.size());
  parallel_for(problems.size(), workers, [&](std::size_t i) { out[i] = make_train_sample(problems[i]); });
  return out;
}

SynthProblems build_dataset_problems(const SynthDataset& data, bool with_hyper, std::size_t workers) {
  std::vector<SynthSample> train, test;
  for (const auto& set : data.sets) {
    train.insert(train.end(), set.train.begin(), set.train.end());
    test.insert(test.end(), set.test.begin(), set.test.end());
  }
  const SynthConfig& c = data.config;
  return {build_problems(train, c.sigma2, c.sigma3, with_hyper, workers),
          build_problems(test, c.sigma2, c.sigma3, with_hyper, workers)};
}

double evaluate_network(const NetParams& params, const NetConfig& cfg, std::span<const TrainSample> samples,
                        std::size_t workers) {
  if (samples.empty()) throw InvalidArgument("evaluate_network: no samples");
  std::vector<double> acc(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    if (!samples[i].target) throw InvalidArgument("evaluate_network: sample without ground truth");
    acc[i] = matching_accuracy(hungarian(predict(params, cfg, *samples[i].input)), *samples[i].target);
  });
  double s = 0.0;
  for (double a : acc) s += a;
  return s / static_cast<double>(acc.size());
}

ClassicEvaluation evaluate_classic(ClassicSolver solver, std::span<const MatchingProblem> problems,
                                   std::size_t workers) {
  if (problems.empty()) throw InvalidArgument("evaluate_classic: no problems");
  std::vector<double> acc(problems.size());
  std::vector<char> ok(problems.size());
  parallel_for(problems.size(), workers, [&](std::size_t i) {
    const LawlerForm& l = problems[i].instance.lawler();
    bool converged = true;
    acc[i] = matching_accuracy(solve_classic(solver, l.k, l.n1, l.n2, &converged), problems[i].truth);
    ok[i] = converged;
  });
  ClassicEvaluation out;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    out.accuracy += acc[i];
    out.unconverged += ok[i] ? 0 : 1;
  }
  out.accuracy /= static_cast<double>(acc.size());
  return out;
}

std::vector<MultiGraphSample> group_multigraph(const SynthDataset& data, std::size_t m, bool test,
                                               std::size_t workers) {
  if (m < 2) throw InvalidArgument("group_multigraph: need at least two graphs");
  std::vector<std::vector<const SynthSample*>> groups;
  for (const auto& set : data.sets) {
    const auto& split = test ? set.test : set.train;
    for (std::size_t start = 0; start + m <= split.size(); start += m) {
      std::vector<const SynthSample*> g;
      for (std::size_t k = 0; k < m; ++k) g.push_back(&split[start + k]);
      groups.push_back(std::move(g));
    }
  }
  std::vector<MultiGraphSample> out(groups.size());
  parallel_for(groups.size(), workers,
               [&](std::size_t i) { out[i] = make_multigraph(groups[i], data.config.sigma2); });
  return out;
}

MultiEvaluation evaluate_multigraph(const NetParams& params, const NetConfig& cfg,
                                    std::span<const MultiGraphSample> samples, const SyncOptions& options,
                                    std::size_t workers) {
  if (samples.empty()) throw InvalidArgument("evaluate_multigraph: no samples");
  std::vector<MultiEvaluation> per(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t s) {
    const MultiGraphSample& ms = samples[s];
    if (ms.targets.size() != ms.pairs.size()) throw InvalidArgument("evaluate_multigraph: missing ground truth");
    const PairwiseMatchings pw = predict_pairwise(params, cfg, ms);
    const SyncResult sync = synchronize(build_joint(pw, ms.m, ms.n), options);
    for (std::size_t p = 0; p < ms.pairs.size(); ++p) {
      const auto [i, j] = ms.pairs[p];
      per[s].pairwise += matching_accuracy(hungarian(pw.at(ms.pairs[p])), ms.targets[p]);
      per[s].synchronized += matching_accuracy(hungarian(sync.output.block(i, j)), ms.targets[p]);
    }
    per[s].pairwise /= static_cast<double>(ms.pairs.size());
    per[s].synchronized /= static_cast<double>(ms.pairs.size());
  });
  MultiEvaluation out;
  for (const auto& e : per) {
    out.pairwise += e.pairwise;
    out.synchronized += e.synchronized;
  }
  out.pairwise /= static_cast<double>(per.size());
  out.synchronized /= static_cast<double>(per.size());
  return out;
}

TrainSample qaplib_train_sample(const QaplibInstance& inst) {
  const LawlerForm l = qaplib_to_lawler(inst).lawler();
  const double top = l.k.max_value();
  if (!(top > 0.0)) throw InvalidArgument("qaplib_train_sample: instance '" + inst.name + "' has no positive cost");
  std::vector<Triplet> scaled(l.k.entries().begin(), l.k.entries().end());
  for (auto& t : scaled) t.value /= top;
  SparseMatrix k(l.k.rows(), l.k.cols(), std::move(scaled));
  const QapInstance q = make_lawler(k, inst.n, inst.n, Sense::kMinimize);
  auto input = std::make_shared<const MatchingInput>(make_matching_input(build_association(q)));
  return {std::move(input), std::nullopt, std::make_shared<const SparseMatrix>(std::move(k))};
}

double solve_qaplib_classic(ClassicSolver solver, const QaplibInstance& inst) {
  const SparseMatrix k = qaplib_maximization_affinity(qaplib_to_lawler(inst).lawler().k);
  return qaplib_objective(inst, solve_classic(solver, k, inst.n, inst.n));
}

double solve_qaplib_network(const NetParams& params, const NetConfig& cfg, const TrainSample& sample,
                            const QaplibInstance& inst) {
  return qaplib_objective(inst, hungarian(predict(params, cfg, *sample.input)));
}

}  // namespace qapnet
