// Command-line front end: dataset generation, training, evaluation, QAPLIB
// runs and multi-graph synchronization. Results are written as CSV.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "qapnet/bench.hpp"
#include "qapnet/checkpoint.hpp"
#include "qapnet/error.hpp"
#include "qapnet/parallel.hpp"
#include "qapnet/version.hpp"

using namespace qapnet;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

class UsageError : public Error {
 public:
  using Error::Error;
};

// key = value lines; '#' starts a comment. Keys may use '-' or '_'.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Config values fill options not given on the command line.
void apply_config(CLI::App& root, CLI::App& cmd, const std::string& path) {
  for (const auto& [key, value] : read_config(path)) {
    bool known = false;
    for (const CLI::App* sub : root.get_subcommands({}))
      if (sub->get_option_no_throw("--" + key)) known = true;
    if (!known) throw UsageError("unknown config key '" + key + "'");
    CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (!opt || opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out.precision(10);
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

bool needs_hyper(const Checkpoint& c) { return c.config.hyper; }

// ---------------------------------------------------------------------------

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t workers = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o, const char* out_help) {
  cmd->add_option("--config", o.config, "key = value file; command-line flags take precedence");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--out", o.out, out_help);
  cmd->add_option("--workers", o.workers, "worker threads for evaluation")->check(CLI::PositiveNumber);
}

// synth ----------------------------------------------------------------------

struct SynthOptions {
  CommonOptions common;
  SynthConfig cfg;
};

int run_synth(SynthOptions& o) {
  require(!o.common.out.empty(), "synth: --out is required");
  o.cfg.seed = o.common.seed;
  const SynthDataset d = gen_synthetic(o.cfg);
  write_dataset(o.common.out, d, std::string(kVersion));
  std::cout << "wrote " << d.train_size() << " train and " << d.test_size() << " test samples to " << o.common.out
            << " (config hash " << std::hex << o.cfg.hash() << std::dec << ")\n";
  return 0;
}

// train ----------------------------------------------------------------------

struct TrainOptions {
  CommonOptions common;
  std::string data;
  std::string variant = "ngm";
  std::string log;
  std::string resume;
  std::string init;
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t channels = 16;
  std::size_t layers = 3;
  double alpha = 20.0;
  double lambda3 = 1.0;
  std::size_t graphs = 4;
  double delta = 1e-4;
  std::size_t limit = 0;
};

int run_train(TrainOptions& o) {
  require(!o.data.empty(), "train: --data is required");
  require(!o.common.out.empty(), "train: --out is required");
  const Variant variant = [&] {
    try {
      return parse_variant(o.variant);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }();

  require(o.resume.empty() || o.init.empty(), "train: --resume and --init are exclusive");
  Checkpoint ckpt;
  if (!o.init.empty()) {
    // Warm start: parameters only, fresh optimizer and epoch count.
    const Checkpoint init = load_checkpoint(o.init);
    const NetConfig want = NetConfig::for_variant(variant);
    require(init.config.sinkhorn_embedding == want.sinkhorn_embedding && init.config.edge_embedding == want.edge_embedding &&
                init.config.hyper == want.hyper,
            "train: --init checkpoint (" + std::string(variant_name(init.variant)) + ") does not fit variant " +
                std::string(variant_name(variant)));
    ckpt.variant = variant;
    ckpt.config = init.config;
    ckpt.state = TrainState{init.state.params, {}, 0};
  } else if (!o.resume.empty()) {
    ckpt = load_checkpoint(o.resume);
    require(ckpt.variant == variant, "train: --resume checkpoint holds variant '" +
                                         std::string(variant_name(ckpt.variant)) + "'");
  } else {
    ckpt.variant = variant;
    ckpt.config = NetConfig::for_variant(variant);
    ckpt.config.channels = o.channels;
    ckpt.config.num_layers = o.layers;
    ckpt.config.alpha = o.alpha;
    if (ckpt.config.hyper) ckpt.config.lambda3 = o.lambda3;
    ckpt.config.validate();
    ckpt.state = TrainState{init_params(ckpt.config, o.common.seed), {}, 0};
  }

  OptimConfig opt;
  opt.learning_rate = o.lr;
  opt.epochs = o.epochs;
  opt.seed = o.common.seed;

  const SynthDataset data = read_dataset(o.data);
  const std::string log_path = o.log.empty() ? o.common.out + ".log.csv" : o.log;
  std::ofstream log = open_csv(log_path);
  log << "# qapnet train-log v1\nepoch,mean_loss,train_accuracy\n";
  const auto on_epoch = [&](const EpochRecord& r) {
    log << r.epoch << ',' << num(r.mean_loss) << ',' << num(r.accuracy) << '\n' << std::flush;
    std::cerr << "epoch " << r.epoch << " loss " << r.mean_loss << " accuracy " << r.accuracy << '\n';
  };

  if (variant == Variant::kNmgm) {
    std::vector<MultiGraphSample> samples = group_multigraph(data, o.graphs, false, o.common.workers);
    if (o.limit > 0 && samples.size() > o.limit) samples.resize(o.limit);
    require(!samples.empty(), "train: not enough samples per set for --graphs");
    train_nmgm(ckpt.state, samples, ckpt.config, opt, o.delta, on_epoch);
  } else {
    SynthProblems problems = build_dataset_problems(data, ckpt.config.hyper, o.common.workers);
    if (o.limit > 0 && problems.train.size() > o.limit) problems.train.resize(o.limit);
    const std::vector<TrainSample> samples = to_train_samples(problems.train, o.common.workers);
    train(ckpt.state, samples, ckpt.config, opt, on_epoch);
  }
  save_checkpoint(o.common.out, ckpt);
  std::cout << "saved " << variant_name(variant) << " checkpoint after " << ckpt.state.epochs_done << " epochs to "
            << o.common.out << '\n';
  return 0;
}

// eval -----------------------------------------------------------------------

struct EvalOptions {
  CommonOptions common;
  std::string data;
  std::vector<std::string> solvers;
  std::vector<std::string> checkpoints;
  std::vector<double> sigma_n;
  std::vector<std::size_t> outliers;
  std::string split = "test";
};

int run_eval(EvalOptions& o) {
  require(!o.data.empty(), "eval: --data is required");
  require(!o.solvers.empty() || !o.checkpoints.empty(), "eval: give --solvers and/or --checkpoint");
  require(o.split == "test" || o.split == "train", "eval: --split must be test or train");
  std::vector<ClassicSolver> classic;
  for (const auto& s : o.solvers) {
    try {
      classic.push_back(parse_classic_solver(s));
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string(e.what()) + " (networks are evaluated with --checkpoint)");
    }
  }
  std::vector<Checkpoint> nets;
  for (const auto& path : o.checkpoints) nets.push_back(load_checkpoint(path));
  bool hyper = false;
  for (const auto& c : nets) hyper = hyper || needs_hyper(c);

  const SynthDataset base = read_dataset(o.data);
  std::vector<double> noise_levels = o.sigma_n.empty() ? std::vector<double>{base.config.sigma_n} : o.sigma_n;
  std::vector<std::size_t> outlier_levels =
      o.outliers.empty() ? std::vector<std::size_t>{base.config.outliers} : o.outliers;

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!o.common.out.empty()) {
    file = open_csv(o.common.out);
    out = &file;
  }
  *out << "# qapnet eval v1\nsigma_n,outliers,solver,checkpoint,samples,accuracy,unconverged\n";
  for (double sn : noise_levels)
    for (std::size_t ol : outlier_levels) {
      SynthDataset data = base;
      if (sn != base.config.sigma_n || ol != base.config.outliers) {
        SynthConfig c = base.config;
        c.sigma_n = sn;
        c.outliers = ol;
        data = gen_synthetic(c);
      }
      const SynthProblems problems = build_dataset_problems(data, hyper, o.common.workers);
      const auto& split = o.split == "test" ? problems.test : problems.train;
      for (std::size_t s = 0; s < classic.size(); ++s) {
        const ClassicEvaluation e = evaluate_classic(classic[s], split, o.common.workers);
        *out << num(sn) << ',' << ol << ',' << o.solvers[s] << ",," << split.size() << ',' << num(e.accuracy) << ','
             << e.unconverged << '\n';
      }
      if (!nets.empty()) {
        const std::vector<TrainSample> samples = to_train_samples(split, o.common.workers);
        for (std::size_t n = 0; n < nets.size(); ++n) {
          const double acc = evaluate_network(nets[n].state.params, nets[n].config, samples, o.common.workers);
          *out << num(sn) << ',' << ol << ',' << variant_name(nets[n].variant) << ',' << o.checkpoints[n] << ','
               << samples.size() << ',' << num(acc) << ",0\n";
        }
      }
    }
  return 0;
}

// qaplib ---------------------------------------------------------------------

struct QaplibOptions {
  CommonOptions common;
  std::string instances;
  std::vector<std::string> categories;
  std::string mode = "solve";
  std::vector<std::string> solvers{"sm", "rrwm"};
  std::string checkpoint;
  std::string confusion;
  std::string save_dir;
  std::size_t max_n = 40;
  std::size_t epochs = 10;
  double lr = 1e-3;
  double time_limit = 1800.0;
};

struct QaplibRow {
  std::string instance, category, solver;
  std::size_t n = 0;
  double objective = 0.0;
  std::optional<double> bound;
};

int run_qaplib(QaplibOptions& o) {
  require(!o.instances.empty(), "qaplib: --instances is required");
  require(o.mode == "solve" || o.mode == "train", "qaplib: --mode must be solve or train");
  std::vector<QaplibEntry> entries = load_qaplib_dir(o.instances, o.max_n);
  if (!o.categories.empty()) {
    const std::set<std::string> keep(o.categories.begin(), o.categories.end());
    std::erase_if(entries, [&](const QaplibEntry& e) { return !keep.count(qaplib_category(e.instance.name)); });
  }
  require(!entries.empty(), "qaplib: no instances selected");

  bool want_net = false;
  std::vector<ClassicSolver> classic;
  std::vector<std::string> classic_names;
  for (const auto& s : o.solvers) {
    if (s == "ngm") {
      want_net = true;
      continue;
    }
    try {
      classic.push_back(parse_classic_solver(s));
      classic_names.push_back(s);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  require(!want_net || o.mode == "train" || !o.checkpoint.empty(),
          "qaplib: solver ngm needs --mode train or --checkpoint");
  require(o.confusion.empty() || o.mode == "train", "qaplib: --confusion needs --mode train");

  std::vector<QaplibRow> rows;
  std::vector<std::optional<TrainSample>> samples(entries.size());
  auto sample_of = [&](std::size_t i) -> const TrainSample& {
    if (!samples[i]) samples[i] = qaplib_train_sample(entries[i].instance);
    return *samples[i];
  };

  for (std::size_t s = 0; s < classic.size(); ++s) {
    std::vector<double> obj(entries.size());
    parallel_for(entries.size(), o.common.workers,
                 [&](std::size_t i) { obj[i] = solve_qaplib_classic(classic[s], entries[i].instance); });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& inst = entries[i].instance;
      rows.push_back({inst.name, qaplib_category(inst.name), classic_names[s], inst.n, obj[i], inst.known_feasible_bound});
    }
  }

  // Trained models keyed by category (train mode) or a single loaded model.
  std::map<std::string, Checkpoint> models;
  if (want_net && o.mode == "solve") models["*"] = load_checkpoint(o.checkpoint);
  if (want_net && o.mode == "train") {
    std::map<std::string, std::vector<std::size_t>> by_cat;
    for (std::size_t i = 0; i < entries.size(); ++i) by_cat[qaplib_category(entries[i].instance.name)].push_back(i);
    for (const auto& [cat, idx] : by_cat) {
      Checkpoint ckpt;
      ckpt.variant = Variant::kNgm;
      ckpt.config = NetConfig::for_variant(Variant::kNgm);
      ckpt.state = TrainState{init_params(ckpt.config, o.common.seed), {}, 0};
      std::vector<TrainSample> train_set;
      for (std::size_t i : idx) train_set.push_back(sample_of(i));
      OptimConfig opt;
      opt.learning_rate = o.lr;
      opt.epochs = 1;
      opt.seed = o.common.seed;
      opt.loss = LossKind::kQapObjective;
      opt.sense = Sense::kMinimize;
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t e = 0; e < o.epochs; ++e) {
        const auto log = train(ckpt.state, train_set, ckpt.config, opt);
        std::cerr << cat << " epoch " << log.back().epoch << " loss " << log.back().mean_loss << '\n';
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > o.time_limit) break;
      }
      if (!o.save_dir.empty()) {
        std::filesystem::create_directories(o.save_dir);
        save_checkpoint((std::filesystem::path(o.save_dir) / (cat + ".ckpt")).string(), ckpt);
      }
      models[cat] = std::move(ckpt);
    }
  }
  if (want_net) {
    std::vector<double> obj(entries.size());
    parallel_for(entries.size(), o.common.workers, [&](std::size_t i) {
      const Checkpoint& m = models.count("*") ? models.at("*") : models.at(qaplib_category(entries[i].instance.name));
      obj[i] = solve_qaplib_network(m.state.params, m.config, sample_of(i), entries[i].instance);
    });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& inst = entries[i].instance;
      rows.push_back({inst.name, qaplib_category(inst.name), "ngm", inst.n, obj[i], inst.known_feasible_bound});
    }
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!o.common.out.empty()) {
    file = open_csv(o.common.out);
    out = &file;
  }
  *out << "# qapnet qaplib v1\ninstance,category,n,solver,objective,bound,rel_score\n";
  for (const auto& r : rows) {
    *out << r.instance << ',' << r.category << ',' << r.n << ',' << r.solver << ',' << num(r.objective) << ',';
    if (r.bound) {
      *out << num(*r.bound) << ',';
      if (r.objective > 0) *out << num(rel_obj_score(r.objective, *r.bound));
    } else {
      *out << ',';
    }
    *out << '\n';
  }

  if (!o.confusion.empty()) {
    // Rows: tested category; columns: training category; cells: mean rel score.
    std::vector<std::string> cats;
    for (const auto& [cat, m] : models) cats.push_back(cat);
    std::ofstream grid = open_csv(o.confusion);
    grid << "# qapnet qaplib-confusion v1\ntest\\train";
    for (const auto& c : cats) grid << ',' << c;
    grid << '\n';
    for (const auto& row : cats) {
      grid << row;
      for (const auto& col : cats) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < entries.size(); ++i) {
          const auto& inst = entries[i].instance;
          if (qaplib_category(inst.name) != row || !inst.known_feasible_bound) continue;
          const Checkpoint& m = models.at(col);
          const double obj = solve_qaplib_network(m.state.params, m.config, sample_of(i), inst);
          if (obj > 0) {
            sum += rel_obj_score(obj, *inst.known_feasible_bound);
            ++count;
          }
        }
        grid << ',' << (count ? num(sum / static_cast<double>(count)) : std::string());
      }
      grid << '\n';
    }
  }
  return 0;
}

// sync -----------------------------------------------------------------------

struct SyncCliOptions {
  CommonOptions common;
  std::string data;
  std::vector<std::size_t> graphs{4};
  std::string checkpoint;
  std::string mode = "nmgm";
  double delta = 1e-4;
};

int run_sync(SyncCliOptions& o) {
  require(!o.data.empty(), "sync: --data is required");
  require(o.mode == "nmgm" || o.mode == "nmgm-t", "sync: --mode must be nmgm or nmgm-t");
  require(!o.checkpoint.empty(), "sync: --mode " + o.mode + " needs a trained --checkpoint");
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  if (o.mode == "nmgm") {
    require(ckpt.variant == Variant::kNmgm, "sync: --mode nmgm needs a checkpoint trained with --variant nmgm");
  } else {
    require(ckpt.variant != Variant::kNmgm && !ckpt.config.hyper,
            "sync: --mode nmgm-t needs a pretrained pairwise ngm, ngm-v or ngm+ checkpoint");
  }
  const SynthDataset data = read_dataset(o.data);
  SyncOptions sync;
  sync.delta = o.delta;
  sync.alpha_hat = ckpt.config.alpha_hat;

  std::vector<MultiEvaluation> results;
  std::vector<std::size_t> counts;
  for (std::size_t m : o.graphs) {
    const auto samples = group_multigraph(data, m, true, o.common.workers);
    require(!samples.empty(), "sync: not enough test samples per set for " + std::to_string(m) + " graphs");
    results.push_back(evaluate_multigraph(ckpt.state.params, ckpt.config, samples, sync, o.common.workers));
    counts.push_back(samples.size());
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!o.common.out.empty()) {
    file = open_csv(o.common.out);
    out = &file;
  }
  *out << "# qapnet sync v1\nmode,metric";
  for (std::size_t m : o.graphs) *out << ",m" << m;
  *out << '\n' << o.mode << ",instances";
  for (std::size_t c : counts) *out << ',' << c;
  *out << '\n' << o.mode << ",pairwise_accuracy";
  for (const auto& r : results) *out << ',' << num(r.pairwise);
  *out << '\n' << o.mode << ",sync_accuracy";
  for (const auto& r : results) *out << ',' << num(r.synchronized);
  *out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadratic assignment solvers on association graphs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SynthOptions synth;
  auto* cs = app.add_subcommand("synth", "generate a synthetic point-registration dataset");
  add_common(cs, synth.common, "output directory");
  cs->add_option("--num-sets", synth.cfg.num_sets);
  cs->add_option("--train-per-set", synth.cfg.train_per_set);
  cs->add_option("--test-per-set", synth.cfg.test_per_set);
  cs->add_option("--inliers", synth.cfg.inliers);
  cs->add_option("--outliers", synth.cfg.outliers);
  cs->add_option("--sigma-n", synth.cfg.sigma_n, "position noise standard deviation");
  cs->add_option("--scale-low", synth.cfg.scale_low);
  cs->add_option("--scale-high", synth.cfg.scale_high);
  cs->add_option("--sigma2", synth.cfg.sigma2, "edge kernel width");
  cs->add_option("--sigma3", synth.cfg.sigma3, "hyperedge kernel width");

  TrainOptions tr;
  auto* ct = app.add_subcommand("train", "train a network on a generated dataset");
  add_common(ct, tr.common, "checkpoint path");
  ct->add_option("--data", tr.data, "dataset directory");
  ct->add_option("--variant", tr.variant, "ngm | ngm-v | ngm+ | nhgm | nmgm");
  ct->add_option("--log", tr.log, "loss log CSV (default <out>.log.csv)");
  ct->add_option("--resume", tr.resume, "continue from this checkpoint");
  ct->add_option("--init", tr.init, "start from the parameters of this checkpoint (e.g. ngm for nmgm)");
  ct->add_option("--epochs", tr.epochs);
  ct->add_option("--lr", tr.lr, "learning rate");
  ct->add_option("--channels", tr.channels);
  ct->add_option("--layers", tr.layers);
  ct->add_option("--alpha", tr.alpha);
  ct->add_option("--lambda3", tr.lambda3);
  ct->add_option("--graphs", tr.graphs, "graphs per instance (nmgm)");
  ct->add_option("--delta", tr.delta, "eigengap threshold (nmgm)");
  ct->add_option("--limit", tr.limit, "use only the first N training samples");

  EvalOptions ev;
  auto* ce = app.add_subcommand("eval", "evaluate solvers on a dataset");
  add_common(ce, ev.common, "CSV path (default stdout)");
  ce->add_option("--data", ev.data, "dataset directory");
  ce->add_option("--solvers", ev.solvers, "classic solvers: sm, rrwm")->delimiter(',');
  ce->add_option("--checkpoint", ev.checkpoints, "trained network (repeatable)")->delimiter(',');
  ce->add_option("--sigma-n", ev.sigma_n, "noise levels to sweep (regenerates samples)")->delimiter(',');
  ce->add_option("--outliers", ev.outliers, "outlier counts to sweep (regenerates samples)")->delimiter(',');
  ce->add_option("--split", ev.split, "test | train");

  QaplibOptions qa;
  auto* cq = app.add_subcommand("qaplib", "solve or learn QAPLIB instances");
  add_common(cq, qa.common, "CSV path (default stdout)");
  cq->add_option("--instances", qa.instances, "directory with .dat and .sln files");
  cq->add_option("--category", qa.categories, "category filter, e.g. chr,nug")->delimiter(',');
  cq->add_option("--mode", qa.mode, "solve | train");
  cq->add_option("--solvers", qa.solvers, "sm, rrwm, ngm")->delimiter(',');
  cq->add_option("--checkpoint", qa.checkpoint, "pretrained network for --mode solve");
  cq->add_option("--confusion", qa.confusion, "cross-category CSV (train mode)");
  cq->add_option("--save-dir", qa.save_dir, "directory for per-category checkpoints");
  cq->add_option("--max-n", qa.max_n, "largest instance size");
  cq->add_option("--epochs", qa.epochs);
  cq->add_option("--lr", qa.lr, "learning rate");
  cq->add_option("--time-limit", qa.time_limit, "training seconds per category");

  SyncCliOptions sy;
  auto* cy = app.add_subcommand("sync", "multi-graph matching accuracy versus graph count");
  add_common(cy, sy.common, "CSV path (default stdout)");
  cy->add_option("--data", sy.data, "dataset directory");
  cy->add_option("--graphs", sy.graphs, "graph counts, e.g. 2,3,4")->delimiter(',');
  cy->add_option("--checkpoint", sy.checkpoint, "trained network");
  cy->add_option("--mode", sy.mode, "nmgm | nmgm-t");
  cy->add_option("--delta", sy.delta, "eigengap threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  struct Command {
    CLI::App* app;
    CommonOptions* common;
    std::function<int()> run;
  };
  const std::vector<Command> commands{{cs, &synth.common, [&] { return run_synth(synth); }},
                                      {ct, &tr.common, [&] { return run_train(tr); }},
                                      {ce, &ev.common, [&] { return run_eval(ev); }},
                                      {cq, &qa.common, [&] { return run_qaplib(qa); }},
                                      {cy, &sy.common, [&] { return run_sync(sy); }}};
  try {
    for (const auto& c : commands) {
      if (!c.app->parsed()) continue;
      if (!c.common->config.empty()) apply_config(app, *c.app, c.common->config);
      return c.run();
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
