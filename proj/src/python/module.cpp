#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

#include "qapnet/bench.hpp"
#include "qapnet/checkpoint.hpp"
#include "qapnet/error.hpp"
#include "qapnet/version.hpp"

namespace py = pybind11;
using namespace qapnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

PointSet to_points(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw InvalidArgument("expected an (n, 2) point array");
  PointSet p(static_cast<std::size_t>(a.shape(0)));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = {a.at(i, 0), a.at(i, 1)};
  return p;
}

Assignment to_assignment(const std::vector<std::ptrdiff_t>& cols, std::size_t n_cols) {
  return Assignment(cols.size(), n_cols, cols);
}

std::vector<std::ptrdiff_t> from_assignment(const Assignment& x) {
  return {x.col_of_row().begin(), x.col_of_row().end()};
}

Sense parse_sense(const std::string& s) {
  if (s == "maximize") return Sense::kMaximize;
  if (s == "minimize") return Sense::kMinimize;
  throw InvalidArgument("sense must be 'maximize' or 'minimize'");
}

/// A network with its configuration, loaded from a checkpoint or freshly
/// initialized.
class Model {
 public:
  Model(Variant v, NetConfig cfg, NetParams params) : variant_(v), cfg_(cfg), params_(std::move(params)) {}

  static Model init(const std::string& variant, std::uint64_t seed) {
    const Variant v = parse_variant(variant);
    const NetConfig cfg = NetConfig::for_variant(v);
    return Model(v, cfg, init_params(cfg, seed));
  }
  static Model load(const std::string& path) {
    Checkpoint c = load_checkpoint(path);
    return Model(c.variant, c.config, std::move(c.state.params));
  }
  void save(const std::string& path) const { save_checkpoint(path, {variant_, cfg_, {params_, {}, 0}}); }

  Array predict(const Array& k, std::size_t n1, std::size_t n2) const {
    if (cfg_.hyper) throw InvalidArgument("predict: use predict_points for the hypergraph variant");
    const QapInstance inst = make_lawler(SparseMatrix::from_dense(to_matrix(k)), n1, n2);
    return to_array(qapnet::predict(params_, cfg_, make_matching_input(build_association(inst))));
  }

  Array predict_points(const Array& p1, const Array& p2, double sigma2, double sigma3) const {
    const Graph g1 = delaunay(to_points(p1)), g2 = fully_connected(to_points(p2));
    const QapInstance inst = make_lawler(build_affinity_matrix(g1, g2, sigma2), g1.size(), g2.size());
    std::optional<SparseTensor3> h;
    if (cfg_.hyper) h = build_affinity_tensor(g1, g2, sigma3);
    return to_array(qapnet::predict(params_, cfg_, make_matching_input(build_association(inst), h ? &*h : nullptr)));
  }

  std::vector<double> train_synthetic(const SynthConfig& c, std::size_t epochs, double lr, std::size_t workers) {
    const SynthDataset d = gen_synthetic(c);
    std::vector<SynthSample> samples;
    for (const auto& s : d.sets) samples.insert(samples.end(), s.train.begin(), s.train.end());
    const auto train_set = to_train_samples(build_problems(samples, c.sigma2, c.sigma3, cfg_.hyper, workers), workers);
    TrainState st{params_, AdamState::zeros_like(params_), 0};
    OptimConfig opt;
    opt.epochs = epochs;
    opt.learning_rate = lr;
    opt.seed = c.seed;
    std::vector<double> losses;
    for (const auto& r : train(st, train_set, cfg_, opt)) losses.push_back(r.mean_loss);
    params_ = std::move(st.params);
    return losses;
  }

  double evaluate_synthetic(const SynthConfig& c, std::size_t workers) const {
    const SynthDataset d = gen_synthetic(c);
    std::vector<SynthSample> samples;
    for (const auto& s : d.sets) samples.insert(samples.end(), s.test.begin(), s.test.end());
    const auto test_set = to_train_samples(build_problems(samples, c.sigma2, c.sigma3, cfg_.hyper, workers), workers);
    return evaluate_network(params_, cfg_, test_set, workers);
  }

  std::string variant() const { return std::string(variant_name(variant_)); }
  std::size_t parameter_count() const { return qapnet::parameter_count(params_); }

 private:
  Variant variant_;
  NetConfig cfg_;
  NetParams params_;
};

SynthConfig synth_config(const py::kwargs& kw) {
  SynthConfig c;
  for (const auto& [key, value] : kw) {
    const std::string k = py::str(key);
    if (k == "num_sets") c.num_sets = value.cast<std::size_t>();
    else if (k == "train_per_set") c.train_per_set = value.cast<std::size_t>();
    else if (k == "test_per_set") c.test_per_set = value.cast<std::size_t>();
    else if (k == "inliers") c.inliers = value.cast<std::size_t>();
    else if (k == "outliers") c.outliers = value.cast<std::size_t>();
    else if (k == "sigma_n") c.sigma_n = value.cast<double>();
    else if (k == "scale_low") c.scale_low = value.cast<double>();
    else if (k == "scale_high") c.scale_high = value.cast<double>();
    else if (k == "sigma2") c.sigma2 = value.cast<double>();
    else if (k == "sigma3") c.sigma3 = value.cast<double>();
    else if (k == "seed") c.seed = value.cast<std::uint64_t>();
    else throw InvalidArgument("unknown synthetic option '" + k + "'");
  }
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lawler QAP solvers: learned association-graph matchers, spectral and random-walk baselines.";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<SizeLimitError>(m, "SizeLimitError", PyExc_MemoryError);

  m.def(
      "sinkhorn",
      [](const Array& s, double epsilon, std::size_t max_iter, double tol) {
        return to_array(sinkhorn(to_matrix(s), {epsilon, max_iter, tol}).valid());
      },
      py::arg("s"), py::arg("epsilon") = 1e-3, py::arg("max_iter") = 100, py::arg("tol") = 1e-6,
      "Doubly-stochastic normalization of a nonnegative score matrix.");
  m.def(
      "hungarian", [](const Array& score) { return from_assignment(hungarian(to_matrix(score))); }, py::arg("score"),
      "Maximum-score assignment as one column index per row (-1 when unassigned).");
  m.def(
      "kb_to_lawler",
      [](const Array& f1, const Array& f2, std::optional<Array> kp) {
        std::optional<Matrix> k;
        if (kp) k = to_matrix(*kp);
        return to_array(kb_to_lawler(to_matrix(f1), to_matrix(f2), k ? &*k : nullptr).lawler().k.to_dense());
      },
      py::arg("f1"), py::arg("f2"), py::arg("kp") = py::none(), "Dense Lawler affinity of a Koopmans-Beckmann QAP.");
  m.def(
      "lawler_objective",
      [](const Array& k, const std::vector<std::ptrdiff_t>& perm, std::size_t n2) {
        return lawler_objective(SparseMatrix::from_dense(to_matrix(k)), to_assignment(perm, n2));
      },
      py::arg("k"), py::arg("assignment"), py::arg("n2"), "vec(X)^T K vec(X) with column-stacked vec.");
  m.def(
      "kb_objective",
      [](const Array& f1, const Array& f2, const std::vector<std::ptrdiff_t>& perm) {
        return kb_objective(to_matrix(f1), to_matrix(f2), nullptr, to_assignment(perm, perm.size()));
      },
      py::arg("f1"), py::arg("f2"), py::arg("assignment"));
  m.def(
      "spectral_match",
      [](const Array& k, std::size_t n1, std::size_t n2) {
        return to_array(spectral_match(SparseMatrix::from_dense(to_matrix(k)), n1, n2).soft);
      },
      py::arg("k"), py::arg("n1"), py::arg("n2"));
  m.def(
      "rrwm",
      [](const Array& k, std::size_t n1, std::size_t n2) {
        return to_array(rrwm(SparseMatrix::from_dense(to_matrix(k)), n1, n2).soft);
      },
      py::arg("k"), py::arg("n1"), py::arg("n2"));
  m.def(
      "delaunay",
      [](const Array& points) {
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& e : delaunay(to_points(points)).edges) edges.push_back(e);
        return edges;
      },
      py::arg("points"), "Delaunay edges (i, j) with i < j.");
  m.def(
      "affinity_matrix",
      [](const Array& p1, const Array& p2, double sigma2) {
        return to_array(build_affinity_matrix(delaunay(to_points(p1)), fully_connected(to_points(p2)), sigma2).to_dense());
      },
      py::arg("p1"), py::arg("p2"), py::arg("sigma2") = 5e-7,
      "Edge-length affinity between a Delaunay graph on p1 and a complete graph on p2.");
  m.def(
      "synchronize",
      [](const std::map<std::pair<std::size_t, std::size_t>, Array>& pairwise, std::size_t m, std::size_t n,
         double delta) {
        PairwiseMatchings pw;
        for (const auto& [key, a] : pairwise) pw[key] = to_matrix(a);
        const SyncResult r = synchronize(build_joint(pw, m, n), SyncOptions{delta});
        std::map<std::pair<std::size_t, std::size_t>, Array> out;
        for (const auto& [key, a] : pw) out[key] = to_array(r.output.block(key.first, key.second));
        return py::make_tuple(out, r.spectrum.degenerate);
      },
      py::arg("pairwise"), py::arg("m"), py::arg("n"), py::arg("delta") = 1e-4,
      "Cycle-consistent pairwise matchings and whether the spectrum was degenerate.");

  m.def(
      "parse_qaplib",
      [](const std::string& text) {
        const QaplibInstance q = parse_qaplib(text);
        return py::make_tuple(to_array(q.a), to_array(q.b));
      },
      py::arg("text"), "Flow and distance matrices of a QAPLIB .dat file.");
  m.def(
      "qaplib_objective",
      [](const Array& a, const Array& b, const std::vector<std::ptrdiff_t>& perm) {
        const QaplibInstance q{"", perm.size(), to_matrix(a), to_matrix(b), std::nullopt};
        return qaplib_objective(q, to_assignment(perm, perm.size()));
      },
      py::arg("a"), py::arg("b"), py::arg("permutation"));

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init([](const py::kwargs& kw) { return synth_config(kw); }))
      .def_readonly("inliers", &SynthConfig::inliers)
      .def_readonly("outliers", &SynthConfig::outliers)
      .def_readonly("seed", &SynthConfig::seed)
      .def("__repr__", &SynthConfig::to_text);

  m.def(
      "synthetic_pair",
      [](const SynthConfig& c, std::size_t index) {
        const SynthDataset d = gen_synthetic(c);
        std::vector<const SynthSample*> all;
        for (const auto& s : d.sets)
          for (const auto& t : s.train) all.push_back(&t);
        if (index >= all.size()) throw InvalidArgument("synthetic_pair: index out of range");
        const SynthSample& s = *all[index];
        Array p1({s.reference.size(), std::size_t{2}}), p2({s.target.size(), std::size_t{2}});
        for (std::size_t i = 0; i < s.reference.size(); ++i) {
          p1.mutable_at(i, 0) = s.reference[i].x;
          p1.mutable_at(i, 1) = s.reference[i].y;
        }
        for (std::size_t i = 0; i < s.target.size(); ++i) {
          p2.mutable_at(i, 0) = s.target[i].x;
          p2.mutable_at(i, 1) = s.target[i].y;
        }
        return py::make_tuple(p1, p2, from_assignment(s.truth));
      },
      py::arg("config"), py::arg("index") = 0, "Reference points, target points and ground truth of a training pair.");

  py::class_<Model>(m, "Model")
      .def_static("init", &Model::init, py::arg("variant") = "ngm", py::arg("seed") = 0)
      .def_static("load", &Model::load, py::arg("path"))
      .def("save", &Model::save, py::arg("path"))
      .def("predict", &Model::predict, py::arg("k"), py::arg("n1"), py::arg("n2"),
           "Soft matching for a dense Lawler affinity (maximized).")
      .def("predict_points", &Model::predict_points, py::arg("p1"), py::arg("p2"), py::arg("sigma2") = 5e-7,
           py::arg("sigma3") = 0.1)
      .def("train_synthetic", &Model::train_synthetic, py::arg("config"), py::arg("epochs") = 10,
           py::arg("lr") = 1e-3, py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>(),
           "Trains on the training split; returns the mean loss of every epoch.")
      .def("evaluate_synthetic", &Model::evaluate_synthetic, py::arg("config"), py::arg("workers") = 1,
           py::call_guard<py::gil_scoped_release>(), "Mean accuracy on the test split.")
      .def_property_readonly("variant", &Model::variant)
      .def_property_readonly("parameter_count", &Model::parameter_count);
}
