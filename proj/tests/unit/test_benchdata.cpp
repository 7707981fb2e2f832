#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <unistd.h>

#include "qapnet/error.hpp"
#include "qapnet/qaplib.hpp"
#include "qapnet/synthetic.hpp"

using namespace qapnet;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.num_sets = 2;
  c.train_per_set = 3;
  c.test_per_set = 2;
  c.seed = 5;
  return c;
}

std::filesystem::path temp_dir(const std::string& tag) {
  const auto p = std::filesystem::temp_directory_path() / ("qapnet_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

bool same_points(const PointSet& a, const PointSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].x != b[i].x || a[i].y != b[i].y) return false;
  return true;
}

bool same_sample(const SynthSample& a, const SynthSample& b) {
  return same_points(a.reference, b.reference) && same_points(a.target, b.target) && a.truth == b.truth;
}

// Brute-force maximum of x^T K x over all permutations.
double brute_max(const SparseMatrix& k, std::size_t n) {
  std::vector<std::ptrdiff_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = -1e300;
  do best = std::max(best, lawler_objective(k, Assignment(n, n, p)));
  while (std::next_permutation(p.begin(), p.end()));
  return best;
}

}  // namespace

TEST_CASE("synthetic sizes and determinism") {
  const SynthConfig c = small_config();
  const SynthDataset a = gen_synthetic(c), b = gen_synthetic(c);
  CHECK(a.train_size() == 6);
  CHECK(a.test_size() == 4);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(same_sample(a.sets[k].train[i], b.sets[k].train[i]));
    for (std::size_t i = 0; i < 2; ++i) CHECK(same_sample(a.sets[k].test[i], b.sets[k].test[i]));
  }
  SynthConfig other = c;
  other.seed = 6;
  CHECK_FALSE(same_points(gen_synthetic(other).sets[0].base, a.sets[0].base));
  CHECK(c.hash() == small_config().hash());
  CHECK(c.hash() != other.hash());
}

TEST_CASE("synthetic default sizes") {
  SynthConfig c;
  c.inliers = 3;
  const SynthDataset d = gen_synthetic(c);
  CHECK(d.train_size() == 2000);
  CHECK(d.test_size() == 1000);
}

TEST_CASE("synthetic config validation") {
  SynthConfig c;
  c.train_per_set = 0;
  CHECK_THROWS_AS(gen_synthetic(c), InvalidArgument);
  c = SynthConfig{};
  c.sigma_n = -0.1;
  CHECK_THROWS_AS(gen_synthetic(c), InvalidArgument);
  c = SynthConfig{};
  c.scale_low = 1.2;
  c.scale_high = 0.8;
  CHECK_THROWS_AS(gen_synthetic(c), InvalidArgument);
}

TEST_CASE("outliers enlarge the target graph") {
  SynthConfig c = small_config();
  c.outliers = 2;
  const SynthDataset d = gen_synthetic(c);
  const SynthSample& s = d.sets[0].train[0];
  CHECK(s.reference.size() == 10);
  CHECK(s.target.size() == 12);
  const MatchingProblem p = build_problem(s, c.sigma2, c.sigma3, false);
  CHECK(p.truth.to_matrix().rows() == 10);
  CHECK(p.truth.to_matrix().cols() == 12);
  CHECK(p.instance.lawler().k.rows() == 120);
}

TEST_CASE("ground truth geometry of a noise-free sample") {
  SynthConfig c = small_config();
  c.scale_low = 0.8;
  c.scale_high = 1.2;
  c.sigma_n = 0.0;
  const SynthSample s = gen_synthetic(c).sets[1].train[2];
  double u = 0.0;
  for (std::size_t i = 0; i < s.reference.size(); ++i) {
    const Point& r = s.reference[i];
    const Point& t = s.target[s.truth[i]];
    u = t.x / r.x;
    CHECK(t.y == doctest::Approx(u * r.y).epsilon(1e-12));
  }
  CHECK(u >= 0.8);
  CHECK(u <= 1.2);
}

TEST_CASE("noise-free ground truth attains the maximum objective") {
  SynthConfig c = small_config();
  c.inliers = 7;
  const SynthDataset d = gen_synthetic(c);
  for (const auto& s : {d.sets[0].train[0], d.sets[1].test[1]}) {
    const MatchingProblem p = build_problem(s, c.sigma2, c.sigma3, true);
    const SparseMatrix& k = p.instance.lawler().k;
    const double truth = lawler_objective(k, s.truth);
    // Each directed reference edge contributes exactly exp(0) = 1.
    CHECK(truth == doctest::Approx(2.0 * p.reference.edges.size()).epsilon(1e-12));
    CHECK(truth >= brute_max(k, 7) - 1e-9);
    REQUIRE(p.hyper.has_value());
    CHECK(p.hyper->nnz() > 0);
  }
}

TEST_CASE("multi-graph ground truth is relative") {
  SynthConfig c = small_config();
  c.sigma_n = 0.0;
  const SynthDataset d = gen_synthetic(c);
  std::vector<const SynthSample*> graphs;
  for (std::size_t i = 0; i < 3; ++i) graphs.push_back(&d.sets[0].train[i]);
  const MultiGraphSample m = make_multigraph(graphs, 0.05);
  CHECK(m.pairs.size() == 3);
  for (std::size_t p = 0; p < 3; ++p) {
    const auto [i, j] = m.pairs[p];
    for (std::size_t a = 0; a < 10; ++a) {
      const Point& pa = graphs[i]->target[a];
      const Point& pb = graphs[j]->target[m.targets[p][a]];
      CHECK(pa.x == doctest::Approx(pb.x));
      CHECK(pa.y == doctest::Approx(pb.y));
    }
  }
  c.outliers = 1;
  const SynthDataset o = gen_synthetic(c);
  CHECK_THROWS_AS(make_multigraph({&o.sets[0].train[0], &o.sets[0].train[1]}, 0.05), InvalidArgument);
}

TEST_CASE("dataset files round-trip") {
  SynthConfig c = small_config();
  c.outliers = 1;
  c.sigma_n = 0.05;
  const SynthDataset d = gen_synthetic(c);
  const auto dir = temp_dir("dataset");
  write_dataset(dir, d, "test");
  CHECK(std::filesystem::exists(dir / "set1" / "test" / "0001"));
  const SynthDataset back = read_dataset(dir);
  CHECK(back.config.hash() == c.hash());
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(same_points(back.sets[k].base, d.sets[k].base));
    for (std::size_t i = 0; i < 3; ++i) CHECK(same_sample(back.sets[k].train[i], d.sets[k].train[i]));
  }
  {
    std::ofstream(dir / "manifest.txt", std::ios::app) << "seed=9\n";
  }
  CHECK_THROWS_AS(read_dataset(dir), ParseError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(parse_sample("qapnet-sample 1\nreference 2\n0 0\n"), ParseError);
  CHECK_THROWS_AS(parse_sample("qapnet-sample 2\n"), ParseError);
}

TEST_CASE("accuracy") {
  const Assignment gt(4, 4, {0, 1, 2, 3});
  CHECK(accuracy(gt, gt) == 1.0);
  CHECK(accuracy(Assignment(4, 4, {1, 0, 3, 2}), gt) == 0.0);
  CHECK(accuracy(Assignment(4, 4, {0, 1, 3, 2}), gt) == 0.5);
}

TEST_CASE("qaplib minimal instance") {
  const QaplibInstance q = parse_qaplib("2 0 1 1 0 0 2 2 0");
  CHECK(q.n == 2);
  CHECK(q.a == Matrix::from_rows({{0, 1}, {1, 0}}));
  CHECK(q.b == Matrix::from_rows({{0, 2}, {2, 0}}));
  const QaplibInstance back = parse_qaplib(format_qaplib(q));
  CHECK(back.a == q.a);
  CHECK(back.b == q.b);
}

TEST_CASE("qaplib parse errors") {
  CHECK_THROWS_AS(parse_qaplib("2 0 1 1 0 0 2 2"), ParseError);
  CHECK_THROWS_AS(parse_qaplib("2 0 1 1 0 0 2 2 x"), ParseError);
  CHECK_THROWS_AS(parse_qaplib("2 0 1 1 0 0 2 2 0.5"), ParseError);
  CHECK_THROWS_AS(parse_qaplib("1 0 0"), ParseError);
  CHECK_THROWS_AS(parse_qaplib_solution("3 10 1 2 2"), ParseError);
  CHECK_THROWS_AS(parse_qaplib_solution("3 10 1 2 4"), ParseError);
  CHECK_THROWS_AS(parse_qaplib_solution("3 10 1 2"), ParseError);
}

TEST_CASE("qaplib solution round-trip") {
  const QaplibSolution s = parse_qaplib_solution("4   36\n 3, 1,4 ,2\n");
  CHECK(s.n == 4);
  CHECK(s.objective == 36.0);
  CHECK(s.permutation == Assignment(4, 4, {2, 0, 3, 1}));
  const QaplibSolution back = parse_qaplib_solution(format_qaplib_solution(s));
  CHECK(back.permutation == s.permutation);
  CHECK(back.objective == s.objective);
}

TEST_CASE("qaplib objective convention") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(0, 9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5;
    QaplibInstance q{"t", n, Matrix(n, n), Matrix(n, n), std::nullopt};
    for (double& v : q.a.data()) v = d(rng);
    for (double& v : q.b.data()) v = d(rng);
    std::vector<std::ptrdiff_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    const Assignment x(n, n, p);
    double direct = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) direct += q.a(i, j) * q.b(p[i], p[j]);
    CHECK(qaplib_objective(q, x) == direct);
    CHECK(kb_objective(q.a, q.b.transposed(), nullptr, x) == doctest::Approx(direct).epsilon(1e-12));
    const QapInstance l = qaplib_to_lawler(q);
    CHECK(l.sense == Sense::kMinimize);
    CHECK(lawler_objective(l.lawler().k, x) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("qaplib maximization affinity reverses the ranking") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> d(0, 9);
  const std::size_t n = 4;
  QaplibInstance q{"t", n, Matrix(n, n), Matrix(n, n), std::nullopt};
  for (double& v : q.a.data()) v = d(rng);
  for (double& v : q.b.data()) v = d(rng);
  const SparseMatrix k = qaplib_to_lawler(q).lawler().k;
  const SparseMatrix kp = qaplib_maximization_affinity(k);
  CHECK(kp.is_symmetric(0.0));
  std::vector<std::ptrdiff_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  // Permutations touch exactly n^2 entries of K, so obj' = n^2 max K - obj.
  do {
    const Assignment x(n, n, p);
    CHECK(lawler_objective(kp, x) == doctest::Approx(n * n * k.max_value() - qaplib_objective(q, x)));
  } while (std::next_permutation(p.begin(), p.end()));
}

TEST_CASE("relative objective score and categories") {
  CHECK(rel_obj_score(100, 90) == doctest::Approx(0.1));
  CHECK(rel_obj_score(90, 90) == 0.0);
  CHECK(rel_obj_score(80, 90) < 0.0);
  CHECK_THROWS_AS(rel_obj_score(0, 90), InvalidArgument);
  CHECK(qaplib_category("chr12a") == "chr");
  CHECK(qaplib_category("Nug20") == "nug");
}

TEST_CASE("qaplib directory scan") {
  const auto dir = temp_dir("qaplib");
  std::filesystem::create_directories(dir / "soln");
  std::ofstream(dir / "toy2.dat") << "2\n0 1\n1 0\n\n0 2\n2 0\n";
  std::ofstream(dir / "soln" / "toy2.sln") << "2 4\n2,1\n";
  QaplibInstance big{"big", 41, Matrix(41, 41), Matrix(41, 41), std::nullopt};
  std::ofstream(dir / "big41.dat") << format_qaplib(big);
  const auto entries = load_qaplib_dir(dir);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].instance.name == "toy2");
  REQUIRE(entries[0].solution.has_value());
  CHECK(*entries[0].instance.known_feasible_bound == entries[0].solution->objective);
  CHECK(load_qaplib_dir(dir, 41).size() == 2);
  std::filesystem::remove_all(dir);
}
