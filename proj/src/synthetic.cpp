#include "qapnet/synthetic.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "qapnet/error.hpp"

namespace qapnet {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, set, split, index) so samples do not depend on
// generation order.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t set, std::uint64_t split, std::uint64_t idx) {
  return std::mt19937_64(mix(mix(mix(mix(seed) ^ set) ^ split) ^ idx));
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError(std::string(what) + ": bad number '" + s + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError(std::string(what) + ": bad integer '" + s + "'");
  }
  return v;
}

SynthSample draw_sample(const SynthConfig& cfg, const PointSet& base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> scale(cfg.scale_low, cfg.scale_high);
  std::normal_distribution<double> noise(0.0, cfg.sigma_n);
  const std::size_t n1 = cfg.inliers, n2 = cfg.inliers + cfg.outliers;

  std::vector<std::ptrdiff_t> perm(n2);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  SynthSample s;
  s.reference = base;
  s.target.resize(n2);
  const double u = cfg.scale_low == cfg.scale_high ? cfg.scale_low : scale(rng);
  for (std::size_t i = 0; i < n1; ++i) {
    double dx = 0.0, dy = 0.0;
    if (cfg.sigma_n > 0.0) {
      dx = noise(rng);
      dy = noise(rng);
    }
    s.target[perm[i]] = {u * base[i].x + dx, u * base[i].y + dy};
  }
  for (std::size_t o = n1; o < n2; ++o) {
    const double x = unit(rng), y = unit(rng);
    s.target[perm[o]] = {x, y};
  }
  perm.resize(n1);
  s.truth = Assignment(n1, n2, std::move(perm));
  return s;
}

void write_points(std::ostream& out, const char* tag, const PointSet& p) {
  out << tag << ' ' << p.size() << '\n';
  for (const auto& q : p) out << fmt(q.x) << ' ' << fmt(q.y) << '\n';
}

PointSet read_points(std::istream& in, const char* tag) {
  std::string word, count;
  if (!(in >> word >> count) || word != tag) throw ParseError(std::string("sample: expected '") + tag + "'");
  PointSet p(parse_uint(count, "sample"));
  for (auto& q : p) {
    std::string x, y;
    if (!(in >> x >> y)) throw ParseError("sample: truncated point list");
    q = {parse_double(x, "sample"), parse_double(y, "sample")};
  }
  return p;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + p.string() + "'");
}

std::string sample_name(std::size_t idx) {
  std::string s = std::to_string(idx);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_sets == 0 || train_per_set == 0 || test_per_set == 0) throw InvalidArgument("SynthConfig: counts must be >= 1");
  if (inliers < 3) throw InvalidArgument("SynthConfig: at least 3 inliers are needed for a triangulation");
  if (!(sigma_n >= 0.0)) throw InvalidArgument("SynthConfig: sigma_n must be >= 0");
  if (!(scale_low > 0.0) || !(scale_low <= scale_high)) throw InvalidArgument("SynthConfig: need 0 < scale_low <= scale_high");
  if (!(sigma2 > 0.0) || !(sigma3 > 0.0)) throw InvalidArgument("SynthConfig: kernel widths must be positive");
}

std::string SynthConfig::to_text() const {
  std::ostringstream out;
  out << "num_sets=" << num_sets << '\n'
      << "train_per_set=" << train_per_set << '\n'
      << "test_per_set=" << test_per_set << '\n'
      << "inliers=" << inliers << '\n'
      << "outliers=" << outliers << '\n'
      << "sigma_n=" << fmt(sigma_n) << '\n'
      << "scale_low=" << fmt(scale_low) << '\n'
      << "scale_high=" << fmt(scale_high) << '\n'
      << "sigma2=" << fmt(sigma2) << '\n'
      << "sigma3=" << fmt(sigma3) << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

std::uint64_t SynthConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t SynthDataset::train_size() const {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.train.size();
  return n;
}

std::size_t SynthDataset::test_size() const {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.test.size();
  return n;
}

SynthDataset gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset d{cfg, {}};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < cfg.num_sets; ++k) {
    SynthSet set;
    auto rng = stream(cfg.seed, k, 0, 0);
    set.base.resize(cfg.inliers);
    for (auto& p : set.base) {
      const double x = unit(rng), y = unit(rng);
      p = {x, y};
    }
    for (std::size_t i = 0; i < cfg.train_per_set; ++i) {
      auto r = stream(cfg.seed, k, 1, i);
      set.train.push_back(draw_sample(cfg, set.base, r));
    }
    for (std::size_t i = 0; i < cfg.test_per_set; ++i) {
      auto r = stream(cfg.seed, k, 2, i);
      set.test.push_back(draw_sample(cfg, set.base, r));
    }
    d.sets.push_back(std::move(set));
  }
  return d;
}

MatchingProblem build_problem(const SynthSample& s, double sigma2, double sigma3, bool with_hyper) {
  MatchingProblem p;
  p.reference = delaunay(s.reference);
  p.target = fully_connected(s.target);
  p.instance = make_lawler(build_affinity_matrix(p.reference, p.target, sigma2), s.reference.size(), s.target.size());
  if (with_hyper) p.hyper = build_affinity_tensor(p.reference, p.target, sigma3, &p.diagnostics);
  p.truth = s.truth;
  return p;
}

TrainSample make_train_sample(const MatchingProblem& p) {
  const AssociationGraph assoc = build_association(p.instance);
  auto input = std::make_shared<const MatchingInput>(make_matching_input(assoc, p.hyper ? &*p.hyper : nullptr));
  return {std::move(input), p.truth, std::make_shared<const SparseMatrix>(p.instance.lawler().k)};
}

MultiGraphSample make_multigraph(const std::vector<const SynthSample*>& samples, double sigma2) {
  const std::size_t m = samples.size();
  if (m < 2) throw InvalidArgument("make_multigraph: need at least two samples");
  const std::size_t n = samples[0]->truth.rows();
  for (const auto* s : samples)
    if (s->truth.rows() != n || s->truth.cols() != n) {
      throw InvalidArgument("make_multigraph: synchronization needs outlier-free samples of equal size");
    }
  // inverse[k][a] = ground-truth index of node a in graph k
  std::vector<std::vector<std::size_t>> inverse(m, std::vector<std::size_t>(n));
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t r = 0; r < n; ++r) inverse[k][samples[k]->truth[r]] = r;

  MultiGraphSample out;
  out.m = m;
  out.n = n;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const Graph gi = delaunay(samples[i]->target), gj = fully_connected(samples[j]->target);
      const auto k = build_affinity_matrix(gi, gj, sigma2);
      out.pairs.emplace_back(i, j);
      out.inputs.push_back(std::make_shared<const MatchingInput>(make_matching_input(build_association(make_lawler(k, n, n)))));
      std::vector<std::ptrdiff_t> cols(n);
      for (std::size_t a = 0; a < n; ++a) cols[a] = samples[j]->truth[inverse[i][a]];
      out.targets.emplace_back(n, n, std::move(cols));
    }
  return out;
}

std::string format_sample(const SynthSample& s) {
  std::ostringstream out;
  out << "qapnet-sample " << kDatasetVersion << '\n';
  write_points(out, "reference", s.reference);
  write_points(out, "target", s.target);
  out << "truth";
  for (auto c : s.truth.col_of_row()) out << ' ' << c;
  out << '\n';
  return out.str();
}

SynthSample parse_sample(const std::string& text) {
  std::istringstream in(text);
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "qapnet-sample") throw ParseError("sample: missing header");
  if (parse_uint(version, "sample") != static_cast<std::uint64_t>(kDatasetVersion)) {
    throw ParseError("sample: unsupported version " + version);
  }
  SynthSample s;
  s.reference = read_points(in, "reference");
  s.target = read_points(in, "target");
  std::string word;
  if (!(in >> word) || word != "truth") throw ParseError("sample: expected 'truth'");
  std::vector<std::ptrdiff_t> cols(s.reference.size());
  for (auto& c : cols) {
    std::string tok;
    if (!(in >> tok)) throw ParseError("sample: truncated ground truth");
    c = static_cast<std::ptrdiff_t>(parse_uint(tok, "sample"));
  }
  try {
    s.truth = Assignment(s.reference.size(), s.target.size(), std::move(cols));
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("sample: invalid ground truth: ") + e.what());
  }
  return s;
}

void write_dataset(const std::filesystem::path& run, const SynthDataset& data, const std::string& code_version) {
  namespace fs = std::filesystem;
  fs::create_directories(run);
  std::ostringstream manifest;
  manifest << "format_version=" << kDatasetVersion << '\n'
           << "code_version=" << code_version << '\n'
           << "config_hash=" << std::hex << data.config.hash() << std::dec << '\n'
           << data.config.to_text();
  write_file(run / "manifest.txt", manifest.str());
  for (std::size_t k = 0; k < data.sets.size(); ++k) {
    const fs::path dir = run / ("set" + std::to_string(k));
    fs::create_directories(dir / "train");
    fs::create_directories(dir / "test");
    std::ostringstream base;
    write_points(base, "base", data.sets[k].base);
    write_file(dir / "base.txt", base.str());
    for (std::size_t i = 0; i < data.sets[k].train.size(); ++i)
      write_file(dir / "train" / sample_name(i), format_sample(data.sets[k].train[i]));
    for (std::size_t i = 0; i < data.sets[k].test.size(); ++i)
      write_file(dir / "test" / sample_name(i), format_sample(data.sets[k].test[i]));
  }
}

SynthConfig read_manifest(const std::filesystem::path& run) {
  std::istringstream in(read_file(run / "manifest.txt"));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("manifest: expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("manifest: missing '") + key + "'");
    return it->second;
  };
  if (parse_uint(get("format_version"), "manifest") != static_cast<std::uint64_t>(kDatasetVersion)) {
    throw ParseError("manifest: unsupported format version");
  }
  SynthConfig c;
  c.num_sets = parse_uint(get("num_sets"), "manifest");
  c.train_per_set = parse_uint(get("train_per_set"), "manifest");
  c.test_per_set = parse_uint(get("test_per_set"), "manifest");
  c.inliers = parse_uint(get("inliers"), "manifest");
  c.outliers = parse_uint(get("outliers"), "manifest");
  c.sigma_n = parse_double(get("sigma_n"), "manifest");
  c.scale_low = parse_double(get("scale_low"), "manifest");
  c.scale_high = parse_double(get("scale_high"), "manifest");
  c.sigma2 = parse_double(get("sigma2"), "manifest");
  c.sigma3 = parse_double(get("sigma3"), "manifest");
  c.seed = parse_uint(get("seed"), "manifest");
  c.validate();
  std::ostringstream expected;
  expected << std::hex << c.hash();
  if (get("config_hash") != expected.str()) throw ParseError("manifest: config hash mismatch");
  return c;
}

SynthDataset read_dataset(const std::filesystem::path& run) {
  SynthDataset d{read_manifest(run), {}};
  for (std::size_t k = 0; k < d.config.num_sets; ++k) {
    const auto dir = run / ("set" + std::to_string(k));
    SynthSet set;
    std::istringstream base(read_file(dir / "base.txt"));
    set.base = read_points(base, "base");
    for (std::size_t i = 0; i < d.config.train_per_set; ++i)
      set.train.push_back(parse_sample(read_file(dir / "train" / sample_name(i))));
    for (std::size_t i = 0; i < d.config.test_per_set; ++i)
      set.test.push_back(parse_sample(read_file(dir / "test" / sample_name(i))));
    d.sets.push_back(std::move(set));
  }
  return d;
}

double accuracy(const Assignment& x, const Assignment& truth) { return matching_accuracy(x, truth); }

}  // namespace qapnet
