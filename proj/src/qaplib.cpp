#include "qapnet/qaplib.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "qapnet/error.hpp"

namespace qapnet {
namespace {

class Tokens {
 public:
  Tokens(const std::string& text, bool commas, const char* what) : what_(what) {
    std::string buf = text;
    if (commas) std::replace(buf.begin(), buf.end(), ',', ' ');
    std::istringstream in(buf);
    std::string tok;
    while (in >> tok) tokens_.push_back(tok);
  }

  long long next_int() {
    const std::string& t = next();
    long long v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size()) {
      throw ParseError(std::string(what_) + ": non-integer token '" + t + "'");
    }
    return v;
  }

  double next_number() {
    const std::string& t = next();
    double v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size()) {
      throw ParseError(std::string(what_) + ": bad number '" + t + "'");
    }
    return v;
  }

  bool done() const { return pos_ == tokens_.size(); }

 private:
  const std::string& next() {
    if (pos_ >= tokens_.size()) throw ParseError(std::string(what_) + ": truncated stream");
    return tokens_[pos_++];
  }

  const char* what_;
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << static_cast<long long>(m(r, c));
    out << '\n';
  }
}

}  // namespace

QaplibInstance parse_qaplib(const std::string& text, const std::string& name) {
  Tokens tok(text, false, "qaplib");
  const long long n = tok.next_int();
  if (n < 2) throw ParseError("qaplib: n must be >= 2");
  QaplibInstance inst{name, static_cast<std::size_t>(n), Matrix(n, n), Matrix(n, n), std::nullopt};
  for (double& v : inst.a.data()) v = static_cast<double>(tok.next_int());
  for (double& v : inst.b.data()) v = static_cast<double>(tok.next_int());
  if (!tok.done()) throw ParseError("qaplib: trailing tokens after B");
  return inst;
}

std::string format_qaplib(const QaplibInstance& inst) {
  std::ostringstream out;
  out << inst.n << "\n\n";
  write_matrix(out, inst.a);
  out << '\n';
  write_matrix(out, inst.b);
  return out.str();
}

QaplibSolution parse_qaplib_solution(const std::string& text) {
  Tokens tok(text, true, "qaplib solution");
  const long long n = tok.next_int();
  if (n < 1) throw ParseError("qaplib solution: n must be positive");
  QaplibSolution sol;
  sol.n = static_cast<std::size_t>(n);
  sol.objective = tok.next_number();
  std::vector<std::ptrdiff_t> cols(sol.n);
  std::vector<bool> seen(sol.n, false);
  for (auto& c : cols) {
    const long long v = tok.next_int();
    if (v < 1 || v > n || seen[v - 1]) throw ParseError("qaplib solution: permutation is not a bijection");
    seen[v - 1] = true;
    c = static_cast<std::ptrdiff_t>(v - 1);
  }
  if (!tok.done()) throw ParseError("qaplib solution: trailing tokens");
  sol.permutation = Assignment(sol.n, sol.n, std::move(cols));
  return sol;
}

std::string format_qaplib_solution(const QaplibSolution& sol) {
  std::ostringstream out;
  out << sol.n << ' ' << static_cast<long long>(sol.objective) << '\n';
  for (std::size_t i = 0; i < sol.n; ++i) out << (i ? " " : "") << sol.permutation[i] + 1;
  out << '\n';
  return out.str();
}

double qaplib_objective(const QaplibInstance& inst, const Assignment& p) {
  if (p.rows() != inst.n || p.cols() != inst.n) throw InvalidArgument("qaplib_objective: permutation size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < inst.n; ++i)
    for (std::size_t j = 0; j < inst.n; ++j) s += inst.a(i, j) * inst.b(p[i], p[j]);
  return s;
}

QapInstance qaplib_to_lawler(const QaplibInstance& inst) {
  QapInstance q = kb_to_lawler(inst.a, inst.b.transposed());
  q.sense = Sense::kMinimize;
  return q;
}

SparseMatrix qaplib_maximization_affinity(const SparseMatrix& k) {
  const std::size_t n2 = k.rows();
  std::size_t n = 0;
  while (n * n < n2) ++n;
  if (n * n != n2 || k.cols() != n2) throw InvalidArgument("qaplib_maximization_affinity: expected an n^2 x n^2 matrix");
  const Matrix dense = k.to_dense();
  const double top = k.max_value();
  std::vector<Triplet> entries;
  for (std::size_t r = 0; r < n2; ++r)
    for (std::size_t c = 0; c < n2; ++c) {
      const std::size_t i = r % n, a = r / n, j = c % n, b = c / n;
      const bool diagonal = r == c;
      if (!diagonal && (i == j || a == b)) continue;
      const double v = top - dense(r, c);
      if (v != 0.0) entries.push_back({r, c, v});
    }
  return SparseMatrix(n2, n2, std::move(entries));
}

double rel_obj_score(double obj, double bound) {
  if (!(obj > 0.0)) throw InvalidArgument("rel_obj_score: objective must be positive");
  return (obj - bound) / obj;
}

std::string qaplib_category(const std::string& name) {
  std::string out;
  for (char ch : name) {
    if (!std::isalpha(static_cast<unsigned char>(ch))) break;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

std::vector<QaplibEntry> load_qaplib_dir(const std::filesystem::path& dir, std::size_t max_n) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("not a directory: '" + dir.string() + "'");
  std::map<std::string, fs::path> dats, slns;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".dat") dats[e.path().stem().string()] = e.path();
    if (ext == ".sln") slns[e.path().stem().string()] = e.path();
  }
  std::vector<QaplibEntry> out;
  for (const auto& [name, path] : dats) {
    QaplibInstance inst;
    try {
      inst = parse_qaplib(read_text(path), name);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    if (inst.n > max_n) continue;
    QaplibEntry entry{std::move(inst), std::nullopt, path};
    if (auto it = slns.find(name); it != slns.end()) {
      try {
        entry.solution = parse_qaplib_solution(read_text(it->second));
      } catch (const ParseError& e) {
        throw ParseError(it->second.string() + ": " + e.what());
      }
      if (entry.solution->n != entry.instance.n) throw ParseError(it->second.string() + ": size differs from instance");
      entry.instance.known_feasible_bound = qaplib_objective(entry.instance, entry.solution->permutation);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace qapnet
