#include "qapnet/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "qapnet/error.hpp"

namespace qapnet {
namespace {

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError("checkpoint: bad number '" + s + "'");
  return v;
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError("checkpoint: bad integer '" + s + "'");
  return v;
}

void write_params(std::ostream& out, const char* tag, const NetParams& p) {
  for_each_param(const_cast<NetParams&>(p), [&](const std::string& name, Matrix& m) {
    out << tag << ' ' << name << ' ' << m.rows() << ' ' << m.cols();
    for (double v : m.data()) out << ' ' << format_double(v);
    out << '\n';
  });
}

// A default-constructed state has no layers and empty matrices.
bool has_moments(const AdamState& a) { return !a.first_moment.final_classifier.weight.empty(); }

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  const NetConfig& cfg = c.config;
  out << "qapnet-checkpoint " << kCheckpointVersion << '\n';
  out << "variant " << variant_name(c.variant) << '\n';
  out << "num_layers " << cfg.num_layers << '\n';
  out << "channels " << cfg.channels << '\n';
  out << "alpha " << format_double(cfg.alpha) << '\n';
  out << "alpha_hat " << format_double(cfg.alpha_hat) << '\n';
  out << "lambda2 " << format_double(cfg.lambda2) << '\n';
  out << "lambda3 " << format_double(cfg.lambda3) << '\n';
  out << "sinkhorn_embedding " << cfg.sinkhorn_embedding << '\n';
  out << "edge_embedding " << cfg.edge_embedding << '\n';
  out << "hyper " << cfg.hyper << '\n';
  out << "sinkhorn_iters_in_net " << cfg.sinkhorn_iters_in_net << '\n';
  out << "epsilon " << format_double(cfg.epsilon) << '\n';
  out << "epochs_done " << c.state.epochs_done << '\n';
  write_params(out, "param", c.state.params);
  if (has_moments(c.state.optimizer)) {
    out << "adam_step " << c.state.optimizer.step << '\n';
    write_params(out, "adam_m", c.state.optimizer.first_moment);
    write_params(out, "adam_v", c.state.optimizer.second_moment);
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: empty input");
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    if (!(head >> magic >> version) || magic != "qapnet-checkpoint") throw ParseError("checkpoint: missing header");
    if (version != kCheckpointVersion) {
      throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    }
  }

  Checkpoint c;
  std::map<std::string, std::string> fields;
  std::map<std::string, Matrix> tensors;  // "<tag> <name>"
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end") {
      ended = true;
      break;
    }
    if (key == "param" || key == "adam_m" || key == "adam_v") {
      std::string name, r, cc;
      if (!(ls >> name >> r >> cc)) throw ParseError("checkpoint: truncated tensor line");
      Matrix m(parse_size(r), parse_size(cc));
      for (double& v : m.data()) {
        std::string tok;
        if (!(ls >> tok)) throw ParseError("checkpoint: tensor '" + name + "' is truncated");
        v = parse_double(tok);
      }
      std::string extra;
      if (ls >> extra) throw ParseError("checkpoint: tensor '" + name + "' has extra values");
      if (!tensors.emplace(key + " " + name, std::move(m)).second) {
        throw ParseError("checkpoint: duplicate tensor '" + name + "'");
      }
    } else {
      std::string value;
      if (!(ls >> value)) throw ParseError("checkpoint: field '" + key + "' has no value");
      fields[key] = value;
    }
  }
  if (!ended) throw ParseError("checkpoint: missing end marker");

  auto field = [&](const char* k) -> const std::string& {
    auto it = fields.find(k);
    if (it == fields.end()) throw ParseError(std::string("checkpoint: missing field '") + k + "'");
    return it->second;
  };
  c.variant = parse_variant(field("variant"));
  NetConfig& cfg = c.config;
  cfg.num_layers = parse_size(field("num_layers"));
  cfg.channels = parse_size(field("channels"));
  cfg.alpha = parse_double(field("alpha"));
  cfg.alpha_hat = parse_double(field("alpha_hat"));
  cfg.lambda2 = parse_double(field("lambda2"));
  cfg.lambda3 = parse_double(field("lambda3"));
  cfg.sinkhorn_embedding = parse_size(field("sinkhorn_embedding")) != 0;
  cfg.edge_embedding = parse_size(field("edge_embedding")) != 0;
  cfg.hyper = parse_size(field("hyper")) != 0;
  cfg.sinkhorn_iters_in_net = parse_size(field("sinkhorn_iters_in_net"));
  cfg.epsilon = parse_double(field("epsilon"));
  c.state.epochs_done = parse_size(field("epochs_done"));
  cfg.validate();

  // The structure comes from the configuration; values from the file.
  auto fill = [&](const char* tag, NetParams& target) {
    std::size_t used = 0;
    for_each_param(target, [&](const std::string& name, Matrix& m) {
      auto it = tensors.find(std::string(tag) + " " + name);
      if (it == tensors.end()) throw ParseError("checkpoint: missing tensor '" + name + "'");
      if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
        throw ParseError("checkpoint: tensor '" + name + "' has the wrong shape");
      }
      m = it->second;
      ++used;
    });
    return used;
  };
  c.state.params = init_params(cfg, 0);
  std::size_t used = fill("param", c.state.params);
  if (fields.count("adam_step")) {
    c.state.optimizer = AdamState::zeros_like(c.state.params);
    c.state.optimizer.step = parse_size(fields["adam_step"]);
    used += fill("adam_m", c.state.optimizer.first_moment);
    used += fill("adam_v", c.state.optimizer.second_moment);
  }
  if (used != tensors.size()) throw ParseError("checkpoint: unexpected tensors for this configuration");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, ckpt);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace qapnet
