#include "qapnet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qapnet/error.hpp"

namespace qapnet::ad {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var{nodes_.size() - 1};
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix& Tape::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return nodes_[v.id].requires_grad; });
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var{nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) throw InvalidArgument("Tape::backward: loss must be a 1x1 value");
  for (auto& n : nodes_) n.grad = Matrix();
  grad_ref(loss)(0, 0) = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, Var{id});
  }
}

SparsePattern SparsePattern::from(const SparseMatrix& m) {
  SparsePattern p;
  p.rows = m.rows();
  p.cols = m.cols();
  p.offsets.assign(m.rows() + 1, 0);
  p.col_index.reserve(m.nnz());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (const auto& t : m.row(r)) p.col_index.push_back(t.col);
    p.offsets[r + 1] = p.col_index.size();
  }
  return p;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument(std::string(who) + ": shape mismatch");
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  return t.record(qapnet::matmul(t.value(a), t.value(b)), {a, b}, [a, b](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    if (t.requires_grad(a)) {
      Matrix& ga = t.grad_ref(a);  // g B^T
      for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t k = 0; k < av.cols(); ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < bv.cols(); ++j) s += g(i, j) * bv(k, j);
          ga(i, k) += s;
        }
    }
    if (t.requires_grad(b)) {
      Matrix& gb = t.grad_ref(b);  // A^T g
      for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t k = 0; k < av.cols(); ++k) {
          const double aik = av(i, k);
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < bv.cols(); ++j) gb(k, j) += aik * g(i, j);
        }
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  Matrix out = t.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += t.value(b).data()[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    for (Var in : {a, b}) {
      if (!t.requires_grad(in)) continue;
      Matrix& gi = t.grad_ref(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi.data()[i] += g.data()[i];
    }
  });
}

Var add_bias(Tape& t, Var x, Var bias) {
  const Matrix& xv = t.value(x);
  const Matrix& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) throw InvalidArgument("add_bias: bias must be 1 x cols");
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  return t.record(std::move(out), {x, bias}, [x, bias](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    if (t.requires_grad(x)) {
      Matrix& gx = t.grad_ref(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += g.data()[i];
    }
    if (t.requires_grad(bias)) {
      Matrix& gb = t.grad_ref(bias);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
    }
  });
}

Var scale(Tape& t, Var x, double c) {
  Matrix out = t.value(x);
  for (double& v : out.data()) v *= c;
  return t.record(std::move(out), {x}, [x, c](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += c * g.data()[i];
  });
}

Var relu(Tape& t, Var x) {
  Matrix out = t.value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& xv = t.value(x);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv.data()[i] > 0.0) gx.data()[i] += g.data()[i];
  });
}

Var exp(Tape& t, Var x) {
  Matrix out = t.value(x);
  for (double& v : out.data()) v = std::exp(v);
  if (!out.all_finite()) throw NumericalError("exp: overflow in activation");
  return t.record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += g.data()[i] * y.data()[i];
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.rows() != bv.rows()) throw InvalidArgument("concat_cols: row counts differ");
  Matrix out(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(av.cols()));
  }
  const std::size_t split = av.cols();
  return t.record(std::move(out), {a, b}, [a, b, split](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    if (t.requires_grad(a)) {
      Matrix& ga = t.grad_ref(a);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < split; ++c) ga(r, c) += g(r, c);
    }
    if (t.requires_grad(b)) {
      Matrix& gb = t.grad_ref(b);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = split; c < g.cols(); ++c) gb(r, c - split) += g(r, c);
    }
  });
}

Var transpose(Tape& t, Var x) {
  return t.record(t.value(x).transposed(), {x}, [x](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(c, r) += g(r, c);
  });
}

Var sum(Tape& t, Var x) {
  Matrix out(1, 1, t.value(x).sum());
  return t.record(std::move(out), {x}, [x](Tape& t, Var self) {
    const double g = t.out_grad(self)(0, 0);
    for (double& v : t.grad_ref(x).data()) v += g;
  });
}

Var gather_rows(Tape& t, Var x, std::shared_ptr<const std::vector<std::size_t>> index) {
  const Matrix& xv = t.value(x);
  Matrix out(index->size(), xv.cols());
  for (std::size_t e = 0; e < index->size(); ++e) {
    const auto src = xv.row((*index)[e]);
    std::copy(src.begin(), src.end(), out.row(e).begin());
  }
  return t.record(std::move(out), {x}, [x, index](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t e = 0; e < index->size(); ++e) {
      auto dst = gx.row((*index)[e]);
      auto src = g.row(e);
      for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += src[c];
    }
  });
}

Var spmm(Tape& t, std::shared_ptr<const SparsePattern> pattern, std::shared_ptr<const std::vector<double>> weights,
         Var x) {
  const Matrix& xv = t.value(x);
  if (xv.rows() != pattern->cols || weights->size() != pattern->nnz()) throw InvalidArgument("spmm: shape mismatch");
  const std::size_t channels = xv.cols();
  Matrix out(pattern->rows, channels);
  for (std::size_t r = 0; r < pattern->rows; ++r) {
    auto orow = out.row(r);
    for (std::size_t e = pattern->offsets[r]; e < pattern->offsets[r + 1]; ++e) {
      const double w = (*weights)[e];
      auto xrow = xv.row(pattern->col_index[e]);
      for (std::size_t c = 0; c < channels; ++c) orow[c] += w * xrow[c];
    }
  }
  return t.record(std::move(out), {x}, [x, pattern, weights](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < pattern->rows; ++r) {
      auto grow = g.row(r);
      for (std::size_t e = pattern->offsets[r]; e < pattern->offsets[r + 1]; ++e) {
        const double w = (*weights)[e];
        auto dst = gx.row(pattern->col_index[e]);
        for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += w * grow[c];
      }
    }
  });
}

Var edge_aggregate(Tape& t, std::shared_ptr<const SparsePattern> pattern,
                   std::shared_ptr<const std::vector<double>> weights, Var edges, Var x) {
  const Matrix& ev = t.value(edges);
  const Matrix& xv = t.value(x);
  if (ev.rows() != pattern->nnz() || xv.rows() != pattern->cols || ev.cols() != xv.cols() ||
      weights->size() != pattern->nnz()) {
    throw InvalidArgument("edge_aggregate: shape mismatch");
  }
  const std::size_t channels = xv.cols();
  Matrix out(pattern->rows, channels);
  for (std::size_t r = 0; r < pattern->rows; ++r) {
    auto orow = out.row(r);
    for (std::size_t e = pattern->offsets[r]; e < pattern->offsets[r + 1]; ++e) {
      const double w = (*weights)[e];
      auto erow = ev.row(e);
      auto xrow = xv.row(pattern->col_index[e]);
      for (std::size_t c = 0; c < channels; ++c) orow[c] += w * erow[c] * xrow[c];
    }
  }
  return t.record(std::move(out), {edges, x}, [edges, x, pattern, weights](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& ev = t.value(edges);
    const Matrix& xv = t.value(x);
    const bool ge_needed = t.requires_grad(edges);
    const bool gx_needed = t.requires_grad(x);
    Matrix* ge = ge_needed ? &t.grad_ref(edges) : nullptr;
    Matrix* gx = gx_needed ? &t.grad_ref(x) : nullptr;
    for (std::size_t r = 0; r < pattern->rows; ++r) {
      auto grow = g.row(r);
      for (std::size_t e = pattern->offsets[r]; e < pattern->offsets[r + 1]; ++e) {
        const double w = (*weights)[e];
        const std::size_t col = pattern->col_index[e];
        for (std::size_t c = 0; c < g.cols(); ++c) {
          const double wg = w * grow[c];
          if (ge) (*ge)(e, c) += wg * xv(col, c);
          if (gx) (*gx)(col, c) += wg * ev(e, c);
        }
      }
    }
  });
}

Var hyper_message(Tape& t, std::shared_ptr<const HyperPattern> pattern, Var p) {
  const Matrix& pv = t.value(p);
  if (pv.rows() != pattern->dim) throw InvalidArgument("hyper_message: shape mismatch");
  const std::size_t channels = pv.cols();
  Matrix out(pattern->dim, channels);
  for (const auto& e : pattern->entries) {
    auto orow = out.row(e.i);
    auto pj = pv.row(e.j);
    auto pk = pv.row(e.k);
    for (std::size_t c = 0; c < channels; ++c) orow[c] += e.value * pj[c] * pk[c];
  }
  return t.record(std::move(out), {p}, [p, pattern](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& pv = t.value(p);
    Matrix& gp = t.grad_ref(p);
    for (const auto& e : pattern->entries) {
      auto grow = g.row(e.i);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        const double wg = e.value * grow[c];
        gp(e.j, c) += wg * pv(e.k, c);
        gp(e.k, c) += wg * pv(e.j, c);
      }
    }
  });
}

Var unvec(Tape& t, Var x, std::size_t rows, std::size_t cols) {
  const Matrix& xv = t.value(x);
  if (xv.cols() != 1) throw InvalidArgument("unvec: expected a column vector");
  Matrix out = qapnet::unvec(xv.data(), rows, cols);
  return t.record(std::move(out), {x}, [x](Tape& t, Var self) {
    const auto g = qapnet::vec(t.out_grad(self));
    Matrix& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += g[i];
  });
}

Var vec(Tape& t, Var x) {
  const Matrix& xv = t.value(x);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Matrix out(xv.size(), 1, qapnet::vec(xv));
  return t.record(std::move(out), {x}, [x, rows, cols](Tape& t, Var self) {
    const Matrix g = qapnet::unvec(t.out_grad(self).data(), rows, cols);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += g.data()[i];
  });
}

Var pad_rows(Tape& t, Var x, std::size_t total_rows, double value) {
  const Matrix& xv = t.value(x);
  if (total_rows < xv.rows()) throw InvalidArgument("pad_rows: target smaller than input");
  Matrix out(total_rows, xv.cols(), value);
  std::copy(xv.data().begin(), xv.data().end(), out.data().begin());
  return t.record(std::move(out), {x}, [x](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g.data()[i];
  });
}

Var slice(Tape& t, Var x, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols) {
  const Matrix& xv = t.value(x);
  if (row0 + rows > xv.rows() || col0 + cols > xv.cols()) throw InvalidArgument("slice: out of range");
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = xv(row0 + r, col0 + c);
  return t.record(std::move(out), {x}, [x, row0, col0](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(row0 + r, col0 + c) += g(r, c);
  });
}

Var assemble_blocks(Tape& t, std::span<const Var> blocks, std::size_t grid) {
  if (blocks.size() != grid * grid || grid == 0) throw InvalidArgument("assemble_blocks: grid size mismatch");
  const std::size_t br = t.value(blocks[0]).rows(), bc = t.value(blocks[0]).cols();
  Matrix out(grid * br, grid * bc);
  for (std::size_t bi = 0; bi < grid; ++bi)
    for (std::size_t bj = 0; bj < grid; ++bj) {
      const Matrix& b = t.value(blocks[bi * grid + bj]);
      if (b.rows() != br || b.cols() != bc) throw InvalidArgument("assemble_blocks: blocks differ in shape");
      for (std::size_t r = 0; r < br; ++r)
        for (std::size_t c = 0; c < bc; ++c) out(bi * br + r, bj * bc + c) = b(r, c);
    }
  std::vector<Var> ins(blocks.begin(), blocks.end());
  return t.record(std::move(out), std::span<const Var>(ins), [ins, grid, br, bc](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    for (std::size_t bi = 0; bi < grid; ++bi)
      for (std::size_t bj = 0; bj < grid; ++bj) {
        const Var in = ins[bi * grid + bj];
        if (!t.requires_grad(in)) continue;
        Matrix& gb = t.grad_ref(in);
        for (std::size_t r = 0; r < br; ++r)
          for (std::size_t c = 0; c < bc; ++c) gb(r, c) += g(bi * br + r, bj * bc + c);
      }
  });
}

Var normalize_cols(Tape& t, Var x) {
  const Matrix& xv = t.value(x);
  std::vector<double> col_sum(xv.cols(), 0.0);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) col_sum[c] += xv(r, c);
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) /= col_sum[c];
  if (!out.all_finite()) throw NumericalError("normalize_cols: zero column");
  return t.record(std::move(out), {x}, [x, col_sum](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& y = t.value(self);
    std::vector<double> dot(y.cols(), 0.0);
    for (std::size_t r = 0; r < y.rows(); ++r)
      for (std::size_t c = 0; c < y.cols(); ++c) dot[c] += g(r, c) * y(r, c);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < y.rows(); ++r)
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += (g(r, c) - dot[c]) / col_sum[c];
  });
}

Var normalize_rows(Tape& t, Var x) {
  const Matrix& xv = t.value(x);
  std::vector<double> row_sum(xv.rows(), 0.0);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (double v : xv.row(r)) row_sum[r] += v;
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& v : out.row(r)) v /= row_sum[r];
  if (!out.all_finite()) throw NumericalError("normalize_rows: zero row");
  return t.record(std::move(out), {x}, [x, row_sum](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += (g(r, c) - dot) / row_sum[r];
    }
  });
}

Var sinkhorn(Tape& t, Var x, std::size_t iterations, double epsilon) {
  const std::size_t n1 = t.value(x).rows(), n2 = t.value(x).cols();
  const bool flip = n1 > n2;
  Var s = flip ? transpose(t, x) : x;
  const std::size_t rows = t.value(s).rows(), n = t.value(s).cols();
  if (rows < n) s = pad_rows(t, s, n, epsilon);
  for (std::size_t it = 0; it < iterations; ++it) {
    s = normalize_cols(t, s);
    s = normalize_rows(t, s);
  }
  if (rows < n) s = slice(t, s, 0, 0, rows, n);
  return flip ? transpose(t, s) : s;
}

Var binary_cross_entropy(Tape& t, Var s, const Assignment& target, double clamp) {
  const Matrix& sv = t.value(s);
  if (sv.rows() != target.rows() || sv.cols() != target.cols()) throw InvalidArgument("binary_cross_entropy: shape mismatch");
  const Matrix x = target.to_matrix();
  double loss = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const double p = std::clamp(sv.data()[i], clamp, 1.0 - clamp);
    loss -= x.data()[i] * std::log(p) + (1.0 - x.data()[i]) * std::log(1.0 - p);
  }
  return t.record(Matrix(1, 1, loss), {s}, [s, x, clamp](Tape& t, Var self) {
    const double g = t.out_grad(self)(0, 0);
    const Matrix& sv = t.value(s);
    Matrix& gs = t.grad_ref(s);
    for (std::size_t i = 0; i < sv.size(); ++i) {
      const double p = sv.data()[i];
      if (p < clamp || p > 1.0 - clamp) continue;
      const double xi = x.data()[i];
      gs.data()[i] += g * (-xi / p + (1.0 - xi) / (1.0 - p));
    }
  });
}

Var quadratic_form(Tape& t, Var s, std::shared_ptr<const SparseMatrix> k, double sign) {
  const Matrix& sv = t.value(s);
  if (k->rows() != sv.size() || k->cols() != sv.size()) throw InvalidArgument("quadratic_form: K does not match S");
  const std::vector<double> x = qapnet::vec(sv);
  const std::vector<double> kx = k->multiply(x);
  double value = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) value += x[i] * kx[i];
  const std::size_t rows = sv.rows(), cols = sv.cols();
  return t.record(Matrix(1, 1, sign * value), {s}, [s, k, sign, rows, cols](Tape& t, Var self) {
    const double g = t.out_grad(self)(0, 0);
    const std::vector<double> x = qapnet::vec(t.value(s));
    std::vector<double> gx = k->multiply(x);
    const std::vector<double> ktx = k->multiply_transposed(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g * sign * (gx[i] + ktx[i]);
    const Matrix gm = qapnet::unvec(gx, rows, cols);
    Matrix& gs = t.grad_ref(s);
    for (std::size_t i = 0; i < gm.size(); ++i) gs.data()[i] += gm.data()[i];
  });
}

Var topk_projector(Tape& t, Var x, std::size_t k, double scale_factor, ProjectorInfo* info) {
  const Matrix& xv = t.value(x);
  const EigenDecomposition eig = sym_eig(xv);
  const std::size_t n = xv.rows();
  if (k == 0 || k > n) throw InvalidArgument("topk_projector: k out of range");
  Matrix out(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t q = 0; q < k; ++q) s += eig.vectors(r, q) * eig.vectors(c, q);
      out(r, c) = scale_factor * s;
    }
  if (info) {
    info->values.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(k));
    info->min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < k; ++i) info->min_gap = std::min(info->min_gap, eig.values[i - 1] - eig.values[i]);
  }
  return t.record(std::move(out), {x}, [x, eig, k, scale_factor, n](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    const Matrix& v = eig.vectors;
    // dL/dU = scale (G + G^T) U for the top-k columns.
    Matrix gu(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t q = 0; q < k; ++q) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += (g(r, c) + g(c, r)) * v(c, q);
        gu(r, q) = scale_factor * s;
      }
    // dL/dX = V (F o (V^T dL/dV)) V^T with F_ij = 1 / (lambda_j - lambda_i).
    // Pairs inside the top-k cancel in the projector, so only gaps across the
    // k-th eigenvalue enter.
    Matrix inner = qapnet::matmul(v.transposed(), gu);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double gap = eig.values[j] - eig.values[i];
        inner(i, j) = (i < k || j >= k || gap == 0.0) ? 0.0 : inner(i, j) / gap;
      }
    const Matrix full = qapnet::matmul(qapnet::matmul(v, inner), v.transposed());
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) gx(r, c) += 0.5 * (full(r, c) + full(c, r));
  });
}

Var pass_through(Tape& t, Var x, Matrix value) {
  require_same_shape(t.value(x), value, "pass_through");
  return t.record(std::move(value), {x}, [x](Tape& t, Var self) {
    const Matrix& g = t.out_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += g.data()[i];
  });
}

}  // namespace qapnet::ad
