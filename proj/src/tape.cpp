#include "gwae/tape.hpp"

#include <cmath>
#include <string>

#include "gwae/errors.hpp"

namespace gwae {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ConfigError(std::string(op) + ": shape mismatch (" + std::to_string(a.nrows) + "x" +
                      std::to_string(a.ncols) + " vs " + std::to_string(b.nrows) + "x" +
                      std::to_string(b.ncols) + ")");
}

}  // namespace

Tape::Id Tape::push(Node n) {
  if (check_finite_) ensure_finite(n.value, "op output");
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::ensure_finite(const Tensor& t, const char* what) const {
  for (double x : t.data)
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
}

Tape::Id Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.ncols != tb.nrows) throw ConfigError("matmul: inner dimensions differ");
  Node n;
  n.op = Op::Matmul;
  n.in = {a, b};
  Tensor out(ta.nrows, tb.ncols);
  for (std::size_t i = 0; i < ta.nrows; ++i)
    for (std::size_t p = 0; p < ta.ncols; ++p) {
      const double aip = ta.at(i, p);
      if (aip == 0.0) continue;
      const double* brow = &tb.data[p * tb.ncols];
      double* orow = &out.data[i * out.ncols];
      for (std::size_t j = 0; j < tb.ncols; ++j) orow[j] += aip * brow[j];
    }
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  check_same_shape(ta, tb, "add");
  Node n;
  n.op = Op::Add;
  n.in = {a, b};
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value.data[i] += tb.data[i];
  return push(std::move(n));
}

Tape::Id Tape::add_row(Id a, Id row) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tr = nodes_[row].value;
  if (tr.nrows != 1 || tr.ncols != ta.ncols) throw ConfigError("add_row: row must be 1 x ncols");
  Node n;
  n.op = Op::AddRow;
  n.in = {a, row};
  n.value = ta;
  for (std::size_t i = 0; i < ta.nrows; ++i)
    for (std::size_t j = 0; j < ta.ncols; ++j) n.value.at(i, j) += tr.data[j];
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double s) {
  Node n;
  n.op = Op::Scale;
  n.in = {a};
  n.s0 = s;
  n.value = nodes_[a].value;
  for (auto& x : n.value.data) x *= s;
  return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  check_same_shape(ta, tb, "mul");
  Node n;
  n.op = Op::Mul;
  n.in = {a, b};
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value.data[i] *= tb.data[i];
  return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
  Node n;
  n.op = Op::Tanh;
  n.in = {a};
  n.value = nodes_[a].value;
  for (auto& x : n.value.data) x = std::tanh(x);
  return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
  Node n;
  n.op = Op::Relu;
  n.in = {a};
  n.value = nodes_[a].value;
  for (auto& x : n.value.data) x = x > 0.0 ? x : 0.0;
  return push(std::move(n));
}

Tape::Id Tape::exp(Id a) {
  Node n;
  n.op = Op::Exp;
  n.in = {a};
  n.value = nodes_[a].value;
  for (auto& x : n.value.data) x = std::exp(x);
  return push(std::move(n));
}

Tape::Id Tape::log(Id a) {
  Node n;
  n.op = Op::Log;
  n.in = {a};
  n.value = nodes_[a].value;
  for (auto& x : n.value.data) {
    if (x <= 0.0) throw NumericError("log: non-positive input");
    x = std::log(x);
  }
  return push(std::move(n));
}

Tape::Id Tape::clamp(Id a, double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("clamp: lo must be < hi");
  Node n;
  n.op = Op::Clamp;
  n.in = {a};
  n.s0 = lo;
  n.s1 = hi;
  n.value = nodes_[a].value;
  for (auto& x : n.value.data) x = x < lo ? lo : (x > hi ? hi : x);
  return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
  Node n;
  n.op = Op::Sum;
  n.in = {a};
  double s = 0.0;
  for (double x : nodes_[a].value.data) s += x;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Tape::Id Tape::mean(Id a) {
  const std::size_t sz = nodes_[a].value.size();
  if (sz == 0) throw ConfigError("mean: empty tensor");
  Node n;
  n.op = Op::Mean;
  n.in = {a};
  double s = 0.0;
  for (double x : nodes_[a].value.data) s += x;
  n.value = Tensor::scalar(s / static_cast<double>(sz));
  return push(std::move(n));
}

Tape::Id Tape::mean_rows(Id a) {
  const Tensor& ta = nodes_[a].value;
  if (ta.nrows == 0) throw ConfigError("mean_rows: empty tensor");
  Node n;
  n.op = Op::MeanRows;
  n.in = {a};
  Tensor out(1, ta.ncols);
  for (std::size_t i = 0; i < ta.nrows; ++i)
    for (std::size_t j = 0; j < ta.ncols; ++j) out.data[j] += ta.at(i, j);
  for (auto& x : out.data) x /= static_cast<double>(ta.nrows);
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::gather_rows(Id a, std::shared_ptr<const std::vector<std::uint32_t>> rows) {
  const Tensor& ta = nodes_[a].value;
  for (auto r : *rows)
    if (r >= ta.nrows) throw ConfigError("gather_rows: row index out of range");
  Node n;
  n.op = Op::GatherRows;
  n.in = {a};
  n.rows = rows;
  Tensor out(rows->size(), ta.ncols);
  for (std::size_t i = 0; i < rows->size(); ++i)
    for (std::size_t j = 0; j < ta.ncols; ++j) out.at(i, j) = ta.at((*rows)[i], j);
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::scatter_add_rows(Id a, std::shared_ptr<const std::vector<std::uint32_t>> rows,
                                std::size_t out_rows) {
  const Tensor& ta = nodes_[a].value;
  if (rows->size() != ta.nrows) throw ConfigError("scatter_add_rows: one target per input row");
  for (auto r : *rows)
    if (r >= out_rows) throw ConfigError("scatter_add_rows: target out of range");
  Node n;
  n.op = Op::ScatterAddRows;
  n.in = {a};
  n.rows = rows;
  n.aux = out_rows;
  Tensor out(out_rows, ta.ncols);
  for (std::size_t i = 0; i < ta.nrows; ++i)
    for (std::size_t j = 0; j < ta.ncols; ++j) out.at((*rows)[i], j) += ta.at(i, j);
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::concat_rows(const std::vector<Id>& parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no inputs");
  const std::size_t ncols = nodes_[parts[0]].value.ncols;
  std::size_t nrows = 0;
  for (Id p : parts) {
    if (nodes_[p].value.ncols != ncols) throw ConfigError("concat_rows: column counts differ");
    nrows += nodes_[p].value.nrows;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.in = parts;
  Tensor out(nrows, ncols);
  std::size_t r = 0;
  for (Id p : parts) {
    const Tensor& tp = nodes_[p].value;
    std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + r * ncols);
    r += tp.nrows;
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::neighbor_mean(Id a, std::shared_ptr<const NeighborLists> lists) {
  const Tensor& ta = nodes_[a].value;
  for (auto idx : lists->indices)
    if (idx >= ta.nrows) throw ConfigError("neighbor_mean: neighbor index out of range");
  Node n;
  n.op = Op::NeighborMean;
  n.in = {a};
  n.lists = lists;
  Tensor out(lists->count(), ta.ncols);
  for (std::size_t t = 0; t < lists->count(); ++t) {
    const std::size_t deg = lists->degree(t);
    if (deg == 0) continue;
    double* orow = &out.data[t * out.ncols];
    for (std::size_t e = lists->offsets[t]; e < lists->offsets[t + 1]; ++e) {
      const double* arow = &ta.data[lists->indices[e] * ta.ncols];
      for (std::size_t j = 0; j < ta.ncols; ++j) orow[j] += arow[j];
    }
    for (std::size_t j = 0; j < ta.ncols; ++j) orow[j] /= static_cast<double>(deg);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::global_mean_excl(Id a, std::shared_ptr<const NeighborLists> lists) {
  const Tensor& ta = nodes_[a].value;
  if (lists->count() != ta.nrows) throw ConfigError("global_mean_excl: one list per row");
  Node n;
  n.op = Op::GlobalMeanExcl;
  n.in = {a};
  n.lists = lists;
  const std::size_t v = ta.nrows;
  const std::size_t c = ta.ncols;
  std::vector<double> total(c, 0.0);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < c; ++j) total[j] += ta.at(i, j);
  Tensor out(v, c);
  for (std::size_t t = 0; t < v; ++t) {
    const std::size_t deg = lists->degree(t);
    if (v < deg + 2) continue;  // empty complement -> zero row
    const double denom = static_cast<double>(v - deg - 1);
    double* orow = &out.data[t * c];
    for (std::size_t j = 0; j < c; ++j) orow[j] = total[j] - ta.at(t, j);
    for (std::size_t e = lists->offsets[t]; e < lists->offsets[t + 1]; ++e) {
      const double* arow = &ta.data[lists->indices[e] * c];
      for (std::size_t j = 0; j < c; ++j) orow[j] -= arow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= denom;
  }
  n.value = std::move(out);
  return push(std::move(n));
}

namespace {

double imq_kernel(const double* x, const double* y, std::size_t m, double c) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double d = x[j] - y[j];
    d2 += d * d;
  }
  return c / (c + d2);
}

// grad_x k(x,y) accumulated into out with weight w.
void imq_grad(const double* x, const double* y, std::size_t m, double c, double w, double* out) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double d = x[j] - y[j];
    d2 += d * d;
  }
  const double f = -2.0 * c / ((c + d2) * (c + d2));
  for (std::size_t j = 0; j < m; ++j) out[j] += w * f * (x[j] - y[j]);
}

}  // namespace

Tape::Id Tape::mmd_imq(Id a, Id b, double c) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  check_same_shape(ta, tb, "mmd_imq");
  if (ta.nrows < 2) throw ConfigError("mmd_imq: need at least two samples per batch");
  Node n;
  n.op = Op::MmdImq;
  n.in = {a, b};
  n.s0 = c;
  const std::size_t nn = ta.nrows;
  const std::size_t m = ta.ncols;
  double acc = 0.0;
  for (std::size_t i = 0; i < nn; ++i)
    for (std::size_t j = 0; j < nn; ++j) {
      if (i == j) continue;
      acc += imq_kernel(&ta.data[i * m], &ta.data[j * m], m, c);
      acc += imq_kernel(&tb.data[i * m], &tb.data[j * m], m, c);
      acc -= 2.0 * imq_kernel(&ta.data[i * m], &tb.data[j * m], m, c);
    }
  n.value = Tensor::scalar(acc / (static_cast<double>(nn) * static_cast<double>(nn - 1)));
  return push(std::move(n));
}

Tensor& Tape::grad_buf(Id id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad = Tensor(n.value.nrows, n.value.ncols);
    n.grad_live = true;
  }
  return n.grad;
}

Tensor& Tape::tangent_buf(Id id) {
  Node& n = nodes_[id];
  if (!n.tangent_live) {
    n.tangent = Tensor(n.value.nrows, n.value.ncols);
    n.tangent_live = true;
  }
  return n.tangent;
}

const Tensor& Tape::grad(Id id) const {
  static const Tensor empty;
  const Node& n = nodes_[id];
  if (!n.grad_live) {
    // backward never reached this node; gradient is zero.
    const_cast<Node&>(n).grad = Tensor(n.value.nrows, n.value.ncols);
    const_cast<Node&>(n).grad_live = true;
  }
  return n.grad;
}

void Tape::backward(Id output) {
  const Node& out = nodes_[output];
  if (!out.value.is_scalar()) throw ConfigError("backward: output must be scalar");
  for (auto& n : nodes_) n.grad_live = false;
  grad_buf(output).data[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (!nodes_[i].grad_live) continue;
    if (nodes_[i].op == Op::Leaf) continue;
    vjp_node(i);
  }
}

void Tape::vjp_node(std::size_t i) {
  Node& n = nodes_[i];
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Matmul: {
      const Tensor& va = nodes_[n.in[0]].value;
      const Tensor& vb = nodes_[n.in[1]].value;
      Tensor& ga = grad_buf(n.in[0]);
      Tensor& gb = grad_buf(n.in[1]);
      // ga += g * b^T
      for (std::size_t r = 0; r < va.nrows; ++r)
        for (std::size_t k = 0; k < va.ncols; ++k) {
          double s = 0.0;
          const double* grow = &g.data[r * g.ncols];
          const double* brow = &vb.data[k * vb.ncols];
          for (std::size_t j = 0; j < vb.ncols; ++j) s += grow[j] * brow[j];
          ga.at(r, k) += s;
        }
      // gb += a^T * g
      for (std::size_t r = 0; r < va.nrows; ++r)
        for (std::size_t k = 0; k < va.ncols; ++k) {
          const double ark = va.at(r, k);
          if (ark == 0.0) continue;
          const double* grow = &g.data[r * g.ncols];
          double* gbrow = &gb.data[k * gb.ncols];
          for (std::size_t j = 0; j < g.ncols; ++j) gbrow[j] += ark * grow[j];
        }
      break;
    }
    case Op::Add: {
      Tensor& ga = grad_buf(n.in[0]);
      Tensor& gb = grad_buf(n.in[1]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga.data[k] += g.data[k];
        gb.data[k] += g.data[k];
      }
      break;
    }
    case Op::AddRow: {
      Tensor& ga = grad_buf(n.in[0]);
      Tensor& gr = grad_buf(n.in[1]);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
      for (std::size_t r = 0; r < g.nrows; ++r)
        for (std::size_t j = 0; j < g.ncols; ++j) gr.data[j] += g.at(r, j);
      break;
    }
    case Op::Scale: {
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += n.s0 * g.data[k];
      break;
    }
    case Op::Mul: {
      const Tensor& va = nodes_[n.in[0]].value;
      const Tensor& vb = nodes_[n.in[1]].value;
      Tensor& ga = grad_buf(n.in[0]);
      Tensor& gb = grad_buf(n.in[1]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga.data[k] += g.data[k] * vb.data[k];
        gb.data[k] += g.data[k] * va.data[k];
      }
      break;
    }
    case Op::Tanh: {
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t k = 0; k < g.size(); ++k)
        ga.data[k] += g.data[k] * (1.0 - n.value.data[k] * n.value.data[k]);
      break;
    }
    case Op::Relu: {
      const Tensor& va = nodes_[n.in[0]].value;
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t k = 0; k < g.size(); ++k)
        if (va.data[k] > 0.0) ga.data[k] += g.data[k];
      break;
    }
    case Op::Exp: {
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * n.value.data[k];
      break;
    }
    case Op::Log: {
      const Tensor& va = nodes_[n.in[0]].value;
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] / va.data[k];
      break;
    }
    case Op::Clamp: {
      const Tensor& va = nodes_[n.in[0]].value;
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t k = 0; k < g.size(); ++k)
        if (va.data[k] > n.s0 && va.data[k] < n.s1) ga.data[k] += g.data[k];
      break;
    }
    case Op::Sum: {
      Tensor& ga = grad_buf(n.in[0]);
      for (auto& x : ga.data) x += g.data[0];
      break;
    }
    case Op::Mean: {
      Tensor& ga = grad_buf(n.in[0]);
      const double w = g.data[0] / static_cast<double>(ga.size());
      for (auto& x : ga.data) x += w;
      break;
    }
    case Op::MeanRows: {
      Tensor& ga = grad_buf(n.in[0]);
      const double inv = 1.0 / static_cast<double>(ga.nrows);
      for (std::size_t r = 0; r < ga.nrows; ++r)
        for (std::size_t j = 0; j < ga.ncols; ++j) ga.at(r, j) += g.data[j] * inv;
      break;
    }
    case Op::GatherRows: {
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t r = 0; r < n.rows->size(); ++r)
        for (std::size_t j = 0; j < g.ncols; ++j) ga.at((*n.rows)[r], j) += g.at(r, j);
      break;
    }
    case Op::ScatterAddRows: {
      Tensor& ga = grad_buf(n.in[0]);
      for (std::size_t r = 0; r < ga.nrows; ++r)
        for (std::size_t j = 0; j < g.ncols; ++j) ga.at(r, j) += g.at((*n.rows)[r], j);
      break;
    }
    case Op::ConcatRows: {
      std::size_t r = 0;
      for (Id p : n.in) {
        Tensor& gp = grad_buf(p);
        for (std::size_t k = 0; k < gp.size(); ++k) gp.data[k] += g.data[r * g.ncols + k];
        r += gp.nrows;
      }
      break;
    }
    case Op::NeighborMean: {
      Tensor& ga = grad_buf(n.in[0]);
      const auto& l = *n.lists;
      for (std::size_t t = 0; t < l.count(); ++t) {
        const std::size_t deg = l.degree(t);
        if (deg == 0) continue;
        const double inv = 1.0 / static_cast<double>(deg);
        const double* grow = &g.data[t * g.ncols];
        for (std::size_t e = l.offsets[t]; e < l.offsets[t + 1]; ++e) {
          double* arow = &ga.data[l.indices[e] * ga.ncols];
          for (std::size_t j = 0; j < g.ncols; ++j) arow[j] += grow[j] * inv;
        }
      }
      break;
    }
    case Op::GlobalMeanExcl: {
      Tensor& ga = grad_buf(n.in[0]);
      const auto& l = *n.lists;
      const std::size_t v = ga.nrows;
      const std::size_t c = ga.ncols;
      // coefficient per target row t: c_t = g_t / (v - deg_t - 1)
      std::vector<double> csum(c, 0.0);
      Tensor coef(v, c);
      for (std::size_t t = 0; t < v; ++t) {
        const std::size_t deg = l.degree(t);
        if (v < deg + 2) continue;
        const double inv = 1.0 / static_cast<double>(v - deg - 1);
        for (std::size_t j = 0; j < c; ++j) {
          const double ct = g.at(t, j) * inv;
          coef.at(t, j) = ct;
          csum[j] += ct;
        }
      }
      for (std::size_t r = 0; r < v; ++r)
        for (std::size_t j = 0; j < c; ++j) ga.at(r, j) += csum[j] - coef.at(r, j);
      for (std::size_t t = 0; t < v; ++t)
        for (std::size_t e = l.offsets[t]; e < l.offsets[t + 1]; ++e) {
          const std::size_t u = l.indices[e];
          for (std::size_t j = 0; j < c; ++j) ga.at(u, j) -= coef.at(t, j);
        }
      break;
    }
    case Op::MmdImq: {
      const Tensor& va = nodes_[n.in[0]].value;
      const Tensor& vb = nodes_[n.in[1]].value;
      Tensor& ga = grad_buf(n.in[0]);
      Tensor& gb = grad_buf(n.in[1]);
      const std::size_t nn = va.nrows;
      const std::size_t m = va.ncols;
      const double w = g.data[0] * 2.0 / (static_cast<double>(nn) * static_cast<double>(nn - 1));
      for (std::size_t r = 0; r < nn; ++r) {
        double* garow = &ga.data[r * m];
        double* gbrow = &gb.data[r * m];
        for (std::size_t j = 0; j < nn; ++j) {
          if (j == r) continue;
          imq_grad(&va.data[r * m], &va.data[j * m], m, n.s0, w, garow);
          imq_grad(&va.data[r * m], &vb.data[j * m], m, n.s0, -w, garow);
          imq_grad(&vb.data[r * m], &vb.data[j * m], m, n.s0, w, gbrow);
          imq_grad(&vb.data[r * m], &va.data[j * m], m, n.s0, -w, gbrow);
        }
      }
      break;
    }
  }
}

std::vector<Tensor> Tape::jvp(const std::vector<Id>& outputs, Id seeded_leaf,
                              const Tensor& direction) {
  Node& seed = nodes_[seeded_leaf];
  if (seed.op != Op::Leaf) throw ConfigError("jvp: seeded node must be a leaf");
  if (!seed.value.same_shape(direction)) throw ConfigError("jvp: direction shape mismatch");
  for (auto& n : nodes_) n.tangent_live = false;
  tangent_buf(seeded_leaf) = direction;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::Leaf) continue;
    bool touched = false;
    for (Id p : nodes_[i].in)
      if (nodes_[p].tangent_live) {
        touched = true;
        break;
      }
    if (!touched) continue;
    Tensor t = jvp_node(i);
    nodes_[i].tangent = std::move(t);
    nodes_[i].tangent_live = true;
  }
  std::vector<Tensor> result;
  result.reserve(outputs.size());
  for (Id o : outputs) {
    if (nodes_[o].tangent_live)
      result.push_back(nodes_[o].tangent);
    else
      result.push_back(Tensor(nodes_[o].value.nrows, nodes_[o].value.ncols));
  }
  return result;
}

Tensor Tape::jvp_node(std::size_t i) {
  Node& n = nodes_[i];
  auto tan = [&](Id p) -> const Tensor& {
    Node& np = nodes_[p];
    if (!np.tangent_live) {
      np.tangent = Tensor(np.value.nrows, np.value.ncols);
      np.tangent_live = true;
    }
    return np.tangent;
  };
  switch (n.op) {
    case Op::Leaf:
      return n.tangent;
    case Op::Matmul: {
      const Tensor& va = nodes_[n.in[0]].value;
      const Tensor& vb = nodes_[n.in[1]].value;
      const Tensor& da = tan(n.in[0]);
      const Tensor& db = tan(n.in[1]);
      Tensor out(n.value.nrows, n.value.ncols);
      for (std::size_t r = 0; r < va.nrows; ++r)
        for (std::size_t p = 0; p < va.ncols; ++p) {
          const double d1 = da.at(r, p);
          const double d2 = va.at(r, p);
          double* orow = &out.data[r * out.ncols];
          const double* brow = &vb.data[p * vb.ncols];
          const double* dbrow = &db.data[p * db.ncols];
          for (std::size_t j = 0; j < vb.ncols; ++j) orow[j] += d1 * brow[j] + d2 * dbrow[j];
        }
      return out;
    }
    case Op::Add: {
      Tensor out = tan(n.in[0]);
      const Tensor& db = tan(n.in[1]);
      for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += db.data[k];
      return out;
    }
    case Op::AddRow: {
      Tensor out = tan(n.in[0]);
      const Tensor& dr = tan(n.in[1]);
      for (std::size_t r = 0; r < out.nrows; ++r)
        for (std::size_t j = 0; j < out.ncols; ++j) out.at(r, j) += dr.data[j];
      return out;
    }
    case Op::Scale: {
      Tensor out = tan(n.in[0]);
      for (auto& x : out.data) x *= n.s0;
      return out;
    }
    case Op::Mul: {
      const Tensor& va = nodes_[n.in[0]].value;
      const Tensor& vb = nodes_[n.in[1]].value;
      const Tensor& da = tan(n.in[0]);
      const Tensor& db = tan(n.in[1]);
      Tensor out(n.value.nrows, n.value.ncols);
      for (std::size_t k = 0; k < out.size(); ++k)
        out.data[k] = da.data[k] * vb.data[k] + va.data[k] * db.data[k];
      return out;
    }
    case Op::Tanh: {
      Tensor out = tan(n.in[0]);
      for (std::size_t k = 0; k < out.size(); ++k)
        out.data[k] *= 1.0 - n.value.data[k] * n.value.data[k];
      return out;
    }
    case Op::Relu: {
      const Tensor& va = nodes_[n.in[0]].value;
      Tensor out = tan(n.in[0]);
      for (std::size_t k = 0; k < out.size(); ++k)
        if (va.data[k] <= 0.0) out.data[k] = 0.0;
      return out;
    }
    case Op::Exp: {
      Tensor out = tan(n.in[0]);
      for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= n.value.data[k];
      return out;
    }
    case Op::Log: {
      const Tensor& va = nodes_[n.in[0]].value;
      Tensor out = tan(n.in[0]);
      for (std::size_t k = 0; k < out.size(); ++k) out.data[k] /= va.data[k];
      return out;
    }
    case Op::Clamp: {
      const Tensor& va = nodes_[n.in[0]].value;
      Tensor out = tan(n.in[0]);
      for (std::size_t k = 0; k < out.size(); ++k)
        if (!(va.data[k] > n.s0 && va.data[k] < n.s1)) out.data[k] = 0.0;
      return out;
    }
    case Op::Sum: {
      const Tensor& da = tan(n.in[0]);
      double s = 0.0;
      for (double x : da.data) s += x;
      return Tensor::scalar(s);
    }
    case Op::Mean: {
      const Tensor& da = tan(n.in[0]);
      double s = 0.0;
      for (double x : da.data) s += x;
      return Tensor::scalar(s / static_cast<double>(da.size()));
    }
    case Op::MeanRows: {
      const Tensor& da = tan(n.in[0]);
      Tensor out(1, da.ncols);
      for (std::size_t r = 0; r < da.nrows; ++r)
        for (std::size_t j = 0; j < da.ncols; ++j) out.data[j] += da.at(r, j);
      for (auto& x : out.data) x /= static_cast<double>(da.nrows);
      return out;
    }
    case Op::GatherRows: {
      const Tensor& da = tan(n.in[0]);
      Tensor out(n.value.nrows, n.value.ncols);
      for (std::size_t r = 0; r < n.rows->size(); ++r)
        for (std::size_t j = 0; j < out.ncols; ++j) out.at(r, j) = da.at((*n.rows)[r], j);
      return out;
    }
    case Op::ScatterAddRows: {
      const Tensor& da = tan(n.in[0]);
      Tensor out(n.value.nrows, n.value.ncols);
      for (std::size_t r = 0; r < da.nrows; ++r)
        for (std::size_t j = 0; j < out.ncols; ++j) out.at((*n.rows)[r], j) += da.at(r, j);
      return out;
    }
    case Op::ConcatRows: {
      Tensor out(n.value.nrows, n.value.ncols);
      std::size_t r = 0;
      for (Id p : n.in) {
        const Tensor& dp = tan(p);
        std::copy(dp.data.begin(), dp.data.end(), out.data.begin() + r * out.ncols);
        r += dp.nrows;
      }
      return out;
    }
    case Op::NeighborMean: {
      const Tensor& da = tan(n.in[0]);
      Tensor out(n.value.nrows, n.value.ncols);
      const auto& l = *n.lists;
      for (std::size_t t = 0; t < l.count(); ++t) {
        const std::size_t deg = l.degree(t);
        if (deg == 0) continue;
        double* orow = &out.data[t * out.ncols];
        for (std::size_t e = l.offsets[t]; e < l.offsets[t + 1]; ++e) {
          const double* arow = &da.data[l.indices[e] * da.ncols];
          for (std::size_t j = 0; j < da.ncols; ++j) orow[j] += arow[j];
        }
        for (std::size_t j = 0; j < da.ncols; ++j) orow[j] /= static_cast<double>(deg);
      }
      return out;
    }
    case Op::GlobalMeanExcl: {
      const Tensor& da = tan(n.in[0]);
      const auto& l = *n.lists;
      const std::size_t v = da.nrows;
      const std::size_t c = da.ncols;
      std::vector<double> total(c, 0.0);
      for (std::size_t i2 = 0; i2 < v; ++i2)
        for (std::size_t j = 0; j < c; ++j) total[j] += da.at(i2, j);
      Tensor out(v, c);
      for (std::size_t t = 0; t < v; ++t) {
        const std::size_t deg = l.degree(t);
        if (v < deg + 2) continue;
        const double denom = static_cast<double>(v - deg - 1);
        double* orow = &out.data[t * c];
        for (std::size_t j = 0; j < c; ++j) orow[j] = total[j] - da.at(t, j);
        for (std::size_t e = l.offsets[t]; e < l.offsets[t + 1]; ++e) {
          const double* arow = &da.data[l.indices[e] * c];
          for (std::size_t j = 0; j < c; ++j) orow[j] -= arow[j];
        }
        for (std::size_t j = 0; j < c; ++j) orow[j] /= denom;
      }
      return out;
    }
    case Op::MmdImq: {
      const Tensor& va = nodes_[n.in[0]].value;
      const Tensor& vb = nodes_[n.in[1]].value;
      const Tensor& da = tan(n.in[0]);
      const Tensor& db = tan(n.in[1]);
      const std::size_t nn = va.nrows;
      const std::size_t m = va.ncols;
      const double w = 2.0 / (static_cast<double>(nn) * static_cast<double>(nn - 1));
      Tensor gradA(nn, m), gradB(nn, m);
      for (std::size_t r = 0; r < nn; ++r)
        for (std::size_t j = 0; j < nn; ++j) {
          if (j == r) continue;
          imq_grad(&va.data[r * m], &va.data[j * m], m, n.s0, w, &gradA.data[r * m]);
          imq_grad(&va.data[r * m], &vb.data[j * m], m, n.s0, -w, &gradA.data[r * m]);
          imq_grad(&vb.data[r * m], &vb.data[j * m], m, n.s0, w, &gradB.data[r * m]);
          imq_grad(&vb.data[r * m], &va.data[j * m], m, n.s0, -w, &gradB.data[r * m]);
        }
      double s = 0.0;
      for (std::size_t k = 0; k < gradA.size(); ++k)
        s += gradA.data[k] * da.data[k] + gradB.data[k] * db.data[k];
      return Tensor::scalar(s);
    }
  }
  throw NumericError("jvp: unhandled op");
}

Tensor jvp(const std::function<Tape::Id(Tape&, Tape::Id)>& f, const Tensor& point,
           const Tensor& direction) {
  Tape tape;
  const Tape::Id in = tape.leaf(point);
  const Tape::Id out = f(tape, in);
  auto tangents = tape.jvp({out}, in, direction);
  return tangents[0];
}

void adam_step(Tensor& params, const Tensor& grad, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (!params.same_shape(grad)) throw ConfigError("adam_step: gradient shape mismatch");
  if (state.t == 0) {
    state.m = Tensor(params.nrows, params.ncols);
    state.v = Tensor(params.nrows, params.ncols);
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m.data[k] = beta1 * state.m.data[k] + (1.0 - beta1) * grad.data[k];
    state.v.data[k] = beta2 * state.v.data[k] + (1.0 - beta2) * grad.data[k] * grad.data[k];
    const double mhat = state.m.data[k] / bc1;
    const double vhat = state.v.data[k] / bc2;
    params.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace gwae
