#include "timgen/numerics/tape.hpp"

#include <algorithm>
#include <cmath>

#include "timgen/errors.hpp"
#include "timgen/numerics/functions.hpp"

namespace timgen {

ParamId ParamStore::add(std::string name, Matrix init) {
  if (find(name)) throw InvalidArgument("ParamStore: duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return ParamId{static_cast<std::uint32_t>(values_.size() - 1)};
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return id(i);
  return std::nullopt;
}

std::size_t ParamStore::total_entries() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

Gradients::Gradients(const ParamStore& params) {
  grads_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params.value(params.id(i));
    grads_.emplace_back(v.rows(), v.cols());
  }
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void Gradients::scale(double factor) {
  for (auto& g : grads_)
    for (double& x : g.data()) x *= factor;
}

double Gradients::global_norm() const {
  double total = 0.0;
  for (const auto& g : grads_)
    for (double x : g.data()) total += x * x;
  return std::sqrt(total);
}

bool Gradients::all_finite() const {
  return std::all_of(grads_.begin(), grads_.end(), [](const Matrix& g) { return g.all_finite(); });
}

namespace ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(ParamId id) {
  if (params_ == nullptr) throw InvalidArgument("Tape: no parameter store attached");
  if (auto it = param_nodes_.find(id.index); it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.external = &params_->value(id);
  node.param = id.index;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  const auto index = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_.emplace(id.index, index);
  return Var(this, index);
}

const Matrix& Tape::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.value;
}

Matrix& Tape::ensure_grad(Node& node) {
  if (node.grad.empty()) {
    const Matrix& v = node.external != nullptr ? *node.external : node.value;
    node.grad = Matrix(v.rows(), v.cols());
  }
  return node.grad;
}

const Matrix& Tape::grad(std::uint32_t id) { return ensure_grad(nodes_[id]); }

Matrix* Tape::grad_sink(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  return &ensure_grad(n);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw InvalidArgument("Tape: operand belongs to another tape");
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var root, Gradients& out, double seed) {
  if (root.tape_ != this) throw InvalidArgument("Tape::backward: root from another tape");
  Node& r = nodes_[root.id_];
  if (value(root.id_).size() != 1) throw InvalidArgument("Tape::backward: root must be 1 x 1");
  if (!r.requires_grad) return;
  ensure_grad(r)[0] += seed;
  for (std::int64_t i = root.id_; i >= 0; --i) {
    const auto idx = static_cast<std::uint32_t>(i);
    if (nodes_[idx].grad.empty()) continue;
    if (nodes_[idx].param >= 0) {
      Matrix& target = out[ParamId{static_cast<std::uint32_t>(nodes_[idx].param)}];
      const Matrix& g = nodes_[idx].grad;
      for (std::size_t k = 0; k < g.size(); ++k) target[k] += g[k];
    } else if (nodes_[idx].backward) {
      nodes_[idx].backward(*this, idx);
    }
  }
}

// ---- operations -----------------------------------------------------------

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

void add_into(Matrix& dst, const Matrix& src, double factor = 1.0) {
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] += factor * src[k];
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.cols() == bv.rows(), "matmul: inner dimensions differ");
  Matrix out(av.rows(), bv.cols());
  matmul_acc(av, bv, out);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (Matrix* da = t.grad_sink(a.id())) matmul_nt_acc(g, t.value(b.id()), *da);
    if (Matrix* db = t.grad_sink(b.id())) matmul_tn_acc(t.value(a.id()), g, *db);
  });
}

Var matmul_nt(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.cols() == bv.cols(), "matmul_nt: inner dimensions differ");
  Matrix out(av.rows(), bv.rows());
  matmul_nt_acc(av, bv, out);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (Matrix* da = t.grad_sink(a.id())) matmul_acc(g, t.value(b.id()), *da);
    if (Matrix* db = t.grad_sink(b.id())) matmul_tn_acc(g, t.value(a.id()), *db);
  });
}

Var add(Var a, Var b) {
  require(a.value().same_shape(b.value()), "add: shape mismatch");
  Matrix out = a.value();
  add_into(out, b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (Matrix* da = t.grad_sink(a.id())) add_into(*da, g);
    if (Matrix* db = t.grad_sink(b.id())) add_into(*db, g);
  });
}

Var sub(Var a, Var b) {
  require(a.value().same_shape(b.value()), "sub: shape mismatch");
  Matrix out = a.value();
  add_into(out, b.value(), -1.0);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (Matrix* da = t.grad_sink(a.id())) add_into(*da, g);
    if (Matrix* db = t.grad_sink(b.id())) add_into(*db, g, -1.0);
  });
}

Var mul(Var a, Var b) {
  require(a.value().same_shape(b.value()), "mul: shape mismatch");
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& bv = t.value(b.id());
      for (std::size_t k = 0; k < g.size(); ++k) (*da)[k] += g[k] * bv[k];
    }
    if (Matrix* db = t.grad_sink(b.id())) {
      const Matrix& av = t.value(a.id());
      for (std::size_t k = 0; k < g.size(); ++k) (*db)[k] += g[k] * av[k];
    }
  });
}

Var scale(Var a, double factor) {
  Matrix out = a.value();
  for (double& x : out.data()) x *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) add_into(*da, t.grad(self), factor);
  });
}

Var add_scalar(Var a, double c) {
  Matrix out = a.value();
  for (double& x : out.data()) x += c;
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) add_into(*da, t.grad(self));
  });
}

Var add_row(Var a, Var bias) {
  const Matrix& bv = bias.value();
  require(bv.rows() == 1 && bv.cols() == a.value().cols(), "add_row: bias must be 1 x cols");
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  return a.tape().record(std::move(out), {a, bias}, [a, bias](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (Matrix* da = t.grad_sink(a.id())) add_into(*da, g);
    if (Matrix* db = t.grad_sink(bias.id())) {
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*db)[c] += g(r, c);
    }
  });
}

Var scale_rows(Var a, Var column) {
  const Matrix& cv = column.value();
  require(cv.cols() == 1 && cv.rows() == a.value().rows(), "scale_rows: need n x 1 scales");
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& x : out.row(r)) x *= cv[r];
  return a.tape().record(std::move(out), {a, column}, [a, column](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& cv = t.value(column.id());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*da)(r, c) += g(r, c) * cv[r];
    }
    if (Matrix* dc = t.grad_sink(column.id())) {
      const Matrix& av = t.value(a.id());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * av(r, c);
        (*dc)[r] += s;
      }
    }
  });
}

Var tanh(Var a) {
  Matrix out = a.value();
  for (double& x : out.data()) x = std::tanh(x);
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      const Matrix& y = t.value(self);
      for (std::size_t k = 0; k < g.size(); ++k) (*da)[k] += g[k] * (1.0 - y[k] * y[k]);
    }
  });
}

Var softplus(Var a) {
  Matrix out = a.value();
  for (double& x : out.data()) x = timgen::softplus(x);
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      const Matrix& x = t.value(a.id());
      for (std::size_t k = 0; k < g.size(); ++k) (*da)[k] += g[k] * sigmoid(x[k]);
    }
  });
}

Var clamp_min(Var a, double floor) {
  Matrix out = a.value();
  for (double& x : out.data()) x = std::max(x, floor);
  return a.tape().record(std::move(out), {a}, [a, floor](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      const Matrix& x = t.value(a.id());
      for (std::size_t k = 0; k < g.size(); ++k)
        if (x[k] > floor) (*da)[k] += g[k];
    }
  });
}

Var log_clamped(Var a, double floor) {
  Matrix out = a.value();
  for (double& x : out.data()) x = std::log(std::max(x, floor));
  return a.tape().record(std::move(out), {a}, [a, floor](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      const Matrix& x = t.value(a.id());
      for (std::size_t k = 0; k < g.size(); ++k)
        if (x[k] > floor) (*da)[k] += g[k] / x[k];
    }
  });
}

namespace {

// dx_j = p_j (g_j - sum_k g_k p_k), restricted to the row's support.
void softmax_backward_row(std::span<const double> p, std::span<const double> g,
                          std::span<double> dx) {
  double dot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) dot += g[k] * p[k];
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] != 0.0) dx[k] += p[k] * (g[k] - dot);
}

Var softmax_with_support(Var a, const std::vector<std::vector<bool>>* mask, bool causal) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  std::vector<double> scores;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    scores.clear();
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const bool visible = mask != nullptr ? (*mask)[r][c] : (!causal || c <= r);
      if (visible) scores.push_back(x(r, c));
    }
    if (scores.empty()) throw InvalidArgument("softmax_rows: row with no visible entries");
    const auto probs = timgen::softmax(scores);
    std::size_t k = 0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const bool visible = mask != nullptr ? (*mask)[r][c] : (!causal || c <= r);
      if (visible) out(r, c) = probs[k++];
    }
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      const Matrix& p = t.value(self);
      for (std::size_t r = 0; r < p.rows(); ++r) softmax_backward_row(p.row(r), g.row(r), da->row(r));
    }
  });
}

}  // namespace

Var softmax_rows(Var a, bool causal) { return softmax_with_support(a, nullptr, causal); }

Var masked_softmax_rows(Var a, const std::vector<std::vector<bool>>& mask) {
  require(mask.size() == a.value().rows(), "masked_softmax_rows: mask row count");
  for (const auto& row : mask) require(row.size() == a.value().cols(), "masked_softmax_rows: mask width");
  return softmax_with_support(a, &mask, false);
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  const Matrix& x = a.value();
  const std::size_t n = x.cols();
  require(gain.value().size() == n && bias.value().size() == n, "layer_norm: gain/bias width");
  Matrix normalized(x.rows(), n);
  std::vector<double> inv_std(x.rows());
  Matrix out(x.rows(), n);
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (double v : x.row(r)) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x.row(r)) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      normalized(r, c) = (x(r, c) - mean) * inv_std[r];
      out(r, c) = normalized(r, c) * gv[c] + bv[c];
    }
  }
  return a.tape().record(
      std::move(out), {a, gain, bias},
      [a, gain, bias, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& t, std::uint32_t self) {
        const Matrix& g = t.grad(self);
        const std::size_t n = g.cols();
        if (Matrix* dg = t.grad_sink(gain.id()))
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < n; ++c) (*dg)[c] += g(r, c) * normalized(r, c);
        if (Matrix* db = t.grad_sink(bias.id()))
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < n; ++c) (*db)[c] += g(r, c);
        if (Matrix* da = t.grad_sink(a.id())) {
          const Matrix& gv = t.value(gain.id());
          std::vector<double> gy(n);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            double mean_gy = 0.0, mean_gy_xhat = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              gy[c] = g(r, c) * gv[c];
              mean_gy += gy[c];
              mean_gy_xhat += gy[c] * normalized(r, c);
            }
            mean_gy /= static_cast<double>(n);
            mean_gy_xhat /= static_cast<double>(n);
            for (std::size_t c = 0; c < n; ++c)
              (*da)(r, c) += inv_std[r] * (gy[c] - mean_gy - normalized(r, c) * mean_gy_xhat);
          }
        }
      });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no operands");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.value().rows() == rows, "concat_cols: row count mismatch");
    cols += p.value().cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t w = t.value(p.id()).cols();
      if (Matrix* dp = t.grad_sink(p.id()))
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) (*dp)(r, c) += g(r, offset + c);
      offset += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no operands");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.value().cols() == cols, "concat_rows: column count mismatch");
    rows += p.value().rows();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset * cols));
    offset += v.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t h = t.value(p.id()).rows();
      if (Matrix* dp = t.grad_sink(p.id()))
        for (std::size_t k = 0; k < dp->size(); ++k) (*dp)[k] += g[offset * g.cols() + k];
      offset += h;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  require(begin + count <= x.cols(), "slice_cols: out of range");
  Matrix out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x(r, begin + c);
  return a.tape().record(std::move(out), {a}, [a, begin](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*da)(r, begin + c) += g(r, c);
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Matrix out = a.value().row_block(begin, count);
  return a.tape().record(std::move(out), {a}, [a, begin](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      for (std::size_t k = 0; k < g.size(); ++k) (*da)[begin * g.cols() + k] += g[k];
    }
  });
}

Var gather_rows(Var a, std::span<const std::int64_t> indices) {
  const Matrix& x = a.value();
  Matrix out(indices.size(), x.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0) continue;
    require(static_cast<std::size_t>(indices[r]) < x.rows(), "gather_rows: index out of range");
    auto src = x.row(static_cast<std::size_t>(indices[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  return a.tape().record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0) continue;
        auto dst = da->row(static_cast<std::size_t>(idx[r]));
        auto src = g.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  });
}

Var row_sums(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (double v : x.row(r)) out[r] += v;
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      for (std::size_t r = 0; r < da->rows(); ++r)
        for (double& v : da->row(r)) v += g[r];
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.tape().record(Matrix(1, 1, total), {a}, [a](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const double g = t.grad(self)[0];
      for (double& v : da->data()) v += g;
    }
  });
}

Var prefix_means(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  std::vector<double> column;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    column.clear();
    for (std::size_t t = 0; t < x.rows(); ++t) {
      column.insert(std::upper_bound(column.begin(), column.end(), x(t, c)), x(t, c));
      double total = 0.0;
      for (double v : column) total += v;
      out(t, c) = total / static_cast<double>(t + 1);
    }
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::uint32_t self) {
    if (Matrix* da = t.grad_sink(a.id())) {
      const Matrix& g = t.grad(self);
      // Row r feeds every prefix mean at or after r with weight 1 / (p + 1).
      std::vector<double> acc(g.cols(), 0.0);
      for (std::size_t p = g.rows(); p-- > 0;) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
          acc[c] += g(p, c) / static_cast<double>(p + 1);
          (*da)(p, c) += acc[c];
        }
      }
    }
  });
}

}  // namespace ad
}  // namespace timgen
