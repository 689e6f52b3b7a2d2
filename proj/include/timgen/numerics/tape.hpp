#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "timgen/numerics/matrix.hpp"

namespace timgen {

struct ParamId {
  std::uint32_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// Named trainable tensors in registration order.
class ParamStore {
 public:
  ParamId add(std::string name, Matrix init);

  const Matrix& value(ParamId id) const { return values_.at(id.index); }
  Matrix& value(ParamId id) { return values_.at(id.index); }
  const std::string& name(ParamId id) const { return names_.at(id.index); }
  std::optional<ParamId> find(std::string_view name) const;

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t total_entries() const noexcept;
  ParamId id(std::size_t i) const { return ParamId{static_cast<std::uint32_t>(i)}; }

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

/// One gradient buffer per parameter, shaped like the parameter.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& params);

  Matrix& operator[](ParamId id) { return grads_.at(id.index); }
  const Matrix& operator[](ParamId id) const { return grads_.at(id.index); }
  std::size_t size() const noexcept { return grads_.size(); }

  void zero();
  void scale(double factor);
  double global_norm() const;
  bool all_finite() const;

 private:
  std::vector<Matrix> grads_;
};

namespace ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode gradient tape. Operations append nodes in evaluation order;
/// backward() walks them in reverse and accumulates parameter gradients.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(const ParamStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf for a parameter. Repeated calls return the same node.
  Var param(ParamId id);

  const Matrix& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(root) = seed (root must be 1x1) and accumulates into `out`.
  /// Parameters not reached from root receive nothing.
  void backward(Var root, Gradients& out, double seed = 1.0);

  /// Appends an op node. `fn` is skipped when no input requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);

  /// Gradient of a node during backward (zeros if nothing flowed in yet).
  const Matrix& grad(std::uint32_t id);
  /// Mutable accumulator for an input's gradient, or nullptr if it needs none.
  Matrix* grad_sink(std::uint32_t id);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    BackwardFn backward;
    std::int64_t param = -1;
    bool requires_grad = false;
  };

  Matrix& ensure_grad(Node& node);

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint32_t, std::uint32_t> param_nodes_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
/// A * B^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
/// Adds the 1 x n row `bias` to every row of `a`.
Var add_row(Var a, Var bias);
/// Multiplies row i of `a` by the scalar `column(i, 0)`.
Var scale_rows(Var a, Var column);
Var tanh(Var a);
Var softplus(Var a);
/// Elementwise max(a, floor); gradient passes only where a > floor.
Var clamp_min(Var a, double floor);
/// ln(max(a, floor)); gradient passes only where a > floor.
Var log_clamped(Var a, double floor);
/// Row-wise softmax. With `causal`, entry (i, j) for j > i is excluded (weight 0).
Var softmax_rows(Var a, bool causal = false);
/// Row-wise softmax restricted to entries where mask(i, j) != 0; others are
/// exactly 0. Each row needs at least one unmasked entry.
Var masked_softmax_rows(Var a, const std::vector<std::vector<bool>>& mask);
/// (x - mean) / sqrt(var + eps) * gain + bias, per row; gain and bias are 1 x n.
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// Row r of the result is a.row(indices[r]); a negative index yields a zero row.
Var gather_rows(Var a, std::span<const std::int64_t> indices);
/// n x 1 column of per-row sums.
Var row_sums(Var a);
/// 1 x 1 sum of all entries.
Var sum(Var a);
/// Row t is the mean of rows 0..t. Each column is summed in sorted order so the
/// result does not depend on the order of the rows being averaged.
Var prefix_means(Var a);

}  // namespace ad
}  // namespace timgen
