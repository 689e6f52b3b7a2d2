#pragma once

#include <cstddef>
#include <vector>

#include "timgen/numerics/matrix.hpp"
#include "timgen/numerics/rng.hpp"
#include "timgen/numerics/tape.hpp"

namespace timgen {

enum class PositionalMode { None, Extra };

struct TransformerConfig {
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  std::size_t d_ff = 64;
  /// Extra adds index-based sinusoidal positions after the input projection.
  PositionalMode positional = PositionalMode::None;

  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }
};

struct TransformerLayerParams {
  ParamId ln1_gain, ln1_bias;
  ParamId w_query, w_key, w_value, w_out, b_out;
  ParamId ln2_gain, ln2_bias;
  ParamId ff1_w, ff1_b, ff2_w, ff2_b;
};

struct TransformerParams {
  ParamId in_w, in_b;
  std::vector<TransformerLayerParams> layers;
  ParamId final_gain, final_bias;

  static TransformerParams create(ParamStore& store, std::size_t input_dim,
                                  const TransformerConfig& cfg, Rng& rng);
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, as used by every layer.
Matrix init_weight(std::size_t rows, std::size_t cols, Rng& rng);

/// softmax(Q K^T / sqrt(d_k)) V. With `causal`, row i only sees rows <= i.
ad::Var scaled_dot_attention(ad::Var q, ad::Var k, ad::Var v, bool causal);
Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v, bool causal);
/// The attention weight matrix alone.
Matrix attention_weights(const Matrix& q, const Matrix& k, bool causal);

/// X W_in + b_in.
ad::Var project_input(ad::Tape& tape, ad::Var x, const TransformerParams& p);

/// Causal pre-norm Transformer over rows of `x` (T x D). Returns T x d_model
/// interest states; row t depends only on rows 0..t.
ad::Var transformer_forward(ad::Tape& tape, ad::Var x, const TransformerParams& p,
                            const TransformerConfig& cfg);
Matrix transformer_forward(const Matrix& x, const ParamStore& store, const TransformerParams& p,
                           const TransformerConfig& cfg);

std::vector<double> last_state(const Matrix& states);

/// Standard sinusoidal position table, rows x dim.
Matrix position_table(std::size_t rows, std::size_t dim);

}  // namespace timgen
