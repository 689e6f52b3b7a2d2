#include "timgen/temporal.hpp"

#include <cmath>

#include "timgen/errors.hpp"

namespace timgen {

void TransformerConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0) {
    throw InvalidArgument("transformer config: dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw InvalidArgument("transformer config: d_model % n_heads != 0");
}

Matrix init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-bound, bound);
  return m;
}

TransformerParams TransformerParams::create(ParamStore& store, std::size_t input_dim,
                                            const TransformerConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  TransformerParams p;
  p.in_w = store.add("tf.in.w", init_weight(input_dim, d, rng));
  p.in_b = store.add("tf.in.b", Matrix(1, d));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string prefix = "tf.layer" + std::to_string(l) + ".";
    TransformerLayerParams layer;
    layer.ln1_gain = store.add(prefix + "ln1.gain", Matrix(1, d, 1.0));
    layer.ln1_bias = store.add(prefix + "ln1.bias", Matrix(1, d));
    layer.w_query = store.add(prefix + "attn.wq", init_weight(d, d, rng));
    layer.w_key = store.add(prefix + "attn.wk", init_weight(d, d, rng));
    layer.w_value = store.add(prefix + "attn.wv", init_weight(d, d, rng));
    layer.w_out = store.add(prefix + "attn.wo", init_weight(d, d, rng));
    layer.b_out = store.add(prefix + "attn.bo", Matrix(1, d));
    layer.ln2_gain = store.add(prefix + "ln2.gain", Matrix(1, d, 1.0));
    layer.ln2_bias = store.add(prefix + "ln2.bias", Matrix(1, d));
    layer.ff1_w = store.add(prefix + "ff1.w", init_weight(d, cfg.d_ff, rng));
    layer.ff1_b = store.add(prefix + "ff1.b", Matrix(1, cfg.d_ff));
    layer.ff2_w = store.add(prefix + "ff2.w", init_weight(cfg.d_ff, d, rng));
    layer.ff2_b = store.add(prefix + "ff2.b", Matrix(1, d));
    p.layers.push_back(layer);
  }
  p.final_gain = store.add("tf.final.gain", Matrix(1, d, 1.0));
  p.final_bias = store.add("tf.final.bias", Matrix(1, d));
  return p;
}

ad::Var scaled_dot_attention(ad::Var q, ad::Var k, ad::Var v, bool causal) {
  const auto n = q.rows();
  if (q.cols() == 0) throw InvalidArgument("attention: d_k must be at least 1");
  if (k.rows() != n || v.rows() != n || k.cols() != q.cols()) {
    throw InvalidArgument("attention: Q, K, V shapes do not conform");
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  auto weights = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt_dk), causal);
  return ad::matmul(weights, v);
}

Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v, bool causal) {
  ad::Tape tape;
  return scaled_dot_attention(tape.constant(q), tape.constant(k), tape.constant(v), causal).value();
}

Matrix attention_weights(const Matrix& q, const Matrix& k, bool causal) {
  if (q.cols() == 0 || q.cols() != k.cols() || q.rows() != k.rows()) {
    throw InvalidArgument("attention: Q, K shapes do not conform");
  }
  ad::Tape tape;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return ad::softmax_rows(ad::scale(ad::matmul_nt(tape.constant(q), tape.constant(k)), inv_sqrt_dk),
                          causal)
      .value();
}

ad::Var project_input(ad::Tape& tape, ad::Var x, const TransformerParams& p) {
  return ad::add_row(ad::matmul(x, tape.param(p.in_w)), tape.param(p.in_b));
}

Matrix position_table(std::size_t rows, std::size_t dim) {
  Matrix out(rows, dim);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double freq = std::pow(10000.0, -static_cast<double>(c - c % 2) / static_cast<double>(dim));
      out(t, c) = c % 2 == 0 ? std::sin(static_cast<double>(t) * freq) : std::cos(static_cast<double>(t) * freq);
    }
  }
  return out;
}

ad::Var transformer_forward(ad::Tape& tape, ad::Var x, const TransformerParams& p,
                            const TransformerConfig& cfg) {
  if (x.rows() == 0) throw InvalidArgument("transformer_forward: empty sequence");
  const std::size_t dk = cfg.head_dim();
  ad::Var h = project_input(tape, x, p);
  if (cfg.positional == PositionalMode::Extra) {
    h = ad::add(h, tape.constant(position_table(x.rows(), cfg.d_model)));
  }
  for (const auto& layer : p.layers) {
    ad::Var normed = ad::layer_norm(h, tape.param(layer.ln1_gain), tape.param(layer.ln1_bias));
    ad::Var q = ad::matmul(normed, tape.param(layer.w_query));
    ad::Var k = ad::matmul(normed, tape.param(layer.w_key));
    ad::Var v = ad::matmul(normed, tape.param(layer.w_value));
    std::vector<ad::Var> heads;
    heads.reserve(cfg.n_heads);
    for (std::size_t head = 0; head < cfg.n_heads; ++head) {
      heads.push_back(scaled_dot_attention(ad::slice_cols(q, head * dk, dk),
                                           ad::slice_cols(k, head * dk, dk),
                                           ad::slice_cols(v, head * dk, dk), /*causal=*/true));
    }
    ad::Var attended = heads.size() == 1 ? heads[0] : ad::concat_cols(heads);
    attended = ad::add_row(ad::matmul(attended, tape.param(layer.w_out)), tape.param(layer.b_out));
    h = ad::add(h, attended);

    normed = ad::layer_norm(h, tape.param(layer.ln2_gain), tape.param(layer.ln2_bias));
    ad::Var ff = ad::tanh(ad::add_row(ad::matmul(normed, tape.param(layer.ff1_w)), tape.param(layer.ff1_b)));
    ff = ad::add_row(ad::matmul(ff, tape.param(layer.ff2_w)), tape.param(layer.ff2_b));
    h = ad::add(h, ff);
  }
  return ad::layer_norm(h, tape.param(p.final_gain), tape.param(p.final_bias));
}

Matrix transformer_forward(const Matrix& x, const ParamStore& store, const TransformerParams& p,
                           const TransformerConfig& cfg) {
  ad::Tape tape(&store);
  return transformer_forward(tape, tape.constant(x), p, cfg).value();
}

std::vector<double> last_state(const Matrix& states) {
  if (states.rows() == 0) throw InvalidArgument("last_state: no states");
  return states.row_copy(states.rows() - 1);
}

}  // namespace timgen
