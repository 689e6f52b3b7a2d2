#include "timgen/generation.hpp"

#include "timgen/errors.hpp"
#include "timgen/numerics/functions.hpp"
#include "timgen/temporal.hpp"

namespace timgen {

void GenerationConfig::validate() const {
  if (d_latent == 0 || d_hidden == 0) throw InvalidArgument("generation config: dims must be positive");
  if (n_classes == 0) throw InvalidArgument("generation config: need at least one class");
  if (!(sigma_floor > 0.0)) throw InvalidArgument("generation config: sigma_floor must be positive");
}

VaeParams VaeParams::create(ParamStore& store, std::size_t d_model, std::size_t d_cand,
                            const GenerationConfig& cfg, Rng& rng) {
  cfg.validate();
  VaeParams p;
  p.w_mu = store.add("vae.mu.w", init_weight(d_model, cfg.d_latent, rng));
  p.b_mu = store.add("vae.mu.b", Matrix(1, cfg.d_latent));
  p.w_sigma = store.add("vae.sigma.w", init_weight(d_model, cfg.d_latent, rng));
  p.b_sigma = store.add("vae.sigma.b", Matrix(1, cfg.d_latent));
  p.dec_w = store.add("dec.hidden.w", init_weight(cfg.d_latent + d_cand, cfg.d_hidden, rng));
  p.dec_b = store.add("dec.hidden.b", Matrix(1, cfg.d_hidden));
  p.content_w = store.add("dec.content.w", init_weight(cfg.d_hidden, d_cand, rng));
  p.content_b = store.add("dec.content.b", Matrix(1, d_cand));
  p.score_w = store.add("dec.score.w", init_weight(cfg.d_hidden, 1, rng));
  p.score_b = store.add("dec.score.b", Matrix(1, 1));
  p.class_w = store.add("dec.class.w", init_weight(cfg.d_hidden, cfg.n_classes, rng));
  p.class_b = store.add("dec.class.b", Matrix(1, cfg.n_classes));
  return p;
}

LatentGaussian encode_latent(ad::Tape& tape, ad::Var z_final, const VaeParams& p,
                             const GenerationConfig& cfg) {
  ad::Var mu = ad::add_row(ad::matmul(z_final, tape.param(p.w_mu)), tape.param(p.b_mu));
  ad::Var pre = ad::add_row(ad::matmul(z_final, tape.param(p.w_sigma)), tape.param(p.b_sigma));
  return {mu, ad::clamp_min(ad::softplus(pre), cfg.sigma_floor)};
}

ad::Var reparameterize(ad::Tape& tape, const LatentGaussian& q, const Matrix& eps) {
  return ad::add(q.mu, ad::mul(q.sigma, tape.constant(eps)));
}

DecodedOutput decode(ad::Tape& tape, ad::Var latent, ad::Var candidate, const VaeParams& p) {
  const Matrix& w = tape.value(tape.param(p.dec_w).id());
  if (latent.rows() != candidate.rows() || latent.cols() + candidate.cols() != w.rows()) {
    throw InvalidArgument("decode: latent/candidate dimensions do not match the decoder");
  }
  ad::Var hidden = ad::tanh(ad::add_row(ad::matmul(ad::concat_cols({latent, candidate}), tape.param(p.dec_w)),
                                        tape.param(p.dec_b)));
  DecodedOutput out;
  out.content = ad::add_row(ad::matmul(hidden, tape.param(p.content_w)), tape.param(p.content_b));
  out.score = ad::add_row(ad::matmul(hidden, tape.param(p.score_w)), tape.param(p.score_b));
  out.logits = ad::add_row(ad::matmul(hidden, tape.param(p.class_w)), tape.param(p.class_b));
  out.probs = ad::softmax_rows(out.logits);
  return out;
}

std::pair<std::vector<double>, std::vector<double>> encode_latent(std::span<const double> z_final,
                                                                  const ParamStore& store,
                                                                  const VaeParams& p,
                                                                  const GenerationConfig& cfg) {
  if (store.value(p.w_mu).rows() != z_final.size()) throw InvalidArgument("encode_latent: width mismatch");
  ad::Tape tape(&store);
  auto q = encode_latent(tape, tape.constant(Matrix::row_vector(z_final)), p, cfg);
  return {q.mu.value().row_copy(0), q.sigma.value().row_copy(0)};
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> eps) {
  if (mu.size() != sigma.size() || mu.size() != eps.size()) {
    throw InvalidArgument("reparameterize: length mismatch");
  }
  std::vector<double> out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] = mu[i] + sigma[i] * eps[i];
  return out;
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   Rng& rng) {
  if (mu.empty()) return {};
  return reparameterize(mu, sigma, sample_standard_normal(rng, mu.size()));
}

GeneratedOutput decode(std::span<const double> latent, std::span<const double> candidate,
                       const ParamStore& store, const VaeParams& p) {
  ad::Tape tape(&store);
  auto out = decode(tape, tape.constant(Matrix::row_vector(latent)),
                    tape.constant(Matrix::row_vector(candidate)), p);
  return {out.content.value().row_copy(0), out.score.value()[0], out.logits.value().row_copy(0),
          out.probs.value().row_copy(0)};
}

double vae_loss(const GeneratedOutput& output, std::span<const double> target_content,
                std::span<const double> mu, std::span<const double> sigma) {
  if (output.content.size() != target_content.size()) throw InvalidArgument("vae_loss: content width mismatch");
  double recon = 0.0;
  for (std::size_t i = 0; i < target_content.size(); ++i) {
    const double d = output.content[i] - target_content[i];
    recon += d * d;
  }
  return recon + kl_diag_gaussian(mu, sigma);
}

}  // namespace timgen
