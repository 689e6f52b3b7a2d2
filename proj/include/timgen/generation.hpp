#pragma once

#include <span>
#include <utility>
#include <vector>

#include "timgen/numerics/rng.hpp"
#include "timgen/numerics/tape.hpp"

namespace timgen {

struct GenerationConfig {
  std::size_t d_latent = 16;
  std::size_t d_hidden = 64;
  std::size_t n_classes = 4;
  /// Lower clamp applied to sigma after softplus.
  double sigma_floor = 1e-6;

  void validate() const;
};

struct VaeParams {
  ParamId w_mu, b_mu;
  ParamId w_sigma, b_sigma;
  ParamId dec_w, dec_b;  ///< (d_latent + d_cand) -> d_hidden, tanh
  ParamId content_w, content_b;
  ParamId score_w, score_b;
  ParamId class_w, class_b;

  static VaeParams create(ParamStore& store, std::size_t d_model, std::size_t d_cand,
                          const GenerationConfig& cfg, Rng& rng);
};

struct GeneratedOutput {
  std::vector<double> content;
  double score = 0.0;
  std::vector<double> class_logits;
  std::vector<double> class_probs;
};

// ---- tape form, rows are independent examples -------------------------------

struct LatentGaussian {
  ad::Var mu;
  ad::Var sigma;
};

struct DecodedOutput {
  ad::Var content;  ///< n x d_cand
  ad::Var score;    ///< n x 1
  ad::Var logits;   ///< n x K
  ad::Var probs;    ///< n x K
};

LatentGaussian encode_latent(ad::Tape& tape, ad::Var z_final, const VaeParams& p,
                             const GenerationConfig& cfg);
/// mu + sigma (.) eps, with eps fixed (a constant on the tape).
ad::Var reparameterize(ad::Tape& tape, const LatentGaussian& q, const Matrix& eps);
DecodedOutput decode(ad::Tape& tape, ad::Var latent, ad::Var candidate, const VaeParams& p);

// ---- single-vector form -------------------------------------------------------

std::pair<std::vector<double>, std::vector<double>> encode_latent(std::span<const double> z_final,
                                                                  const ParamStore& store,
                                                                  const VaeParams& p,
                                                                  const GenerationConfig& cfg);
/// l = mu + sigma (.) eps with eps ~ N(0, I) drawn from `rng`.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   Rng& rng);
/// Deterministic variant with caller-supplied eps (all zeros gives mu exactly).
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> eps);
GeneratedOutput decode(std::span<const double> latent, std::span<const double> candidate,
                       const ParamStore& store, const VaeParams& p);

/// Negative ELBO: ||content - target||^2 + KL(N(mu, sigma^2) || N(0, I)).
double vae_loss(const GeneratedOutput& output, std::span<const double> target_content,
                std::span<const double> mu, std::span<const double> sigma);

}  // namespace timgen
