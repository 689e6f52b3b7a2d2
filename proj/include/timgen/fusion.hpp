#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "timgen/encoding.hpp"
#include "timgen/modality.hpp"
#include "timgen/numerics/tape.hpp"

namespace timgen {

struct ModalityFusionParams {
  ParamId proj_w, proj_b;  ///< raw modality features -> d_model
  ParamId w_query, w_key, w_value;
  ParamId scorer;  ///< d_model x 1, the w_m of the weighting softmax
};

struct FusionParams {
  std::array<ModalityFusionParams, kModalityCount> modality;
  ParamId final_w;  ///< (2 d_model) x d_model, applied to [z ; z_multi]

  static FusionParams create(ParamStore& store, const ModalityDims& dims, std::size_t d_model,
                             Rng& rng);
};

using ModalityVectors = std::array<std::optional<std::vector<double>>, kModalityCount>;
using ModalityWeights = std::array<double, kModalityCount>;

struct FusedInterest {
  std::vector<double> z_multi;
  ModalityWeights alpha{};  ///< exactly 0 for absent modalities
  std::vector<double> z_final;
};

/// Causal self-attention over one modality's projected time series (n x d_m raw
/// rows). Row i of the result is the modality context as of its i-th present step.
ad::Var modality_attention(ad::Tape& tape, ad::Var raw, const ModalityFusionParams& p);

/// h_m: the last row of modality_attention over `raw` (t x d_m, t >= 1).
std::vector<double> modality_context(const Matrix& raw, ModalityKind kind, const ParamStore& store,
                                     const FusionParams& p);

/// w_m^T h_m for each present modality.
std::array<std::optional<double>, kModalityCount> modality_scores(const ModalityVectors& h,
                                                                  const ParamStore& store,
                                                                  const FusionParams& p);

/// Softmax of the scores over present modalities only; absent ones get 0.
/// Throws InvalidArgument when nothing is present.
ModalityWeights weights_from_scores(const std::array<std::optional<double>, kModalityCount>& scores);
ModalityWeights modality_weights(const ModalityVectors& h, const ParamStore& store,
                                 const FusionParams& p);

/// sum_m alpha_m h_m over present modalities.
std::vector<double> fuse_multi(const ModalityVectors& h, const ModalityWeights& alpha);

/// W [z ; z_multi]. Throws InvalidArgument on a width mismatch.
std::vector<double> fuse_final(std::span<const double> z, std::span<const double> z_multi,
                               const ParamStore& store, const FusionParams& p);
ad::Var fuse_final(ad::Tape& tape, ad::Var z, ad::Var z_multi, const FusionParams& p);

/// Batched multimodal interest at several cutoffs of one sequence.
struct CutoffFusion {
  ad::Var z_multi;                     ///< cutoffs x d_model
  std::vector<ModalityWeights> alpha;  ///< one per cutoff
};

/// For every cutoff c (row index into `seq`), attends over each modality's
/// present steps 0..c and mixes the resulting contexts with learned weights.
/// Each cutoff must have at least one modality present at or before it.
CutoffFusion fuse_at_cutoffs(ad::Tape& tape, const PreparedSequence& seq,
                             std::span<const std::size_t> cutoffs, const FusionParams& p,
                             std::size_t d_model);

}  // namespace timgen
