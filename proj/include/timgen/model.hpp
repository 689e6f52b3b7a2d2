#pragma once

#include <span>
#include <string>
#include <vector>

#include "timgen/config.hpp"
#include "timgen/encoding.hpp"
#include "timgen/fusion.hpp"
#include "timgen/generation.hpp"
#include "timgen/temporal.hpp"

namespace timgen {

/// Every trainable tensor, registered in a fixed order.
struct ModelParams {
  ParamStore store;
  EncodingParams encoding;
  TransformerParams transformer;
  FusionParams fusion;
  VaeParams vae;

  static ModelParams create(const ModelConfig& cfg, std::uint64_t seed);
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_.store; }
  ParamStore& params() { return params_.store; }
  const ModelParams& layout() const { return params_; }

  /// Replaces every parameter value from `store`, matched by name. Throws
  /// CheckpointManifestError on a missing tensor or shape mismatch.
  void assign(const ParamStore& store);

 private:
  ModelConfig cfg_;
  ModelParams params_;
};

/// A user sequence with its supervised targets. Target j is predicted from the
/// prefix 0..j-1 with interaction j as the candidate; a length-1 sequence
/// predicts its only interaction from itself.
struct Example {
  std::string user_id;
  std::vector<std::string> item_ids;
  PreparedSequence seq;
  std::vector<std::size_t> targets;
  Matrix candidates;  ///< one candidate feature row per target
  std::vector<double> score_labels;
  std::vector<std::int64_t> class_labels;

  std::size_t cutoff(std::size_t target_index) const {
    const auto j = targets[target_index];
    return j == 0 ? 0 : j - 1;
  }
};

/// Throws ValidationError when a class label is outside [0, n_classes).
Example make_example(std::span<const Interaction> history, const ModelConfig& cfg, TargetMode mode);

struct ForwardPass {
  ad::Var z;        ///< temporal (or pooled) interest at each cutoff
  CutoffFusion fusion;
  ad::Var z_final;
  LatentGaussian latent;
  ad::Var candidates;
};

/// Interest pipeline up to the latent Gaussian for the given cutoffs.
ForwardPass forward_interest(ad::Tape& tape, const Model& model, const PreparedSequence& seq,
                             std::span<const std::size_t> cutoffs, const Matrix& candidates);

/// Temporal states z_1..z_T for a full history (T x d_model).
Matrix interest_states(const Model& model, std::span<const Interaction> history);

/// Order-invariant pooled states used by the static baseline (T x d_model):
/// row t is the mean of the projected rows 0..t.
Matrix static_states(const Model& model, const Matrix& encoded);

struct Generation {
  GeneratedOutput output;
  ModalityWeights alpha{};
  std::vector<double> z_final;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> latent;
};

/// Generates for `candidate` conditioned on the whole history. `rng` null
/// means eps = 0 (deterministic inference).
Generation generate(const Model& model, std::span<const Interaction> history,
                    std::span<const double> candidate, Rng* rng = nullptr);

}  // namespace timgen
