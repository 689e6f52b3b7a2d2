#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "timgen/config.hpp"
#include "timgen/model.hpp"

namespace timgen {

struct LossComponents {
  double total = 0.0;
  double vae = 0.0;    ///< recon + kl
  double recon = 0.0;
  double kl = 0.0;
  double score = 0.0;
  double class_ce = 0.0;
};

struct CandidateItem {
  std::string item_id;
  std::vector<double> features;
  double score_label = 0.0;
  std::int64_t class_label = 0;
};

/// L_VAE + lambda_score * L_score + lambda_class * L_class for one output.
LossComponents joint_loss(const GeneratedOutput& output, const CandidateItem& target,
                          std::span<const double> mu, std::span<const double> sigma,
                          const TrainConfig& cfg);

/// Summed loss over every target of one example, recorded on a tape.
struct ExampleLoss {
  ad::Var total;          ///< 1 x 1, sum over targets (and mean over eps samples)
  LossComponents sums;    ///< component sums over targets
  std::size_t count = 0;  ///< number of targets
};

/// `eps` holds one (targets x d_latent) matrix per VAE sample.
ExampleLoss example_loss(ad::Tape& tape, const Model& model, const Example& ex,
                         std::span<const Matrix> eps, const TrainConfig& cfg);

/// Per-parameter Adam / plain gradient-descent state.
class Optimizer {
 public:
  Optimizer(const ParamStore& params, const TrainConfig& cfg);
  void apply(ParamStore& params, const Gradients& grads);

 private:
  TrainConfig cfg_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::uint64_t steps_ = 0;
};

struct StepResult {
  LossComponents mean;  ///< averaged over all targets in the batch
  std::size_t targets = 0;
  double grad_norm = 0.0;  ///< before clipping
};

/// Forward, mean loss over the batch, backward, clip, one optimizer update.
/// Throws NumericalError naming the offending user on a non-finite loss.
StepResult train_step(Model& model, Optimizer& opt, std::span<const Example* const> batch,
                      const TrainConfig& cfg, Rng& rng);

/// Gradient of the mean batch loss (no update). Exposed for checks.
Gradients batch_gradients(const Model& model, std::span<const Example* const> batch,
                          const TrainConfig& cfg, Rng& rng, StepResult* result = nullptr);

struct EpochLog {
  std::size_t epoch = 0;
  LossComponents mean;  ///< target-weighted mean over the epoch
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Shuffled mini-batch training for cfg.epochs epochs.
std::vector<EpochLog> fit(Model& model, std::span<const Example> train, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {});

struct StepPrediction {
  std::string user_id;
  std::size_t step = 0;  ///< index of the predicted interaction in the sequence
  std::int64_t predicted_class = 0;
  std::int64_t label_class = 0;
  double predicted_score = 0.0;
  double label_score = 0.0;
  ModalityWeights alpha{};
};

struct EvalReport {
  std::size_t steps = 0;
  double score_mse = 0.0;
  double class_accuracy = 0.0;
  double class_cross_entropy = 0.0;
  double mean_kl = 0.0;
  double mean_recon_error = 0.0;
  ModalityWeights mean_alpha{};
  std::vector<StepPrediction> predictions;

  /// `name<TAB>value` lines.
  std::string render() const;
};

/// eps = 0 inference over every target of every example.
EvalReport evaluate(const Model& model, std::span<const Example> data, const TrainConfig& cfg);

/// The static mean-pooling variant of a generation, for ablation contrasts.
/// Uses the same parameters with the temporal layer replaced by pooling.
GeneratedOutput static_baseline(const Model& model, std::span<const Interaction> history,
                                const CandidateItem& candidate);

}  // namespace timgen
