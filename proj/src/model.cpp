#include "timgen/model.hpp"

#include <algorithm>

#include "timgen/errors.hpp"

namespace timgen {

ModelParams ModelParams::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  Rng rng(mix64(seed ^ 0x7ad1e5ULL));
  p.encoding = EncodingParams::create(p.store, cfg.encoder, rng);
  p.transformer = TransformerParams::create(p.store, cfg.encoder.input_dim(), cfg.transformer, rng);
  p.fusion = FusionParams::create(p.store, cfg.encoder.modality_dims, cfg.transformer.d_model, rng);
  p.vae = VaeParams::create(p.store, cfg.transformer.d_model, cfg.encoder.modality_dim(), cfg.generation, rng);
  return p;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), params_(ModelParams::create(cfg_, seed)) {}

void Model::assign(const ParamStore& store) {
  for (std::size_t i = 0; i < params_.store.size(); ++i) {
    const auto id = params_.store.id(i);
    const auto& name = params_.store.name(id);
    const auto other = store.find(name);
    if (!other) throw CheckpointManifestError("missing tensor " + name);
    const Matrix& src = store.value(*other);
    Matrix& dst = params_.store.value(id);
    if (!src.same_shape(dst)) {
      throw CheckpointManifestError("tensor " + name + " has shape " + std::to_string(src.rows()) + "x" +
                                    std::to_string(src.cols()) + ", expected " + std::to_string(dst.rows()) +
                                    "x" + std::to_string(dst.cols()));
    }
    dst = src;
  }
  if (store.size() != params_.store.size()) throw CheckpointManifestError("unexpected extra tensors");
}

Example make_example(std::span<const Interaction> history, const ModelConfig& cfg, TargetMode mode) {
  Example ex;
  ex.seq = prepare_sequence(history, cfg.encoder);
  ex.user_id = history.front().user_id;
  for (const auto& x : history) {
    if (x.class_label < 0 || static_cast<std::size_t>(x.class_label) >= cfg.generation.n_classes) {
      throw ValidationError("item " + x.item_id + ": class label " + std::to_string(x.class_label) +
                            " outside 0.." + std::to_string(cfg.generation.n_classes - 1));
    }
    ex.item_ids.push_back(x.item_id);
  }
  const std::size_t n = history.size();
  if (n == 1) {
    ex.targets = {0};
  } else if (mode == TargetMode::Last) {
    ex.targets = {n - 1};
  } else {
    for (std::size_t j = 1; j < n; ++j) ex.targets.push_back(j);
  }
  ex.candidates = Matrix(ex.targets.size(), cfg.encoder.modality_dim());
  for (std::size_t i = 0; i < ex.targets.size(); ++i) {
    const auto j = ex.targets[i];
    const auto row = ex.seq.modality_row(j);
    std::copy(row.begin(), row.end(), ex.candidates.row(i).begin());
    ex.score_labels.push_back(history[j].score_label);
    ex.class_labels.push_back(history[j].class_label);
  }
  return ex;
}

ForwardPass forward_interest(ad::Tape& tape, const Model& model, const PreparedSequence& seq,
                             std::span<const std::size_t> cutoffs, const Matrix& candidates) {
  const auto& cfg = model.config();
  const auto& layout = model.layout();
  if (cutoffs.empty()) throw InvalidArgument("forward: no cutoffs");
  if (candidates.rows() != cutoffs.size() || candidates.cols() != cfg.encoder.modality_dim()) {
    throw InvalidArgument("forward: candidate matrix shape mismatch");
  }
  const std::size_t rows = *std::max_element(cutoffs.begin(), cutoffs.end()) + 1;
  ad::Var x = encode_rows(tape, seq, layout.encoding, rows, cfg.zero_modality_block);
  ad::Var states = cfg.variant == ModelVariant::Full
                       ? transformer_forward(tape, x, layout.transformer, cfg.transformer)
                       : ad::prefix_means(project_input(tape, x, layout.transformer));
  std::vector<std::int64_t> pick(cutoffs.begin(), cutoffs.end());
  ForwardPass pass;
  pass.z = ad::gather_rows(states, pick);
  pass.fusion = fuse_at_cutoffs(tape, seq, cutoffs, layout.fusion, cfg.transformer.d_model);
  pass.z_final = fuse_final(tape, pass.z, pass.fusion.z_multi, layout.fusion);
  pass.latent = encode_latent(tape, pass.z_final, layout.vae, cfg.generation);
  pass.candidates = tape.constant(candidates);
  return pass;
}

Matrix interest_states(const Model& model, std::span<const Interaction> history) {
  const auto seq = prepare_sequence(history, model.config().encoder);
  ad::Tape tape(&model.params());
  ad::Var x = encode_rows(tape, seq, model.layout().encoding, seq.length(), model.config().zero_modality_block);
  return transformer_forward(tape, x, model.layout().transformer, model.config().transformer).value();
}

Matrix static_states(const Model& model, const Matrix& encoded) {
  ad::Tape tape(&model.params());
  return ad::prefix_means(project_input(tape, tape.constant(encoded), model.layout().transformer)).value();
}

Generation generate(const Model& model, std::span<const Interaction> history,
                    std::span<const double> candidate, Rng* rng) {
  const auto& cfg = model.config();
  const auto seq = prepare_sequence(history, cfg.encoder);
  if (candidate.size() != cfg.encoder.modality_dim()) {
    throw InvalidArgument("generate: candidate feature width mismatch");
  }
  ad::Tape tape(&model.params());
  const std::vector<std::size_t> cutoffs = {seq.length() - 1};
  auto pass = forward_interest(tape, model, seq, cutoffs, Matrix::row_vector(candidate));
  Matrix eps(1, cfg.generation.d_latent);
  if (rng != nullptr)
    for (double& e : eps.data()) e = rng->normal();
  ad::Var latent = reparameterize(tape, pass.latent, eps);
  auto dec = decode(tape, latent, pass.candidates, model.layout().vae);
  Generation g;
  g.output = {dec.content.value().row_copy(0), dec.score.value()[0], dec.logits.value().row_copy(0),
              dec.probs.value().row_copy(0)};
  g.alpha = pass.fusion.alpha[0];
  g.z_final = pass.z_final.value().row_copy(0);
  g.mu = pass.latent.mu.value().row_copy(0);
  g.sigma = pass.latent.sigma.value().row_copy(0);
  g.latent = latent.value().row_copy(0);
  return g;
}

}  // namespace timgen
