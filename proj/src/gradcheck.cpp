#include "timgen/gradcheck.hpp"

#include <cmath>
#include <utility>

#include "timgen/errors.hpp"
#include "timgen/model.hpp"
#include "timgen/numerics/functions.hpp"
#include "timgen/training.hpp"

namespace timgen {

namespace {

constexpr std::size_t kSequenceLength = 4;

std::vector<Interaction> random_history(const Config& cfg, Rng& rng) {
  const auto& enc = cfg.model.encoder;
  std::vector<Interaction> history;
  std::int64_t ts = 1704067200 + static_cast<std::int64_t>(rng.below(86400 * 7));
  for (std::size_t t = 0; t < kSequenceLength; ++t) {
    Interaction x;
    x.user_id = "gradcheck";
    x.item_id = "item" + std::to_string(t);
    x.action = static_cast<ActionType>(rng.below(kActionCount));
    x.context = {static_cast<Device>(rng.below(kDeviceCount)), static_cast<Platform>(rng.below(kPlatformCount)),
                 static_cast<std::int64_t>(rng.below(enc.geo_vocab))};
    ts += 60 + static_cast<std::int64_t>(rng.below(86400));
    x.timestamp = ts;
    for (auto kind : {ModalityKind::Text, ModalityKind::Image}) {
      std::vector<double> v(enc.modality_dims[index_of(kind)]);
      for (double& e : v) e = rng.normal();
      x.modalities[index_of(kind)] = std::move(v);
    }
    x.score_label = rng.uniform(0.0, 5.0);
    x.class_label = static_cast<std::int64_t>(rng.below(cfg.n_classes()));
    history.push_back(std::move(x));
  }
  return history;
}

}  // namespace

Config gradcheck_config() {
  Config cfg;
  auto& enc = cfg.model.encoder;
  enc.d_action = 3;
  enc.d_device = 2;
  enc.d_platform = 2;
  enc.d_geo = 2;
  enc.geo_vocab = 4;
  enc.d_abs = 4;
  enc.d_gap = 2;
  enc.gap_buckets = 16;
  enc.modality_dims = {4, 4, 4, 4};
  enc.max_len = kSequenceLength;
  auto& tf = cfg.model.transformer;
  tf.d_model = 8;
  tf.n_heads = 1;
  tf.n_layers = 1;
  tf.d_ff = 8;
  auto& gen = cfg.model.generation;
  gen.d_latent = 4;
  gen.d_hidden = 8;
  gen.n_classes = 3;
  cfg.train.targets = TargetMode::AllPrefixes;
  cfg.train.vae_samples = 1;
  return cfg;
}

GradCheckReport gradient_check(std::uint64_t seed, double h) {
  const Config cfg = gradcheck_config();
  cfg.validate();
  Model model(cfg.model, seed);
  Rng rng = Rng(seed).derive(7);
  const auto history = random_history(cfg, rng);
  const Example ex = make_example(history, cfg.model, cfg.train.targets);
  std::vector<Matrix> eps(1, Matrix(ex.targets.size(), cfg.model.generation.d_latent));
  for (double& e : eps[0].data()) e = rng.normal();

  auto loss_value = [&]() {
    ad::Tape tape(&model.params());
    return example_loss(tape, model, ex, eps, cfg.train).total.value()[0];
  };

  Gradients grads(model.params());
  {
    ad::Tape tape(&model.params());
    const auto loss = example_loss(tape, model, ex, eps, cfg.train);
    tape.backward(loss.total, grads);
  }

  GradCheckReport report;
  ParamStore& store = model.params();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id = store.id(i);
    GradCheckGroup group;
    group.name = store.name(id);
    const auto values = store.value(id).data();
    const auto analytic = std::as_const(grads)[id].data();
    group.entries = values.size();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double original = values[e];
      values[e] = original + h;
      const double plus = loss_value();
      values[e] = original - h;
      const double minus = loss_value();
      values[e] = original;
      if (!std::isfinite(plus) || !std::isfinite(minus)) throw NumericalError("gradient check: non-finite loss");
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(analytic[e], numeric);
      if (err >= group.max_rel_error) {
        group.max_rel_error = err;
        group.worst_entry = e;
        group.analytic = analytic[e];
        group.numeric = numeric;
      }
    }
    report.entries += group.entries;
    report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace timgen
