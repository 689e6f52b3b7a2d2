#include "timgen/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "timgen/errors.hpp"
#include "timgen/format.hpp"
#include "timgen/labels.hpp"
#include "timgen/numerics/functions.hpp"

namespace timgen {

namespace {

constexpr double kLogFloor = 1e-12;

void add_components(LossComponents& acc, const LossComponents& x, double w = 1.0) {
  acc.total += w * x.total;
  acc.vae += w * x.vae;
  acc.recon += w * x.recon;
  acc.kl += w * x.kl;
  acc.score += w * x.score;
  acc.class_ce += w * x.class_ce;
}

LossComponents scaled(LossComponents x, double w) {
  LossComponents out;
  add_components(out, x, w);
  return out;
}

double assemble_total(const LossComponents& c, const TrainConfig& cfg) {
  return c.vae + cfg.lambda_score * c.score + cfg.lambda_class * c.class_ce;
}

}  // namespace

LossComponents joint_loss(const GeneratedOutput& output, const CandidateItem& target,
                          std::span<const double> mu, std::span<const double> sigma,
                          const TrainConfig& cfg) {
  LossComponents c;
  c.kl = kl_diag_gaussian(mu, sigma);
  c.vae = vae_loss(output, target.features, mu, sigma);
  for (std::size_t i = 0; i < target.features.size(); ++i) {
    const double d = output.content[i] - target.features[i];
    c.recon += d * d;
  }
  const double residual = output.score - target.score_label;
  c.score = residual * residual;
  const auto y = one_hot_class(target.class_label, output.class_probs.size());
  for (std::size_t k = 0; k < y.size(); ++k)
    c.class_ce -= y[k] * std::log(std::max(output.class_probs[k], kLogFloor));
  c.total = assemble_total(c, cfg);
  return c;
}

ExampleLoss example_loss(ad::Tape& tape, const Model& model, const Example& ex,
                         std::span<const Matrix> eps, const TrainConfig& cfg) {
  if (eps.empty()) throw InvalidArgument("example_loss: need at least one eps sample");
  const std::size_t n = ex.targets.size();
  std::vector<std::size_t> cutoffs(n);
  for (std::size_t i = 0; i < n; ++i) cutoffs[i] = ex.cutoff(i);
  auto pass = forward_interest(tape, model, ex.seq, cutoffs, ex.candidates);

  Matrix one_hot(n, model.config().generation.n_classes);
  Matrix score_labels(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    one_hot(i, static_cast<std::size_t>(ex.class_labels[i])) = 1.0;
    score_labels[i] = ex.score_labels[i];
  }
  ad::Var y_class = tape.constant(std::move(one_hot));
  ad::Var y_score = tape.constant(std::move(score_labels));

  // KL does not depend on eps.
  ad::Var var = ad::mul(pass.latent.sigma, pass.latent.sigma);
  ad::Var kl_terms = ad::sub(ad::add(var, ad::mul(pass.latent.mu, pass.latent.mu)),
                             ad::add_scalar(ad::log_clamped(var, 0.0), 1.0));
  ad::Var kl = ad::scale(ad::sum(kl_terms), 0.5);

  const double inv_samples = 1.0 / static_cast<double>(eps.size());
  ad::Var recon, score, class_ce;
  for (const Matrix& e : eps) {
    ad::Var latent = reparameterize(tape, pass.latent, e);
    auto dec = decode(tape, latent, pass.candidates, model.layout().vae);
    ad::Var diff = ad::sub(dec.content, pass.candidates);
    ad::Var r = ad::sum(ad::mul(diff, diff));
    ad::Var sres = ad::sub(dec.score, y_score);
    ad::Var s = ad::sum(ad::mul(sres, sres));
    ad::Var c = ad::scale(ad::sum(ad::mul(y_class, ad::log_clamped(dec.probs, kLogFloor))), -1.0);
    recon = recon.valid() ? ad::add(recon, r) : r;
    score = score.valid() ? ad::add(score, s) : s;
    class_ce = class_ce.valid() ? ad::add(class_ce, c) : c;
  }
  if (eps.size() > 1) {
    recon = ad::scale(recon, inv_samples);
    score = ad::scale(score, inv_samples);
    class_ce = ad::scale(class_ce, inv_samples);
  }

  ExampleLoss out;
  out.total = ad::add(ad::add(ad::add(recon, kl), ad::scale(score, cfg.lambda_score)),
                      ad::scale(class_ce, cfg.lambda_class));
  out.sums.recon = recon.value()[0];
  out.sums.kl = kl.value()[0];
  out.sums.vae = out.sums.recon + out.sums.kl;
  out.sums.score = score.value()[0];
  out.sums.class_ce = class_ce.value()[0];
  out.sums.total = assemble_total(out.sums, cfg);
  out.count = n;
  return out;
}

Optimizer::Optimizer(const ParamStore& params, const TrainConfig& cfg) : cfg_(cfg) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params.value(params.id(i));
    first_.emplace_back(v.rows(), v.cols());
    second_.emplace_back(v.rows(), v.cols());
  }
}

void Optimizer::apply(ParamStore& params, const Gradients& grads) {
  ++steps_;
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == OptimizerKind::GradientDescent) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& p = params.value(params.id(i));
      const Matrix& g = grads[params.id(i)];
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
    }
    return;
  }
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(params.id(i));
    const Matrix& g = grads[params.id(i)];
    Matrix& m = first_[i];
    Matrix& v = second_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.adam_eps);
    }
  }
}

Gradients batch_gradients(const Model& model, std::span<const Example* const> batch,
                          const TrainConfig& cfg, Rng& rng, StepResult* result) {
  std::size_t total_targets = 0;
  for (const Example* ex : batch) total_targets += ex->targets.size();
  if (total_targets == 0) throw InvalidArgument("train_step: empty batch");
  const double weight = 1.0 / static_cast<double>(total_targets);
  const std::size_t d_latent = model.config().generation.d_latent;

  Gradients grads(model.params());
  LossComponents sums;
  for (const Example* ex : batch) {
    std::vector<Matrix> eps;
    for (std::size_t s = 0; s < cfg.vae_samples; ++s) {
      Matrix e(ex->targets.size(), d_latent);
      for (double& v : e.data()) v = rng.normal();
      eps.push_back(std::move(e));
    }
    ad::Tape tape(&model.params());
    auto loss = example_loss(tape, model, *ex, eps, cfg);
    if (!std::isfinite(loss.total.value()[0])) {
      throw NumericalError("non-finite loss on sequence of user " + ex->user_id);
    }
    tape.backward(loss.total, grads, weight);
    add_components(sums, loss.sums);
  }
  if (result != nullptr) {
    result->mean = scaled(sums, weight);
    result->mean.total = assemble_total(result->mean, cfg);
    result->targets = total_targets;
    result->grad_norm = grads.global_norm();
  }
  return grads;
}

StepResult train_step(Model& model, Optimizer& opt, std::span<const Example* const> batch,
                      const TrainConfig& cfg, Rng& rng) {
  StepResult result;
  Gradients grads = batch_gradients(model, batch, cfg, rng, &result);
  if (!grads.all_finite()) throw NumericalError("non-finite gradient");
  if (result.grad_norm > cfg.clip_norm) grads.scale(cfg.clip_norm / result.grad_norm);
  opt.apply(model.params(), grads);
  return result;
}

std::vector<EpochLog> fit(Model& model, std::span<const Example> train, const TrainConfig& cfg,
                          const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw InvalidArgument("fit: empty training set");
  Optimizer opt(model.params(), cfg);
  Rng order_rng = Rng(cfg.seed).derive(1);
  Rng noise_rng = Rng(cfg.seed).derive(2);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> logs;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    LossComponents sums;
    std::size_t targets = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const Example*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
        batch.push_back(&train[order[k]]);
      const auto step = train_step(model, opt, batch, cfg, noise_rng);
      add_components(sums, step.mean, static_cast<double>(step.targets));
      targets += step.targets;
    }
    EpochLog log{epoch, scaled(sums, 1.0 / static_cast<double>(targets))};
    log.mean.total = assemble_total(log.mean, cfg);
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

EvalReport evaluate(const Model& model, std::span<const Example> data, const TrainConfig& cfg) {
  if (data.empty()) throw InvalidArgument("evaluate: empty dataset");
  EvalReport report;
  double se = 0.0, ce = 0.0, kl = 0.0, recon = 0.0;
  std::size_t correct = 0;
  for (const Example& ex : data) {
    const std::size_t n = ex.targets.size();
    std::vector<std::size_t> cutoffs(n);
    for (std::size_t i = 0; i < n; ++i) cutoffs[i] = ex.cutoff(i);
    ad::Tape tape(&model.params());
    auto pass = forward_interest(tape, model, ex.seq, cutoffs, ex.candidates);
    ad::Var latent = reparameterize(tape, pass.latent, Matrix(n, model.config().generation.d_latent));
    auto dec = decode(tape, latent, pass.candidates, model.layout().vae);
    const Matrix& probs = dec.probs.value();
    for (std::size_t i = 0; i < n; ++i) {
      GeneratedOutput out{dec.content.value().row_copy(i), dec.score.value()[i], dec.logits.value().row_copy(i),
                          probs.row_copy(i)};
      CandidateItem target{ex.item_ids[ex.targets[i]], ex.candidates.row_copy(i), ex.score_labels[i],
                           ex.class_labels[i]};
      const auto loss = joint_loss(out, target, pass.latent.mu.value().row(i), pass.latent.sigma.value().row(i), cfg);
      StepPrediction p;
      p.user_id = ex.user_id;
      p.step = ex.targets[i];
      p.predicted_class = std::distance(out.class_probs.begin(),
                                        std::max_element(out.class_probs.begin(), out.class_probs.end()));
      p.label_class = ex.class_labels[i];
      p.predicted_score = out.score;
      p.label_score = ex.score_labels[i];
      p.alpha = pass.fusion.alpha[i];
      se += loss.score;
      ce += loss.class_ce;
      kl += loss.kl;
      recon += loss.recon;
      correct += p.predicted_class == p.label_class ? 1 : 0;
      for (std::size_t m = 0; m < kModalityCount; ++m) report.mean_alpha[m] += p.alpha[m];
      report.predictions.push_back(std::move(p));
    }
  }
  const double count = static_cast<double>(report.predictions.size());
  report.steps = report.predictions.size();
  report.score_mse = se / count;
  report.class_accuracy = static_cast<double>(correct) / count;
  report.class_cross_entropy = ce / count;
  report.mean_kl = kl / count;
  report.mean_recon_error = recon / count;
  for (double& a : report.mean_alpha) a /= count;
  return report;
}

std::string EvalReport::render() const {
  std::string out;
  auto line = [&out](const std::string& name, const std::string& value) { out += name + "\t" + value + "\n"; };
  line("steps", std::to_string(steps));
  line("score_mse", format_double(score_mse));
  line("class_accuracy", format_double(class_accuracy));
  line("class_cross_entropy", format_double(class_cross_entropy));
  line("mean_kl", format_double(mean_kl));
  line("mean_recon_error", format_double(mean_recon_error));
  for (auto kind : kAllModalities)
    line("alpha_" + std::string(modality_name(kind)), format_double(mean_alpha[index_of(kind)]));
  return out;
}

GeneratedOutput static_baseline(const Model& model, std::span<const Interaction> history,
                                const CandidateItem& candidate) {
  if (model.config().variant == ModelVariant::StaticBaseline) {
    return generate(model, history, candidate.features).output;
  }
  ModelConfig cfg = model.config();
  cfg.variant = ModelVariant::StaticBaseline;
  Model pooled(cfg, 0);
  pooled.assign(model.params());
  return generate(pooled, history, candidate.features).output;
}

}  // namespace timgen
