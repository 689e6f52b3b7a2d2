#include <cmath>

#include "helpers.hpp"
#include "timgen/errors.hpp"
#include "timgen/labels.hpp"
#include "timgen/training.hpp"

using namespace timgen;

namespace {

GeneratedOutput uniform_output(std::size_t k, std::size_t d) {
  GeneratedOutput out;
  out.content.assign(d, 0.0);
  out.class_logits.assign(k, 0.0);
  out.class_probs.assign(k, 1.0 / static_cast<double>(k));
  return out;
}

std::vector<Example> make_examples(const ModelConfig& m, std::size_t users, std::size_t len, std::uint64_t seed,
                                   TargetMode mode = TargetMode::AllPrefixes) {
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t u = 0; u < users; ++u)
    out.push_back(make_example(test::random_history(m, len, rng, "u" + std::to_string(u)), m, mode));
  return out;
}

double example_total(const Model& model, const Example& ex, std::span<const Matrix> eps, const TrainConfig& cfg) {
  ad::Tape tape(&model.params());
  return example_loss(tape, model, ex, eps, cfg).total.value()[0];
}

}  // namespace

TEST_CASE("joint loss components") {
  TrainConfig cfg;
  auto out = uniform_output(4, 3);
  out.score = 2.0;
  CandidateItem target{"i", {0.0, 0.0, 0.0}, 2.0, 1};
  const std::vector<double> mu(2, 0.0), sigma(2, 1.0);
  const auto c = joint_loss(out, target, mu, sigma, cfg);
  CHECK(c.score == 0.0);
  CHECK(std::abs(c.class_ce - 1.386294361119890619) < 1e-12);
  CHECK(c.vae == 0.0);

  TrainConfig none = cfg;
  none.lambda_score = 0.0;
  none.lambda_class = 0.0;
  target.score_label = -1.0;
  const std::vector<double> mu2 = {0.3, -0.2}, sigma2 = {0.8, 1.4};
  const auto d = joint_loss(out, target, mu2, sigma2, none);
  CHECK(d.total == d.vae);
  CHECK(d.vae == vae_loss(out, target.features, mu2, sigma2));
  CHECK(d.score == 9.0);

  const auto e = joint_loss(out, target, mu2, sigma2, cfg);
  CHECK(e.total == doctest::Approx(e.vae + e.score + e.class_ce).epsilon(1e-15));
}

TEST_CASE("examples and target construction") {
  const auto m = test::tiny_model();
  Rng rng(1);
  const auto h = test::random_history(m, 5, rng);
  const auto all = make_example(h, m, TargetMode::AllPrefixes);
  CHECK(all.targets == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(all.cutoff(0) == 0);
  CHECK(all.cutoff(3) == 3);
  const auto last = make_example(h, m, TargetMode::Last);
  CHECK(last.targets == std::vector<std::size_t>{4});
  CHECK(last.candidates.row_copy(0) == candidate_features(h[4], m.encoder));
  const auto single = make_example(std::span(h).first(1), m, TargetMode::Last);
  CHECK(single.targets == std::vector<std::size_t>{0});
  CHECK(single.cutoff(0) == 0);
  auto bad = h;
  bad[2].class_label = 3;
  CHECK_THROWS_AS(make_example(bad, m, TargetMode::AllPrefixes), ValidationError);
}

TEST_CASE("batched example loss matches single-step generation") {
  const auto m = test::tiny_model();
  Model model(m, 3);
  Rng rng(2);
  const auto h = test::random_history(m, 6, rng);
  const auto ex = make_example(h, m, TargetMode::AllPrefixes);
  TrainConfig cfg;
  std::vector<Matrix> eps(1, Matrix(ex.targets.size(), m.generation.d_latent));
  ad::Tape tape(&model.params());
  const auto loss = example_loss(tape, model, ex, eps, cfg);
  double total = 0.0;
  for (std::size_t i = 0; i < ex.targets.size(); ++i) {
    const auto j = ex.targets[i];
    const auto g = generate(model, std::span(h).first(j), ex.candidates.row(i));
    CandidateItem target{h[j].item_id, ex.candidates.row_copy(i), h[j].score_label, h[j].class_label};
    total += joint_loss(g.output, target, g.mu, g.sigma, cfg).total;
  }
  CHECK(loss.total.value()[0] == doctest::Approx(total).epsilon(1e-12));
  CHECK(loss.count == ex.targets.size());
}

TEST_CASE("train step") {
  const auto m = test::tiny_model();
  const auto data = make_examples(m, 2, 6, 4);
  std::vector<const Example*> batch = {&data[0], &data[1]};

  SUBCASE("zero learning rate leaves parameters untouched") {
    for (auto kind : {OptimizerKind::Adam, OptimizerKind::GradientDescent}) {
      Model model(m, 5);
      TrainConfig cfg;
      cfg.learning_rate = 0.0;
      cfg.optimizer = kind;
      Optimizer opt(model.params(), cfg);
      const ParamStore before = model.params();
      Rng rng(1);
      const auto r = train_step(model, opt, batch, cfg, rng);
      CHECK(std::isfinite(r.mean.total));
      CHECK(model.params() == before);
    }
  }

  SUBCASE("a small step decreases the loss") {
    for (double lr : {1e-2, 1e-3, 1e-4}) {
      Model model(m, 6);
      TrainConfig cfg;
      cfg.optimizer = OptimizerKind::GradientDescent;
      cfg.learning_rate = lr;
      std::vector<const Example*> one = {&data[0]};
      Rng draw(9);
      std::vector<Matrix> eps(1, Matrix(data[0].targets.size(), m.generation.d_latent));
      for (double& e : eps[0].data()) e = draw.normal();
      const double before = example_total(model, data[0], eps, cfg);
      Optimizer opt(model.params(), cfg);
      Rng rng(9);
      train_step(model, opt, one, cfg, rng);
      CHECK(example_total(model, data[0], eps, cfg) < before);
    }
  }

  SUBCASE("clipping bounds the update") {
    Model model(m, 7);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::GradientDescent;
    cfg.learning_rate = 1.0;
    cfg.clip_norm = 1e-3;
    const ParamStore before = model.params();
    Optimizer opt(model.params(), cfg);
    Rng rng(2);
    train_step(model, opt, batch, cfg, rng);
    double sq = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const auto a = before.value(before.id(i)).data();
      const auto b = model.params().value(before.id(i)).data();
      for (std::size_t k = 0; k < a.size(); ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
    }
    CHECK(std::sqrt(sq) <= 1e-3 * (1.0 + 1e-9));
  }

  SUBCASE("non-finite loss is reported with the user") {
    Model model(m, 8);
    model.params().value(model.layout().vae.score_b)(0, 0) = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    Optimizer opt(model.params(), cfg);
    Rng rng(3);
    try {
      train_step(model, opt, batch, cfg, rng);
      FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("u0") != std::string::npos);
    }
  }
}

TEST_CASE("fit is deterministic and reduces the loss") {
  const auto m = test::tiny_model();
  const auto data = make_examples(m, 6, 8, 10);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-2;
  Model a(m, 1), b(m, 1);
  const auto la = fit(a, data, cfg);
  const auto lb = fit(b, data, cfg);
  REQUIRE(la.size() == 15);
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i].mean.total == lb[i].mean.total);
  CHECK(a.params() == b.params());
  CHECK(la.back().mean.total < la.front().mean.total);
}

TEST_CASE("evaluate") {
  const auto m = test::tiny_model();
  TrainConfig cfg;

  SUBCASE("oracle decoder on one example") {
    Rng rng(3);
    const auto h = test::random_history(m, 2, rng);
    const auto ex = make_example(h, m, TargetMode::Last);
    Model model(m, 2);
    auto& p = model.params();
    const auto& vae = model.layout().vae;
    for (auto id : {vae.dec_w, vae.dec_b, vae.score_w, vae.class_w}) p.value(id).fill(0.0);
    p.value(vae.score_b)(0, 0) = h[1].score_label;
    p.value(vae.class_b).fill(0.0);
    p.value(vae.class_b)(0, static_cast<std::size_t>(h[1].class_label)) = 5.0;
    const auto report = evaluate(model, std::span(&ex, 1), cfg);
    CHECK(report.score_mse == 0.0);
    CHECK(report.class_accuracy == 1.0);
    CHECK(report.steps == 1);
  }

  SUBCASE("random init is near chance and repeatable") {
    auto m4 = m;
    m4.generation.n_classes = 4;
    const auto data = make_examples(m4, 30, 16, 11);
    Model model(m4, 12);
    const auto r1 = evaluate(model, data, cfg);
    CHECK(r1.steps >= 400);
    CHECK(std::abs(r1.class_accuracy - 0.25) <= 0.1);
    const auto r2 = evaluate(model, data, cfg);
    CHECK(r1.render() == r2.render());
    for (const char* field : {"steps", "score_mse", "class_accuracy", "class_cross_entropy", "mean_kl",
                              "mean_recon_error", "alpha_text", "alpha_img", "alpha_video", "alpha_audio"})
      CHECK(r1.render().find(std::string(field) + "\t") != std::string::npos);
  }
}

TEST_CASE("static baseline") {
  const auto m = test::tiny_model();
  Model model(m, 4);
  Rng rng(5);
  const auto h = test::random_history(m, 6, rng);
  const auto encoded = encode_sequence(h, model.params(), model.layout().encoding, m.encoder);

  Rng perm(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> order(encoded.features.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[perm.below(i)]);
    Matrix shuffled(encoded.features.rows(), encoded.features.cols());
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto src = encoded.features.row(order[r]);
      std::copy(src.begin(), src.end(), shuffled.row(r).begin());
    }
    const auto a = static_states(model, encoded.features);
    const auto b = static_states(model, shuffled);
    CHECK(a.row_copy(a.rows() - 1) == b.row_copy(b.rows() - 1));
  }

  const auto one = static_states(model, encoded.features.row_block(0, 1));
  ad::Tape tape(&model.params());
  const auto projected = project_input(tape, tape.constant(encoded.features.row_block(0, 1)), model.layout().transformer);
  CHECK(one.row_copy(0) == projected.value().row_copy(0));

  CandidateItem cand{"c", candidate_features(h[5], m.encoder), 0.0, 0};
  const auto out = static_baseline(model, std::span(h).first(5), cand);
  ModelConfig pooled_cfg = m;
  pooled_cfg.variant = ModelVariant::StaticBaseline;
  Model pooled(pooled_cfg, 4);
  CHECK(static_baseline(pooled, std::span(h).first(5), cand).class_probs == out.class_probs);
  CHECK(generate(model, std::span(h).first(5), cand.features).output.score != out.score);
}

TEST_CASE("deterministic generation with eps = 0 and seeded sampling") {
  const auto m = test::tiny_model();
  Model model(m, 9);
  Rng rng(7);
  const auto h = test::random_history(m, 4, rng);
  const auto cand = candidate_features(h[3], m.encoder);
  const auto a = generate(model, h, cand);
  const auto b = generate(model, h, cand);
  CHECK(a.output.content == b.output.content);
  CHECK(a.latent == a.mu);
  Rng s1(1), s2(1);
  CHECK(generate(model, h, cand, &s1).latent == generate(model, h, cand, &s2).latent);
  const auto single = generate(model, std::span(h).first(1), cand);
  CHECK(std::isfinite(single.output.score));
  double alpha = 0.0;
  for (double w : a.alpha) alpha += w;
  CHECK(std::abs(alpha - 1.0) < 1e-12);
}
