#include "timgen/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "timgen/errors.hpp"
#include "timgen/labels.hpp"
#include "timgen/modality_providers.hpp"
#include "timgen/numerics/rng.hpp"

namespace timgen {

namespace {

constexpr double kMedianGapSeconds = 6.0 * 3600.0;
constexpr double kGapLogSigma = 1.0;
constexpr double kOffClassIntensity = 0.3;

struct Item {
  std::string id;
  std::int64_t cls = 0;
  ModalityEmbeddings embeddings;
  double length_seconds = 0.0;
};

std::vector<double> mix(const std::vector<double>& centroid, const std::vector<double>& noise, double signal) {
  std::vector<double> v(noise.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = signal * centroid[i] + noise[i];
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<Item> build_catalog(const Config& cfg, std::uint64_t seed, Rng& rng) {
  const auto& s = cfg.scenario;
  const MockProvider provider(seed, cfg.model.encoder.modality_dims);
  std::vector<Item> items;
  for (std::size_t c = 0; c < cfg.n_classes(); ++c) {
    std::optional<ModalityKind> salient;
    if (!s.salience.empty()) salient = s.salience[c];
    for (std::size_t i = 0; i < s.items_per_class; ++i) {
      Item item;
      item.id = "item" + std::to_string(items.size());
      item.cls = static_cast<std::int64_t>(c);
      item.length_seconds = rng.uniform(60.0, 600.0);
      bool any = false;
      for (auto kind : kAllModalities) {
        const bool forced = salient && *salient == kind;
        if (!forced && !rng.bernoulli(s.modality_presence)) continue;
        any = true;
        const auto noise = *provider.lookup(item.id, kind);
        const bool signal = !salient || *salient == kind;
        const auto centroid = *provider.lookup("centroid" + std::to_string(c), kind);
        item.embeddings[index_of(kind)] = signal ? mix(centroid, noise, s.item_signal) : noise;
      }
      if (!any) {
        const auto kind = kAllModalities[rng.below(kModalityCount)];
        const auto centroid = *provider.lookup("centroid" + std::to_string(c), kind);
        item.embeddings[index_of(kind)] = mix(centroid, *provider.lookup(item.id, kind), s.item_signal);
      }
      items.push_back(std::move(item));
    }
  }
  return items;
}

double scenario_score(const Config& cfg, double intensity, double length_seconds, Rng& rng,
                      ActionType& action) {
  EngagementSignals sig;
  sig.clicked = rng.bernoulli(0.3 + 0.7 * intensity);
  sig.carted = sig.clicked && rng.bernoulli(0.8 * intensity);
  sig.purchased = sig.carted && rng.bernoulli(0.7 * intensity);
  sig.commented = rng.bernoulli(0.4 * intensity);
  sig.liked = rng.bernoulli(0.8 * intensity);
  sig.shared = rng.bernoulli(0.3 * intensity);
  sig.length_seconds = length_seconds;
  sig.watch_seconds = std::max(0.0, intensity + rng.normal(0.0, 0.15)) * length_seconds;

  if (sig.purchased) action = ActionType::Purchase;
  else if (sig.commented) action = ActionType::Comment;
  else if (sig.liked) action = ActionType::Like;
  else if (sig.clicked) action = ActionType::Click;
  else action = ActionType::View;

  const double noise = rng.normal(0.0, cfg.scenario.sigma_label);
  switch (cfg.scenario.scenario) {
    case LabelScenario::Ecommerce: return ecommerce_score(sig, cfg.labels) + noise;
    case LabelScenario::Video: return video_score(sig, cfg.labels) + noise;
    case LabelScenario::Movie: {
      const auto rating = std::clamp<std::int64_t>(std::llround(1.0 + 9.0 * intensity + noise), 1, 10);
      return movie_score_validate(rating);
    }
  }
  return 0.0;
}

double segment_mean(std::span<const double> scores) {
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(scores.size());
}

}  // namespace

SyntheticDataset generate_dataset(const Config& cfg, std::uint64_t seed) {
  cfg.validate();
  cfg.validate_scenario();
  const auto& s = cfg.scenario;
  const std::size_t k = cfg.n_classes();
  Rng catalog_rng = Rng(seed).derive(0);
  const auto items = build_catalog(cfg, seed, catalog_rng);

  SyntheticDataset out;
  out.class_histogram.assign(k, 0);
  double shift_at_changes = 0.0, shift_within = 0.0;
  std::size_t within_count = 0;

  for (std::size_t u = 0; u < s.users; ++u) {
    Rng rng = Rng(seed).derive(1000 + u);
    const std::string user_id = "user" + std::to_string(u);
    std::vector<double> affinity(k);
    for (double& a : affinity) a = rng.uniform(0.2, 1.0);
    Context ctx{static_cast<Device>(rng.below(kDeviceCount)), static_cast<Platform>(rng.below(kPlatformCount)),
                static_cast<std::int64_t>(rng.below(s.n_geo))};
    const std::size_t steps = s.steps_min + rng.below(s.steps_max - s.steps_min + 1);
    std::int64_t timestamp = s.start_time + static_cast<std::int64_t>(rng.below(14 * 86400));
    auto current = static_cast<std::int64_t>(rng.below(k));

    std::vector<double> scores;
    std::vector<std::size_t> regime_starts = {0};
    for (std::size_t t = 0; t < steps; ++t) {
      if (t > 0) {
        double gap = std::exp(std::log(kMedianGapSeconds) + kGapLogSigma * rng.normal());
        const int dow = day_of_week(timestamp);
        if (dow == 0 || dow == 6) gap /= 2.0;  // Sunday, Saturday
        timestamp += std::max<std::int64_t>(1, std::llround(gap));
        if (rng.bernoulli(s.rho)) {
          auto next = static_cast<std::int64_t>(rng.below(k - 1));
          current = next >= current ? next + 1 : next;
          regime_starts.push_back(t);
          ++out.change_points;
        }
      }
      if (rng.bernoulli(0.05)) ctx.device = static_cast<Device>(rng.below(kDeviceCount));

      std::int64_t item_class = current;
      if (rng.bernoulli(s.explore)) {
        auto other = static_cast<std::int64_t>(rng.below(k - 1));
        item_class = other >= current ? other + 1 : other;
      }
      const Item& item = items[static_cast<std::size_t>(item_class) * s.items_per_class + rng.below(s.items_per_class)];
      const double intensity =
          affinity[static_cast<std::size_t>(current)] * (item_class == current ? 1.0 : kOffClassIntensity);

      Interaction x;
      x.user_id = user_id;
      x.item_id = item.id;
      x.context = ctx;
      x.timestamp = timestamp;
      x.modalities = item.embeddings;
      x.score_label = scenario_score(cfg, intensity, item.length_seconds, rng, x.action);
      x.class_label = item.cls;
      scores.push_back(x.score_label);
      ++out.class_histogram[static_cast<std::size_t>(item.cls)];
      out.records.push_back(std::move(x));
      out.truth.push_back({user_id, t, current, intensity});
    }

    regime_starts.push_back(steps);
    std::span<const double> all(scores);
    for (std::size_t r = 0; r + 1 < regime_starts.size(); ++r) {
      const auto seg = all.subspan(regime_starts[r], regime_starts[r + 1] - regime_starts[r]);
      if (r + 2 < regime_starts.size()) {
        const auto next = all.subspan(regime_starts[r + 1], regime_starts[r + 2] - regime_starts[r + 1]);
        shift_at_changes += std::abs(segment_mean(seg) - segment_mean(next));
      }
      if (seg.size() >= 4) {
        const auto half = seg.size() / 2;
        shift_within += std::abs(segment_mean(seg.first(half)) - segment_mean(seg.subspan(half)));
        ++within_count;
      }
    }
  }

  if (out.change_points > 0) {
    const double at_changes = shift_at_changes / static_cast<double>(out.change_points);
    const double within = within_count > 0 ? shift_within / static_cast<double>(within_count) : 0.0;
    out.change_point_contrast = at_changes - within;
    if (out.change_points >= 10 && !(out.change_point_contrast > 0.0)) {
      throw ValidationError("generated scores do not shift across change points");
    }
  }
  return out;
}

double drift_recovery_score(std::span<const std::int64_t> predicted, std::span<const std::int64_t> truth) {
  if (predicted.size() != truth.size()) throw ValidationError("drift_recovery_score: length mismatch");
  if (predicted.empty()) throw ValidationError("drift_recovery_score: empty evaluation set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace timgen
