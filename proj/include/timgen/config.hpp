#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "timgen/encoding.hpp"
#include "timgen/generation.hpp"
#include "timgen/labels.hpp"
#include "timgen/modality.hpp"
#include "timgen/temporal.hpp"

namespace timgen {

enum class OptimizerKind { GradientDescent, Adam };
enum class ModelVariant { Full, StaticBaseline };
/// Which interactions of a sequence serve as supervised targets.
enum class TargetMode { Last, AllPrefixes };
enum class LabelScenario { Ecommerce, Video, Movie };

struct ModelConfig {
  EncoderConfig encoder;
  TransformerConfig transformer;
  GenerationConfig generation;
  ModelVariant variant = ModelVariant::Full;
  /// Zero the modality block of x_t before the temporal layer.
  bool zero_modality_block = false;

  void validate() const;
};

struct TrainConfig {
  double lambda_score = 1.0;
  double lambda_class = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  TargetMode targets = TargetMode::AllPrefixes;
  std::size_t vae_samples = 1;
  double train_fraction = 0.8;
  double val_fraction = 0.1;

  void validate() const;
};

struct ScenarioSpec {
  std::size_t users = 200;
  std::size_t steps_min = 32;
  std::size_t steps_max = 32;
  double rho = 0.1;  ///< per-step regime switch probability
  std::size_t items_per_class = 50;
  double explore = 0.1;  ///< chance an interaction picks an item outside the current class
  double item_signal = 0.6;  ///< weight of the class centroid in item embeddings
  double modality_presence = 0.85;
  /// Per class: the only modality carrying class signal, or nullopt for all.
  std::vector<std::optional<ModalityKind>> salience;
  double sigma_label = 0.3;
  LabelScenario scenario = LabelScenario::Ecommerce;
  std::int64_t start_time = 1704067200;  // 2024-01-01
  std::size_t n_geo = 16;
};

struct Config {
  ModelConfig model;
  TrainConfig train;
  ScenarioSpec scenario;
  LabelWeights labels;

  std::size_t n_classes() const { return model.generation.n_classes; }
  /// Model + training constraints.
  void validate() const;
  /// Scenario constraints (also checks consistency with the model config).
  void validate_scenario() const;
};

/// Parses `key = value` lines ('#' starts a comment) on top of defaults.
/// Unknown keys and malformed values raise ParseError with the line number.
/// `explicit_keys` receives every key the text set.
Config parse_config(std::string_view text, std::set<std::string>* explicit_keys = nullptr);
Config load_config(const std::filesystem::path& path, std::set<std::string>* explicit_keys = nullptr);

/// Every key with its value, one `key = value` per line, in a fixed order.
std::string render_config(const Config& cfg);
std::vector<std::string> config_keys();

}  // namespace timgen
