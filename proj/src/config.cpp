#include "timgen/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "timgen/errors.hpp"
#include "timgen/format.hpp"

namespace timgen {

void ModelConfig::validate() const {
  encoder.validate();
  transformer.validate();
  generation.validate();
}

void TrainConfig::validate() const {
  if (!(lambda_score >= 0.0) || !(lambda_class >= 0.0)) throw InvalidArgument("loss weights must be >= 0");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be >= 0");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (vae_samples < 1) throw InvalidArgument("vae_samples must be >= 1");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip_norm must be positive");
  if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction > 1.0) {
    throw InvalidArgument("split fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
  }
}

void Config::validate() const {
  model.validate();
  train.validate();
  labels.validate();
}

void Config::validate_scenario() const {
  const auto& s = scenario;
  if (!(s.rho >= 0.0 && s.rho <= 1.0)) throw ValidationError("rho must lie in [0, 1]");
  if (n_classes() < 2) throw ValidationError("scenario needs at least 2 classes");
  if (s.steps_min < 2 || s.steps_max < s.steps_min) throw ValidationError("need 2 <= steps_min <= steps_max");
  if (s.steps_max > model.encoder.max_len) throw ValidationError("steps_max exceeds max_len");
  if (s.users < 1) throw ValidationError("users must be >= 1");
  if (s.items_per_class < 1) throw ValidationError("items_per_class must be >= 1");
  if (!(s.explore >= 0.0 && s.explore <= 1.0)) throw ValidationError("explore must lie in [0, 1]");
  if (!(s.modality_presence > 0.0 && s.modality_presence <= 1.0)) {
    throw ValidationError("modality_presence must lie in (0, 1]");
  }
  if (!(s.item_signal >= 0.0)) throw ValidationError("item_signal must be >= 0");
  if (!(s.sigma_label >= 0.0)) throw ValidationError("sigma_label must be >= 0");
  if (s.start_time < 0) throw ValidationError("start_time must be >= 0");
  if (s.n_geo < 1 || s.n_geo > model.encoder.geo_vocab) throw ValidationError("n_geo must lie in 1..geo_vocab");
  if (!s.salience.empty() && s.salience.size() != n_classes()) {
    throw ValidationError("salience must list one modality (or '-') per class");
  }
  labels.validate();
}

namespace {

struct Entry {
  std::string key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, std::string_view)> set;
};

std::size_t to_size(std::string_view v) {
  const auto x = parse_int(v);
  if (x < 0) throw ParseError(0, "expected a non-negative integer");
  return static_cast<std::size_t>(x);
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(0, "expected true or false");
}

template <typename T>
Entry size_entry(std::string key, T Config::*section, std::size_t T::*field) {
  return {key, [=](const Config& c) { return std::to_string((c.*section).*field); },
          [=](Config& c, std::string_view v) { (c.*section).*field = to_size(v); }};
}

template <typename T>
Entry double_entry(std::string key, T Config::*section, double T::*field) {
  return {key, [=](const Config& c) { return format_double((c.*section).*field); },
          [=](Config& c, std::string_view v) { (c.*section).*field = parse_double(v); }};
}

template <typename E>
Entry enum_entry(std::string key, std::function<E&(Config&)> ref, std::vector<std::pair<E, std::string>> names) {
  return {key,
          [=](const Config& c) {
            const E value = ref(const_cast<Config&>(c));
            for (const auto& [e, n] : names)
              if (e == value) return n;
            return std::string("?");
          },
          [=](Config& c, std::string_view v) {
            for (const auto& [e, n] : names) {
              if (n == v) {
                ref(c) = e;
                return;
              }
            }
            std::string allowed;
            for (const auto& [e, n] : names) allowed += (allowed.empty() ? "" : "|") + n;
            throw ParseError(0, "expected one of " + allowed);
          }};
}

Entry encoder_size(std::string key, std::size_t EncoderConfig::*field) {
  return {key, [=](const Config& c) { return std::to_string(c.model.encoder.*field); },
          [=](Config& c, std::string_view v) { c.model.encoder.*field = to_size(v); }};
}

Entry modality_dim(ModalityKind kind) {
  const auto m = index_of(kind);
  return {"d_" + std::string(modality_name(kind)),
          [=](const Config& c) { return std::to_string(c.model.encoder.modality_dims[m]); },
          [=](Config& c, std::string_view v) { c.model.encoder.modality_dims[m] = to_size(v); }};
}

Entry transformer_size(std::string key, std::size_t TransformerConfig::*field) {
  return {key, [=](const Config& c) { return std::to_string(c.model.transformer.*field); },
          [=](Config& c, std::string_view v) { c.model.transformer.*field = to_size(v); }};
}

Entry generation_size(std::string key, std::size_t GenerationConfig::*field) {
  return {key, [=](const Config& c) { return std::to_string(c.model.generation.*field); },
          [=](Config& c, std::string_view v) { c.model.generation.*field = to_size(v); }};
}

Entry weight_entry(std::string key, std::function<double&(Config&)> ref) {
  return {key, [=](const Config& c) { return format_double(ref(const_cast<Config&>(c))); },
          [=](Config& c, std::string_view v) { ref(c) = parse_double(v); }};
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    // encoder
    e.push_back(encoder_size("d_action", &EncoderConfig::d_action));
    e.push_back(encoder_size("d_device", &EncoderConfig::d_device));
    e.push_back(encoder_size("d_platform", &EncoderConfig::d_platform));
    e.push_back(encoder_size("d_geo", &EncoderConfig::d_geo));
    e.push_back(encoder_size("geo_vocab", &EncoderConfig::geo_vocab));
    e.push_back(encoder_size("d_abs", &EncoderConfig::d_abs));
    e.push_back(encoder_size("d_gap", &EncoderConfig::d_gap));
    e.push_back(encoder_size("gap_buckets", &EncoderConfig::gap_buckets));
    for (auto kind : kAllModalities) e.push_back(modality_dim(kind));
    e.push_back(encoder_size("max_len", &EncoderConfig::max_len));
    // architecture
    e.push_back(transformer_size("d_model", &TransformerConfig::d_model));
    e.push_back(transformer_size("n_heads", &TransformerConfig::n_heads));
    e.push_back(transformer_size("n_layers", &TransformerConfig::n_layers));
    e.push_back(transformer_size("d_ff", &TransformerConfig::d_ff));
    e.push_back(enum_entry<PositionalMode>(
        "positional", [](Config& c) -> PositionalMode& { return c.model.transformer.positional; },
        {{PositionalMode::None, "none"}, {PositionalMode::Extra, "extra"}}));
    e.push_back(generation_size("d_latent", &GenerationConfig::d_latent));
    e.push_back(generation_size("d_hidden", &GenerationConfig::d_hidden));
    e.push_back(generation_size("n_classes", &GenerationConfig::n_classes));
    e.push_back(weight_entry("sigma_floor", [](Config& c) -> double& { return c.model.generation.sigma_floor; }));
    e.push_back(enum_entry<ModelVariant>(
        "model", [](Config& c) -> ModelVariant& { return c.model.variant; },
        {{ModelVariant::Full, "full"}, {ModelVariant::StaticBaseline, "static"}}));
    e.push_back({"zero_modality_block",
                 [](const Config& c) { return std::string(c.model.zero_modality_block ? "true" : "false"); },
                 [](Config& c, std::string_view v) { c.model.zero_modality_block = to_bool(v); }});
    // training
    e.push_back(double_entry("lambda_score", &Config::train, &TrainConfig::lambda_score));
    e.push_back(double_entry("lambda_class", &Config::train, &TrainConfig::lambda_class));
    e.push_back(double_entry("learning_rate", &Config::train, &TrainConfig::learning_rate));
    e.push_back(size_entry("epochs", &Config::train, &TrainConfig::epochs));
    e.push_back(size_entry("batch_size", &Config::train, &TrainConfig::batch_size));
    e.push_back({"seed", [](const Config& c) { return std::to_string(c.train.seed); },
                 [](Config& c, std::string_view v) { c.train.seed = static_cast<std::uint64_t>(to_size(v)); }});
    e.push_back(enum_entry<OptimizerKind>(
        "optimizer", [](Config& c) -> OptimizerKind& { return c.train.optimizer; },
        {{OptimizerKind::GradientDescent, "sgd"}, {OptimizerKind::Adam, "adam"}}));
    e.push_back(double_entry("adam_beta1", &Config::train, &TrainConfig::adam_beta1));
    e.push_back(double_entry("adam_beta2", &Config::train, &TrainConfig::adam_beta2));
    e.push_back(double_entry("adam_eps", &Config::train, &TrainConfig::adam_eps));
    e.push_back(double_entry("clip_norm", &Config::train, &TrainConfig::clip_norm));
    e.push_back(enum_entry<TargetMode>(
        "targets", [](Config& c) -> TargetMode& { return c.train.targets; },
        {{TargetMode::Last, "last"}, {TargetMode::AllPrefixes, "all"}}));
    e.push_back(size_entry("vae_samples", &Config::train, &TrainConfig::vae_samples));
    e.push_back(double_entry("train_fraction", &Config::train, &TrainConfig::train_fraction));
    e.push_back(double_entry("val_fraction", &Config::train, &TrainConfig::val_fraction));
    // scenario
    e.push_back(size_entry("users", &Config::scenario, &ScenarioSpec::users));
    e.push_back(size_entry("steps_min", &Config::scenario, &ScenarioSpec::steps_min));
    e.push_back(size_entry("steps_max", &Config::scenario, &ScenarioSpec::steps_max));
    e.push_back(double_entry("rho", &Config::scenario, &ScenarioSpec::rho));
    e.push_back(size_entry("items_per_class", &Config::scenario, &ScenarioSpec::items_per_class));
    e.push_back(double_entry("explore", &Config::scenario, &ScenarioSpec::explore));
    e.push_back(double_entry("item_signal", &Config::scenario, &ScenarioSpec::item_signal));
    e.push_back(double_entry("modality_presence", &Config::scenario, &ScenarioSpec::modality_presence));
    e.push_back({"salience",
                 [](const Config& c) {
                   if (c.scenario.salience.empty()) return std::string("none");
                   std::string out;
                   for (const auto& s : c.scenario.salience) {
                     if (!out.empty()) out += ',';
                     out += s ? std::string(modality_name(*s)) : "-";
                   }
                   return out;
                 },
                 [](Config& c, std::string_view v) {
                   c.scenario.salience.clear();
                   if (v == "none") return;
                   while (true) {
                     const auto comma = v.find(',');
                     const auto item = trim(v.substr(0, comma));
                     if (item == "-") {
                       c.scenario.salience.emplace_back();
                     } else if (auto kind = parse_modality(item)) {
                       c.scenario.salience.emplace_back(*kind);
                     } else {
                       throw ParseError(0, "salience entries must be text|img|video|audio|-");
                     }
                     if (comma == std::string_view::npos) break;
                     v.remove_prefix(comma + 1);
                   }
                 }});
    e.push_back(double_entry("sigma_label", &Config::scenario, &ScenarioSpec::sigma_label));
    e.push_back(enum_entry<LabelScenario>(
        "scenario", [](Config& c) -> LabelScenario& { return c.scenario.scenario; },
        {{LabelScenario::Ecommerce, "ecommerce"}, {LabelScenario::Video, "video"}, {LabelScenario::Movie, "movie"}}));
    e.push_back({"start_time", [](const Config& c) { return std::to_string(c.scenario.start_time); },
                 [](Config& c, std::string_view v) { c.scenario.start_time = parse_int(v); }});
    e.push_back(size_entry("n_geo", &Config::scenario, &ScenarioSpec::n_geo));
    // label weights
    e.push_back(weight_entry("label_click", [](Config& c) -> double& { return c.labels.ecommerce.click; }));
    e.push_back(weight_entry("label_cart", [](Config& c) -> double& { return c.labels.ecommerce.cart; }));
    e.push_back(weight_entry("label_purchase", [](Config& c) -> double& { return c.labels.ecommerce.purchase; }));
    e.push_back(weight_entry("label_comment", [](Config& c) -> double& { return c.labels.ecommerce.comment; }));
    e.push_back(weight_entry("video_completion", [](Config& c) -> double& { return c.labels.video.completion; }));
    e.push_back(weight_entry("video_like", [](Config& c) -> double& { return c.labels.video.like; }));
    e.push_back(weight_entry("video_comment", [](Config& c) -> double& { return c.labels.video.comment; }));
    e.push_back(weight_entry("video_share", [](Config& c) -> double& { return c.labels.video.share; }));
    return e;
  }();
  return entries;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.push_back(e.key);
  return keys;
}

Config parse_config(std::string_view text, std::set<std::string>* explicit_keys) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& entries = registry();
    auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.key == key; });
    if (it == entries.end()) throw ParseError(line_no, "unknown config key '" + std::string(key) + "'");
    try {
      it->set(cfg, value);
    } catch (const ParseError& e) {
      throw ParseError(line_no, std::string(key) + ": " + e.what());
    }
    if (explicit_keys) explicit_keys->insert(std::string(key));
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path, std::set<std::string>* explicit_keys) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), explicit_keys);
}

std::string render_config(const Config& cfg) {
  std::string out;
  for (const auto& e : registry()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

}  // namespace timgen
