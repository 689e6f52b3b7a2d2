#include "timgen/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "timgen/checkpoint.hpp"
#include "timgen/dataset_io.hpp"
#include "timgen/errors.hpp"
#include "timgen/format.hpp"
#include "timgen/gradcheck.hpp"
#include "timgen/synthetic_data.hpp"
#include "timgen/training.hpp"

namespace timgen {

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

std::uint64_t env_seed() {
  const char* value = std::getenv("TIMGEN_SEED");
  if (value == nullptr || *value == '\0') return kDefaultSeed;
  const auto parsed = parse_int(value);
  if (parsed < 0) throw ValidationError("TIMGEN_SEED must be non-negative");
  return static_cast<std::uint64_t>(parsed);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) { return flag ? *flag : env_seed(); }

/// Loads a config file; the seed falls back to TIMGEN_SEED when the file does not set one.
Config load_run_config(const std::optional<std::string>& path) {
  std::set<std::string> explicit_keys;
  Config cfg = path ? load_config(*path, &explicit_keys) : Config{};
  if (!explicit_keys.contains("seed")) cfg.train.seed = env_seed();
  cfg.validate();
  return cfg;
}

void print_config(const Config& cfg, std::ostream& err) {
  std::istringstream lines(render_config(cfg));
  for (std::string line; std::getline(lines, line);) err << "# " << line << '\n';
}

std::vector<Example> examples_for(const std::vector<UserSequence>& users, std::span<const std::size_t> indices,
                                  const Config& cfg) {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(make_example(users[i].history, cfg.model, cfg.train.targets));
  return out;
}

std::string epoch_line(const EpochLog& log) {
  return "epoch\t" + std::to_string(log.epoch) + "\ttotal\t" + format_double(log.mean.total) + "\tvae\t" +
         format_double(log.mean.vae) + "\tscore\t" + format_double(log.mean.score) + "\tclass\t" +
         format_double(log.mean.class_ce);
}

/// Pooled states must not depend on the order of the encoded rows.
bool static_order_invariant(const Model& model, std::span<const Interaction> history) {
  const auto& cfg = model.config();
  const auto encoded = encode_sequence(history, model.params(), model.layout().encoding, cfg.encoder);
  Matrix reversed(encoded.features.rows(), encoded.features.cols());
  for (std::size_t r = 0; r < reversed.rows(); ++r) {
    const auto src = encoded.features.row(encoded.features.rows() - 1 - r);
    std::copy(src.begin(), src.end(), reversed.row(r).begin());
  }
  const Matrix a = static_states(model, encoded.features);
  const Matrix b = static_states(model, reversed);
  return a.row_copy(a.rows() - 1) == b.row_copy(b.rows() - 1);
}

int cmd_gen_data(const std::string& spec, const std::string& out_dir, std::uint64_t seed, std::ostream& out) {
  const Config cfg = load_config(spec);
  const auto data = generate_dataset(cfg, seed);
  std::filesystem::create_directories(out_dir);
  const auto data_path = std::filesystem::path(out_dir) / "interactions.jsonl";
  const auto truth_path = std::filesystem::path(out_dir) / "truth.tsv";
  write_dataset(data.records, data_path);
  write_truth(data.truth, truth_path);
  out << "users\t" << cfg.scenario.users << '\n';
  out << "interactions\t" << data.records.size() << '\n';
  out << "change_points\t" << data.change_points << '\n';
  out << "change_point_contrast\t" << format_double(data.change_point_contrast) << '\n';
  for (std::size_t c = 0; c < data.class_histogram.size(); ++c)
    out << "class_" << c << '\t' << data.class_histogram[c] << '\n';
  out << "dataset\t" << data_path.string() << '\n' << "truth\t" << truth_path.string() << '\n';
  return kExitOk;
}

int cmd_train(const std::string& data_path, const std::optional<std::string>& config_path,
              const std::string& ckpt, const std::optional<std::string>& baseline,
              const std::optional<std::string>& log_path, const std::optional<std::string>& positional,
              std::ostream& out, std::ostream& err) {
  Config cfg = load_run_config(config_path);
  if (positional) {
    cfg.model.transformer.positional = *positional == "extra" ? PositionalMode::Extra : PositionalMode::None;
  }
  if (baseline) {
    if (*baseline != "static") throw ValidationError("unknown baseline '" + *baseline + "'");
    cfg.model.variant = ModelVariant::StaticBaseline;
  }
  print_config(cfg, err);
  const auto users = group_by_user(read_dataset(data_path));
  const auto split = split_users(users.size(), cfg.train.train_fraction, cfg.train.val_fraction, cfg.train.seed);
  if (split.train.empty()) throw ValidationError("no training users after the split");
  const auto train = examples_for(users, split.train, cfg);

  Model model(cfg.model, cfg.train.seed);
  if (cfg.model.variant == ModelVariant::StaticBaseline &&
      !static_order_invariant(model, users[split.train.front()].history)) {
    err << "static baseline is not order invariant\n";
    return kExitCheckFailed;
  }

  std::ofstream log;
  if (log_path) {
    log.open(*log_path, std::ios::binary);
    if (!log) throw ValidationError("cannot open log file " + *log_path);
  }
  fit(model, train, cfg.train, [&](const EpochLog& entry) {
    const auto line = epoch_line(entry);
    out << line << '\n';
    if (log) log << line << '\n';
  });
  save_checkpoint(model, cfg, ckpt);
  if (!split.validation.empty()) {
    const auto report = evaluate(model, examples_for(users, split.validation, cfg), cfg.train);
    err << "# validation score_mse " << format_double(report.score_mse) << " class_accuracy "
        << format_double(report.class_accuracy) << '\n';
  }
  out << "checkpoint\t" << ckpt << '\n';
  return kExitOk;
}

std::span<const std::size_t> select_split(const DataSplit& split, const std::vector<std::size_t>& all,
                                          const std::string& name) {
  if (name == "train") return split.train;
  if (name == "validation") return split.validation;
  if (name == "test") return split.test;
  if (name == "all") return all;
  throw ValidationError("unknown split '" + name + "'");
}

int cmd_eval(const std::string& data_path, const std::string& ckpt_path, const std::optional<std::string>& truth_path,
             const std::string& split_name, std::ostream& out) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const Config& cfg = ckpt.config;
  const auto users = group_by_user(read_dataset(data_path));
  const auto split = split_users(users.size(), cfg.train.train_fraction, cfg.train.val_fraction, cfg.train.seed);
  std::vector<std::size_t> all(users.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto indices = select_split(split, all, split_name);
  if (indices.empty()) throw ValidationError("split '" + split_name + "' is empty");
  const auto report = evaluate(ckpt.model, examples_for(users, indices, cfg), cfg.train);
  out << report.render();
  if (!truth_path) return kExitOk;

  std::map<std::pair<std::string, std::size_t>, std::int64_t> truth;
  for (const auto& t : read_truth(*truth_path)) truth[{t.user_id, t.step}] = t.true_class;
  std::vector<std::int64_t> predicted, expected;
  const std::size_t k = cfg.n_classes();
  std::vector<ModalityWeights> alpha_sum(k, ModalityWeights{});
  std::vector<std::size_t> alpha_count(k, 0);
  for (const auto& p : report.predictions) {
    const auto it = truth.find({p.user_id, p.step});
    if (it == truth.end()) {
      throw ValidationError("truth file has no entry for user " + p.user_id + " step " + std::to_string(p.step));
    }
    if (it->second < 0 || static_cast<std::size_t>(it->second) >= k) {
      throw ValidationError("truth class out of range for user " + p.user_id);
    }
    predicted.push_back(p.predicted_class);
    expected.push_back(it->second);
    const auto c = static_cast<std::size_t>(it->second);
    for (std::size_t m = 0; m < kModalityCount; ++m) alpha_sum[c][m] += p.alpha[m];
    ++alpha_count[c];
  }
  out << "drift_recovery\t" << format_double(drift_recovery_score(predicted, expected)) << '\n';
  for (std::size_t c = 0; c < k; ++c) {
    for (auto kind : kAllModalities) {
      const double mean = alpha_count[c] == 0 ? 0.0 : alpha_sum[c][index_of(kind)] / static_cast<double>(alpha_count[c]);
      out << "alpha_class" << c << '_' << modality_name(kind) << '\t' << format_double(mean) << '\n';
    }
  }
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, double tolerance, std::ostream& out, std::ostream& err) {
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  const auto report = gradient_check(seed);
  for (const auto& g : report.groups) {
    out << g.name << '\t' << g.entries << '\t' << format_double(g.max_rel_error) << '\n';
  }
  out << "max_rel_error\t" << format_double(report.max_rel_error) << '\n';
  if (report.passed(tolerance)) return kExitOk;
  auto groups = report.groups;
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.max_rel_error > b.max_rel_error; });
  err << "gradient check failed at tolerance " << format_double(tolerance) << "; worst offenders:\n";
  for (const auto& g : groups) {
    if (g.max_rel_error < tolerance) break;
    err << "  " << g.name << '[' << g.worst_entry << "] analytic " << format_double(g.analytic) << " numeric "
        << format_double(g.numeric) << " rel " << format_double(g.max_rel_error) << '\n';
  }
  return kExitCheckFailed;
}

int cmd_generate(const std::string& ckpt_path, const std::string& history_path, const std::string& candidate_id,
                 const std::optional<std::string>& catalog_path, bool sample, std::uint64_t seed,
                 std::ostream& out) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto& enc = ckpt.config.model.encoder;
  const auto history_records = read_dataset(history_path);
  const auto users = group_by_user(history_records);
  if (users.size() != 1) throw ValidationError("history must contain exactly one user");
  const auto& history = users.front().history;

  // Candidate pool: catalog items first, then history items, keeping first occurrence.
  std::vector<Interaction> pool;
  std::set<std::string> seen;
  auto add_items = [&](const std::vector<Interaction>& records) {
    for (const auto& r : records)
      if (seen.insert(r.item_id).second) pool.push_back(r);
  };
  if (catalog_path) add_items(read_dataset(*catalog_path));
  add_items(history_records);
  const auto cand = std::find_if(pool.begin(), pool.end(), [&](const auto& r) { return r.item_id == candidate_id; });
  if (cand == pool.end()) throw ValidationError("unknown candidate item '" + candidate_id + "'");

  Rng rng(seed);
  const auto gen = generate(ckpt.model, history, candidate_features(*cand, enc), sample ? &rng : nullptr);
  out << "candidate\t" << candidate_id << '\n';
  out << "score\t" << format_double(gen.output.score) << '\n';
  for (std::size_t c = 0; c < gen.output.class_probs.size(); ++c)
    out << "class_" << c << '\t' << format_double(gen.output.class_probs[c]) << '\n';

  std::string nearest;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& item : pool) {
    const auto f = candidate_features(item, enc);
    double d = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) d += (f[i] - gen.output.content[i]) * (f[i] - gen.output.content[i]);
    if (d < best) {
      best = d;
      nearest = item.item_id;
    }
  }
  out << "nearest_item\t" << nearest << '\n';
  for (auto kind : kAllModalities)
    out << "alpha_" << modality_name(kind) << '\t' << format_double(gen.alpha[index_of(kind)]) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal multimodal interest modeling and generation"};
  app.require_subcommand(1);

  std::string spec, out_dir, data, ckpt, history, candidate, split = "test";
  std::optional<std::string> config_path, baseline, log_path, truth, catalog, positional;
  std::optional<std::uint64_t> seed;
  double tolerance = 1e-4;
  bool sample = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic drift dataset");
  gen->add_option("--spec", spec, "Scenario config file")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "Generator seed (default: TIMGEN_SEED or 42)");

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("--data", data, "Dataset file")->required();
  train->add_option("--config", config_path, "Config file");
  train->add_option("--out", ckpt, "Checkpoint path")->required();
  train->add_option("--baseline", baseline, "Train the static mean-pooling baseline")->check(CLI::IsMember({"static"}));
  train->add_option("--log", log_path, "Also write per-epoch losses to this file");
  train->add_option("--positional", positional, "Override positional encoding: extra | none")
      ->check(CLI::IsMember({"extra", "none"}));

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--data", data, "Dataset file")->required();
  eval->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  eval->add_option("--truth", truth, "Ground-truth file for drift recovery");
  eval->add_option("--split", split, "train | validation | test | all")->capture_default_str();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  grad->add_option("--seed", seed, "Seed (default: TIMGEN_SEED or 42)");
  grad->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();

  auto* generate_cmd = app.add_subcommand("generate", "Generate for one candidate item");
  generate_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  generate_cmd->add_option("--history", history, "Single-user history file")->required();
  generate_cmd->add_option("--candidate", candidate, "Candidate item id")->required();
  generate_cmd->add_option("--catalog", catalog, "Dataset file with candidate items");
  generate_cmd->add_flag("--sample", sample, "Draw eps instead of eps = 0");
  generate_cmd->add_option("--seed", seed, "Sampling seed (default: TIMGEN_SEED or 42)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) return cmd_gen_data(spec, out_dir, resolve_seed(seed), out);
    if (*train) return cmd_train(data, config_path, ckpt, baseline, log_path, positional, out, err);
    if (*eval) return cmd_eval(data, ckpt, truth, split, out);
    if (*grad) return cmd_gradcheck(resolve_seed(seed), tolerance, out, err);
    if (*generate_cmd) return cmd_generate(ckpt, history, candidate, catalog, sample, resolve_seed(seed), out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace timgen
