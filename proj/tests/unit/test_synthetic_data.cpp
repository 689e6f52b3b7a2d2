#include <map>

#include "helpers.hpp"
#include "timgen/dataset_io.hpp"
#include "timgen/errors.hpp"
#include "timgen/synthetic_data.hpp"

using namespace timgen;

namespace {

Config small_scenario(double rho) {
  Config cfg;
  cfg.scenario.users = 30;
  cfg.scenario.steps_min = 10;
  cfg.scenario.steps_max = 20;
  cfg.scenario.items_per_class = 20;
  cfg.scenario.rho = rho;
  return cfg;
}

std::map<std::string, std::vector<TruthRecord>> by_user(const SyntheticDataset& d) {
  std::map<std::string, std::vector<TruthRecord>> out;
  for (const auto& t : d.truth) out[t.user_id].push_back(t);
  return out;
}

}  // namespace

TEST_CASE("no drift keeps every user's class") {
  const auto d = generate_dataset(small_scenario(0.0), 1);
  CHECK(d.change_points == 0);
  for (const auto& [user, steps] : by_user(d))
    for (const auto& t : steps) CHECK(t.true_class == steps.front().true_class);
}

TEST_CASE("full drift switches class every step") {
  const auto d = generate_dataset(small_scenario(1.0), 2);
  for (const auto& [user, steps] : by_user(d))
    for (std::size_t i = 1; i < steps.size(); ++i) CHECK(steps[i].true_class != steps[i - 1].true_class);
}

TEST_CASE("dataset structure") {
  auto cfg = small_scenario(0.2);
  const auto d = generate_dataset(cfg, 3);
  REQUIRE(d.records.size() == d.truth.size());
  std::size_t total = 0;
  for (auto c : d.class_histogram) total += c;
  CHECK(total == d.records.size());
  std::map<std::string, std::int64_t> last_ts;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& x = d.records[i];
    CHECK_NOTHROW(validate_interaction(x, cfg.model.encoder));
    CHECK(x.user_id == d.truth[i].user_id);
    CHECK((x.class_label >= 0 && x.class_label < 4));
    CHECK((d.truth[i].true_class >= 0 && d.truth[i].true_class < 4));
    if (last_ts.contains(x.user_id)) CHECK(x.timestamp > last_ts[x.user_id]);
    last_ts[x.user_id] = x.timestamp;
  }
  for (const auto& [user, steps] : by_user(d)) {
    CHECK(steps.size() >= 10);
    CHECK(steps.size() <= 20);
  }
}

TEST_CASE("weekend activity is higher") {
  auto cfg = small_scenario(0.1);
  cfg.scenario.users = 200;
  const auto d = generate_dataset(cfg, 4);
  std::array<std::size_t, 7> per_day{};
  for (const auto& x : d.records) ++per_day[static_cast<std::size_t>(day_of_week(x.timestamp))];
  const double weekend = static_cast<double>(per_day[0] + per_day[6]) / 2.0;
  const double weekday = static_cast<double>(per_day[1] + per_day[2] + per_day[3] + per_day[4] + per_day[5]) / 5.0;
  CHECK(weekend > 1.3 * weekday);
}

TEST_CASE("salience restricts the class signal to one modality") {
  auto cfg = small_scenario(0.1);
  cfg.scenario.salience = {ModalityKind::Audio, std::nullopt, std::nullopt, std::nullopt};
  const auto d = generate_dataset(cfg, 5);
  for (const auto& x : d.records)
    if (x.class_label == 0) CHECK(x.modalities[index_of(ModalityKind::Audio)].has_value());
}

TEST_CASE("determinism and files") {
  const auto cfg = small_scenario(0.2);
  const auto a = generate_dataset(cfg, 6);
  const auto b = generate_dataset(cfg, 6);
  const auto dir = test::temp_dir("synthetic");
  write_dataset(a.records, dir / "a.jsonl");
  write_dataset(b.records, dir / "b.jsonl");
  write_truth(a.truth, dir / "a.tsv");
  write_truth(b.truth, dir / "b.tsv");
  CHECK(test::read_file(dir / "a.jsonl") == test::read_file(dir / "b.jsonl"));
  CHECK(test::read_file(dir / "a.tsv") == test::read_file(dir / "b.tsv"));
  write_dataset(generate_dataset(cfg, 7).records, dir / "c.jsonl");
  CHECK(test::read_file(dir / "a.jsonl") != test::read_file(dir / "c.jsonl"));
}

TEST_CASE("scores shift at change points") {
  const auto d = generate_dataset(small_scenario(0.2), 8);
  CHECK(d.change_points >= 20);
  CHECK(d.change_point_contrast > 0.0);
}

TEST_CASE("invalid scenarios") {
  auto cfg = small_scenario(-0.1);
  CHECK_THROWS_AS(generate_dataset(cfg, 1), ValidationError);
  cfg = small_scenario(0.1);
  cfg.scenario.steps_max = 5;
  CHECK_THROWS_AS(generate_dataset(cfg, 1), ValidationError);
}

TEST_CASE("drift recovery score") {
  const std::vector<std::int64_t> truth = {0, 1, 2, 3, 3, 2};
  CHECK(drift_recovery_score(truth, truth) == 1.0);
  CHECK(drift_recovery_score(std::vector<std::int64_t>{0, 0, 0, 0, 0, 0}, truth) == 1.0 / 6.0);
  CHECK_THROWS_AS(drift_recovery_score(std::vector<std::int64_t>{0}, truth), ValidationError);
  CHECK_THROWS_AS(drift_recovery_score({}, {}), ValidationError);

  Rng rng(9);
  std::vector<std::int64_t> t(2000), p(2000);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<std::int64_t>(rng.below(4));
    p[i] = static_cast<std::int64_t>(rng.below(4));
  }
  CHECK(std::abs(drift_recovery_score(p, t) - 0.25) < 0.04);
}
