#include "helpers.hpp"
#include "timgen/checkpoint.hpp"
#include "timgen/errors.hpp"
#include "timgen/training.hpp"

using namespace timgen;

namespace {

struct Saved {
  Config cfg;
  Model model;
  std::filesystem::path dir;
  std::filesystem::path path;
};

Saved save_tiny(const std::string& name) {
  Config cfg;
  cfg.model = test::tiny_model();
  cfg.train.epochs = 3;
  Saved s{cfg, Model(cfg.model, 5), test::temp_dir(name), {}};
  s.path = s.dir / "m.ckpt";
  Rng rng(1);
  std::vector<Example> data;
  for (int u = 0; u < 3; ++u) data.push_back(make_example(test::random_history(cfg.model, 6, rng), cfg.model, TargetMode::AllPrefixes));
  fit(s.model, data, cfg.train);
  save_checkpoint(s.model, cfg, s.path);
  return s;
}

/// Rewrites the checkpoint without the tensor on the last manifest line.
std::string drop_last_tensor(const std::string& bytes, std::size_t last_entries) {
  const auto tensors = bytes.find("tensors ");
  const auto count_end = bytes.find('\n', tensors);
  const auto n = std::stoul(bytes.substr(tensors + 8, count_end - tensors - 8));
  const auto data = bytes.find("\ndata\n");
  const auto last_line = bytes.rfind('\n', data - 1);
  std::string out = bytes.substr(0, tensors) + "tensors " + std::to_string(n - 1) +
                    bytes.substr(count_end, last_line - count_end) + bytes.substr(data);
  return out.substr(0, out.size() - 8 * last_entries);
}

}  // namespace

TEST_CASE("round-trip preserves parameters and evaluation") {
  const auto s = save_tiny("ckpt_roundtrip");
  const auto loaded = load_checkpoint(s.path);
  CHECK(loaded.model.params() == s.model.params());
  CHECK(render_config(loaded.config) == render_config(s.cfg));
  Rng rng(2);
  std::vector<Example> eval;
  for (int u = 0; u < 3; ++u) eval.push_back(make_example(test::random_history(s.cfg.model, 6, rng), s.cfg.model, TargetMode::AllPrefixes));
  CHECK(evaluate(loaded.model, eval, s.cfg.train).render() == evaluate(s.model, eval, s.cfg.train).render());
  save_checkpoint(loaded.model, loaded.config, s.dir / "again.ckpt");
  CHECK(test::read_file(s.dir / "again.ckpt") == test::read_file(s.path));
}

TEST_CASE("corrupted checkpoints raise distinct errors") {
  const auto s = save_tiny("ckpt_corrupt");
  const auto bytes = test::read_file(s.path);
  CHECK(bytes.rfind(std::string(kCheckpointMagic), 0) == 0);

  auto bad_magic = bytes;
  bad_magic[6] = '9';
  test::write_file(s.dir / "magic.ckpt", bad_magic);
  CHECK_THROWS_AS(load_checkpoint(s.dir / "magic.ckpt"), CheckpointVersionError);

  test::write_file(s.dir / "short.ckpt", bytes.substr(0, bytes.size() - 13));
  CHECK_THROWS_AS(load_checkpoint(s.dir / "short.ckpt"), CheckpointTruncatedError);
  test::write_file(s.dir / "header.ckpt", bytes.substr(0, 40));
  CHECK_THROWS_AS(load_checkpoint(s.dir / "header.ckpt"), CheckpointTruncatedError);

  const auto& store = s.model.params();
  const auto last = store.value(store.id(store.size() - 1)).size();
  test::write_file(s.dir / "missing.ckpt", drop_last_tensor(bytes, last));
  CHECK_THROWS_AS(load_checkpoint(s.dir / "missing.ckpt"), CheckpointManifestError);

  test::write_file(s.dir / "extra.ckpt", bytes + "12345678");
  CHECK_THROWS_AS(load_checkpoint(s.dir / "extra.ckpt"), CheckpointManifestError);

  auto reshaped = bytes;
  const auto pos = reshaped.find("tf.in.b 1 ");
  REQUIRE(pos != std::string::npos);
  reshaped.replace(pos, 10, "tf.in.b 2 ");
  test::write_file(s.dir / "shape.ckpt", reshaped);
  CHECK_THROWS_AS(load_checkpoint(s.dir / "shape.ckpt"), CheckpointManifestError);

  CHECK_THROWS_AS(load_checkpoint(s.dir / "absent.ckpt"), Error);
}
