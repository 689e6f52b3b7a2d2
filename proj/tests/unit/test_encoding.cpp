#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "timgen/errors.hpp"

using namespace timgen;

namespace {

struct Fixture {
  ModelConfig m = test::tiny_model();
  ParamStore store;
  EncodingParams p;
  Fixture() {
    Rng rng(1);
    p = EncodingParams::create(store, m.encoder, rng);
  }
  const EncoderConfig& enc() const { return m.encoder; }
};

Interaction simple(std::int64_t ts) {
  Interaction x;
  x.user_id = "u";
  x.item_id = "i";
  x.timestamp = ts;
  x.modalities[0] = std::vector<double>{1, 2, 3, 4};
  return x;
}

}  // namespace

TEST_CASE("embed_action looks up one row") {
  Fixture f;
  f.store.value(f.p.action) = Matrix(5, 3);
  for (std::size_t r = 0; r < 5; ++r) f.store.value(f.p.action)(r, r % 3) = static_cast<double>(r + 1);
  CHECK(embed_action(ActionType::Click, f.store, f.p) == std::vector<double>{1, 0, 0});
  CHECK(embed_action(ActionType::Comment, f.store, f.p) == std::vector<double>{0, 5, 0});
  CHECK(embed_action(ActionType::View, f.store, f.p) == embed_action(ActionType::View, f.store, f.p));
}

TEST_CASE("encode_context concatenates device, platform, geo") {
  Fixture f;
  const auto v = encode_context({Device::PC, Platform::Web, 0}, f.store, f.p, f.enc());
  CHECK(v.size() == f.enc().context_dim());
  std::vector<double> expected;
  for (auto id : {f.p.device, f.p.platform, f.p.geo}) {
    const auto row = f.store.value(id).row(0);
    expected.insert(expected.end(), row.begin(), row.end());
  }
  CHECK(v == expected);

  const auto w = encode_context({Device::Tablet, Platform::Web, 0}, f.store, f.p, f.enc());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i >= f.enc().d_device) CHECK(v[i] == w[i]);
  }
  CHECK(v != w);
  CHECK_THROWS_AS(encode_context({Device::PC, Platform::Web, 8}, f.store, f.p, f.enc()), OutOfVocabulary);
  CHECK_THROWS_AS(encode_context({Device::PC, Platform::Web, -1}, f.store, f.p, f.enc()), OutOfVocabulary);
}

TEST_CASE("encode_abs_time") {
  EncoderConfig cfg;
  const auto zero = encode_abs_time(0, cfg);
  REQUIRE(zero.size() == cfg.d_abs);
  for (std::size_t i = 0; i < zero.size(); ++i) CHECK(zero[i] == (i % 2 == 0 ? 0.0 : 1.0));
  for (double v : encode_abs_time(1000000000, cfg)) CHECK((v >= -1.0 && v <= 1.0));
  CHECK(cfg.frequency(0) == 1.0);
  CHECK(cfg.frequency(1) == doctest::Approx(std::pow(10000.0, -2.0 / 8.0)));
  // t_days = pi / omega_0 = pi days = 271433.6 s; the nearest whole second is within 1e-5 of pi.
  const auto half_turn = encode_abs_time(271434, cfg);
  const double days = 271434.0 / 86400.0;
  CHECK(std::abs(half_turn[0] - std::sin(days)) < 1e-15);
  CHECK(std::abs(half_turn[0]) < 1e-5);
  CHECK(std::abs(half_turn[1] + 1.0) < 1e-9);
}

TEST_CASE("time gap buckets") {
  EncoderConfig cfg;
  CHECK(time_gap_bucket(100, 100, cfg) == 0);
  CHECK(time_gap_bucket(86400, 0, cfg) == 11);
  CHECK(time_gap_bucket(1000000000000, 0, cfg) == 27);
  EncoderConfig narrow;
  narrow.gap_buckets = 12;
  CHECK(time_gap_bucket(1000000000000, 0, narrow) == 11);
  CHECK(time_gap_bucket(86400, 0, narrow) == 11);
  CHECK_THROWS_AS(time_gap_bucket(5, 6, cfg), OrderingError);
  Fixture f;
  const auto e = encode_time_gap(10, 10, f.store, f.p, f.enc());
  const auto row = f.store.value(f.p.gap).row(0);
  CHECK(e == std::vector<double>(row.begin(), row.end()));
}

TEST_CASE("encode_cycle") {
  CHECK(day_of_week(0) == 4);            // Thursday
  CHECK(day_of_week(1704067200) == 1);   // Monday 2024-01-01
  CHECK(day_of_week(3 * 86400) == 0);    // Sunday 1970-01-04
  const auto sunday = encode_cycle(3 * 86400);
  CHECK(sunday[0] == 0.0);
  CHECK(sunday[1] == 1.0);
  const auto wednesday = encode_cycle(6 * 86400);  // day_of_week 3
  CHECK(std::abs(wednesday[0] - 0.433883739117558120) < 1e-12);
  CHECK(std::abs(wednesday[1] + 0.900968867902419126) < 1e-12);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto c = encode_cycle(static_cast<std::int64_t>(rng.below(2000000000)));
    CHECK(std::abs(c[0] * c[0] + c[1] * c[1] - 1.0) < 1e-12);
  }
}

TEST_CASE("encode_interaction layout and validation") {
  Fixture f;
  Rng rng(3);
  const auto h = test::random_history(f.m, 6, rng);
  for (std::size_t t = 1; t < h.size(); ++t) {
    const auto e = encode_interaction(h[t], h[t - 1].timestamp, f.store, f.p, f.enc());
    CHECK(e.features.size() == f.enc().input_dim());
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      CHECK(e.present[m] == h[t].modalities[m].has_value());
      const auto off = f.enc().modality_block_offset() + f.enc().modality_offset(kAllModalities[m]);
      if (!h[t].modalities[m]) {
        for (std::size_t k = 0; k < f.enc().modality_dims[m]; ++k) CHECK(e.features[off + k] == 0.0);
      }
    }
  }

  Interaction none = simple(100);
  none.modalities[0].reset();
  CHECK_THROWS_AS(encode_interaction(none, 100, f.store, f.p, f.enc()), InvalidArgument);
  Interaction wrong = simple(100);
  wrong.modalities[1] = std::vector<double>{1.0};
  CHECK_THROWS_AS(encode_interaction(wrong, 100, f.store, f.p, f.enc()), InvalidArgument);
}

TEST_CASE("swapping timestamps only touches the time segment") {
  Fixture f;
  Interaction a = simple(1704067200), b = simple(1704500000);
  b.action = ActionType::Like;
  const auto ea = encode_interaction(a, 1704000000, f.store, f.p, f.enc()).features;
  std::swap(a.timestamp, b.timestamp);
  const auto ea2 = encode_interaction(a, 1704000000, f.store, f.p, f.enc()).features;
  const std::size_t begin = f.enc().d_action + f.enc().context_dim();
  const std::size_t end = begin + f.enc().time_dim();
  bool time_changed = false;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    if (i >= begin && i < end) {
      time_changed |= ea[i] != ea2[i];
    } else {
      CHECK(ea[i] == ea2[i]);
    }
  }
  CHECK(time_changed);
}

TEST_CASE("encode_sequence") {
  Fixture f;
  Rng rng(4);
  const auto h = test::random_history(f.m, 8, rng);

  const auto one = encode_sequence(std::span(h).first(1), f.store, f.p, f.enc());
  CHECK(one.features.rows() == 1);
  CHECK(one.features.cols() == f.enc().input_dim());
  const auto prepared = prepare_sequence(std::span(h).first(1), f.enc());
  CHECK(prepared.gap_bucket[0] == 0);

  const auto full = encode_sequence(h, f.store, f.p, f.enc());
  for (std::size_t t = 1; t <= h.size(); ++t) {
    const auto prefix = encode_sequence(std::span(h).first(t), f.store, f.p, f.enc());
    for (std::size_t r = 0; r < t; ++r) CHECK(prefix.features.row_copy(r) == full.features.row_copy(r));
  }
  for (std::size_t t = 1; t < h.size(); ++t) {
    CHECK(full.features.row_copy(t) == encode_interaction(h[t], h[t - 1].timestamp, f.store, f.p, f.enc()).features);
  }

  const auto too_long = test::random_history(f.m, f.enc().max_len + 1, rng);
  CHECK_THROWS_AS(encode_sequence(too_long, f.store, f.p, f.enc()), LengthError);
  CHECK_THROWS_AS(encode_sequence({}, f.store, f.p, f.enc()), InvalidArgument);
  auto unordered = h;
  std::swap(unordered[2], unordered[5]);
  CHECK_THROWS_AS(encode_sequence(unordered, f.store, f.p, f.enc()), OrderingError);
}

TEST_CASE("candidate features match the modality block") {
  Fixture f;
  Rng rng(5);
  const auto h = test::random_history(f.m, 4, rng);
  const auto seq = prepare_sequence(h, f.enc());
  for (std::size_t t = 0; t < h.size(); ++t) CHECK(candidate_features(h[t], f.enc()) == seq.modality_row(t));
}

TEST_CASE("wire names round-trip") {
  for (std::size_t i = 0; i < kActionCount; ++i) {
    const auto a = static_cast<ActionType>(i);
    CHECK(parse_action(action_name(a)) == a);
  }
  for (std::size_t i = 0; i < kDeviceCount; ++i) {
    const auto d = static_cast<Device>(i);
    CHECK(parse_device(device_name(d)) == d);
  }
  for (std::size_t i = 0; i < kPlatformCount; ++i) {
    const auto p = static_cast<Platform>(i);
    CHECK(parse_platform(platform_name(p)) == p);
  }
  CHECK(!parse_action("Click").has_value());
  CHECK(parse_platform("miniapp") == Platform::MiniApp);
}
