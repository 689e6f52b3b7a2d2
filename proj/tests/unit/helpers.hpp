#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "timgen/config.hpp"
#include "timgen/encoding.hpp"
#include "timgen/numerics/functions.hpp"
#include "timgen/numerics/tape.hpp"

namespace timgen::test {

/// Small model that still exercises every component.
inline ModelConfig tiny_model() {
  ModelConfig m;
  m.encoder.d_action = 3;
  m.encoder.d_device = 2;
  m.encoder.d_platform = 2;
  m.encoder.d_geo = 2;
  m.encoder.geo_vocab = 8;
  m.encoder.d_abs = 4;
  m.encoder.d_gap = 2;
  m.encoder.gap_buckets = 16;
  m.encoder.modality_dims = {4, 3, 2, 3};
  m.encoder.max_len = 16;
  m.transformer.d_model = 8;
  m.transformer.n_heads = 2;
  m.transformer.n_layers = 2;
  m.transformer.d_ff = 12;
  m.generation.d_latent = 4;
  m.generation.d_hidden = 8;
  m.generation.n_classes = 3;
  return m;
}

/// Random time-ordered history; every interaction carries at least one modality.
inline std::vector<Interaction> random_history(const ModelConfig& m, std::size_t n, Rng& rng,
                                               const std::string& user = "u") {
  std::vector<Interaction> h;
  std::int64_t ts = 1704067200 + static_cast<std::int64_t>(rng.below(86400 * 30));
  for (std::size_t t = 0; t < n; ++t) {
    Interaction x;
    x.user_id = user;
    x.item_id = "i" + std::to_string(rng.below(1000));
    x.action = static_cast<ActionType>(rng.below(kActionCount));
    x.context = {static_cast<Device>(rng.below(kDeviceCount)), static_cast<Platform>(rng.below(kPlatformCount)),
                 static_cast<std::int64_t>(rng.below(m.encoder.geo_vocab))};
    ts += static_cast<std::int64_t>(rng.below(3 * 86400));
    x.timestamp = ts;
    const auto forced = rng.below(kModalityCount);
    for (std::size_t k = 0; k < kModalityCount; ++k) {
      if (k != forced && !rng.bernoulli(0.6)) continue;
      std::vector<double> v(m.encoder.modality_dims[k]);
      for (double& e : v) e = rng.normal();
      x.modalities[k] = std::move(v);
    }
    x.score_label = rng.uniform(0.0, 5.0);
    x.class_label = static_cast<std::int64_t>(rng.below(m.generation.n_classes));
    h.push_back(std::move(x));
  }
  return h;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("timgen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Checks the tape gradient of `build` (which returns a 1x1 loss) against
/// central differences over every entry of every parameter in `store`.
inline double max_gradient_error(ParamStore& store, const std::function<ad::Var(ad::Tape&)>& build,
                                 double h = 1e-5) {
  Gradients grads(store);
  {
    ad::Tape tape(&store);
    tape.backward(build(tape), grads);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto id = store.id(i);
    auto values = store.value(id).data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double keep = values[e];
      auto eval = [&](double v) {
        values[e] = v;
        ad::Tape tape(&store);
        return build(tape).value()[0];
      };
      const double numeric = (eval(keep + h) - eval(keep - h)) / (2.0 * h);
      values[e] = keep;
      worst = std::max(worst, relative_error(std::as_const(grads)[id].data()[e], numeric));
    }
  }
  return worst;
}

}  // namespace timgen::test
