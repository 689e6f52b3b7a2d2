#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timgen/config.hpp"

namespace timgen {

struct GradCheckGroup {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;  ///< at the worst entry
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;  ///< one per parameter tensor
  double max_rel_error = 0.0;
  std::size_t entries = 0;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

/// d_model 8, one layer and head, d_latent 4, 3 classes, sequences of 4
/// interactions carrying text and image features only.
Config gradcheck_config();

/// Compares the tape gradient of the summed joint loss (fixed eps) with
/// central differences for every parameter entry.
GradCheckReport gradient_check(std::uint64_t seed, double h = 1e-5);

}  // namespace timgen
