#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "timgen/config.hpp"
#include "timgen/dataset_io.hpp"

namespace timgen {

struct SyntheticDataset {
  std::vector<Interaction> records;  ///< grouped by user, time ordered
  std::vector<TruthRecord> truth;    ///< one per record, same order
  std::vector<std::size_t> class_histogram;
  std::size_t change_points = 0;
  /// Mean |score shift| across change points minus the same within regimes.
  double change_point_contrast = 0.0;
};

/// Regime-switching users over a class-structured item catalog.
///
/// Each user holds a latent class that switches to a different class with
/// probability rho per step. Items are drawn from the current class (or any
/// other class with probability `explore`); their modality embeddings mix a
/// class centroid into item-specific noise, restricted to the salient modality
/// when the class has one. Inter-arrival times are log-normal with a 6 hour
/// median and twice the activity on weekends. Scores follow the scenario's
/// label formula driven by the user's affinity for the item's class.
///
/// Throws ValidationError on an invalid scenario, or when rho > 0 and the
/// labels show no shift across change points.
SyntheticDataset generate_dataset(const Config& cfg, std::uint64_t seed);

/// Fraction of steps where predicted == truth. Throws ValidationError on a
/// length mismatch or an empty evaluation set.
double drift_recovery_score(std::span<const std::int64_t> predicted,
                            std::span<const std::int64_t> truth);

}  // namespace timgen
