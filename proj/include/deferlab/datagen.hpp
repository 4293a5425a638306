#pragma once

// Synthetic deferral instances with a planted classifier/rejector pair, and
// grouped-expert multiclass instances.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "deferlab/core.hpp"

namespace deferlab {

enum class FeatureDistribution { Uniform, GaussianMixture };

struct SyntheticConfig {
  std::size_t d = 30;
  std::size_t n = 1000;
  FeatureDistribution distribution = FeatureDistribution::GaussianMixture;
  double box_u = 1.0;          // U: uniform box / mixture mean range
  int clusters = 10;           // K for the Gaussian mixture
  double p_m = 0.0;            // label noise where r* = 0
  double p_h0 = 0.3;           // human error where r* = 0
  double p_h1 = 0.0;           // human error where r* = 1
  std::uint64_t seed = 0;
  int num_classes = 2;         // > 2 plants one halfspace row per class

  void validate() const;
};

struct PlantedInstance {
  DeferDataset dataset;
  HalfspacePair planted_pair;
};

/// Minimum fraction of sampled points each side of a planted halfspace must hold.
inline constexpr double kPlantedMassFloor = 0.10;

PlantedInstance generate_synthetic(const SyntheticConfig& config);

struct GroupedExpertOptions {
  double mean_spread = 1.0;    // std of the per-class blob centres
  double blob_std = 1.0;       // within-class std per coordinate
};

/// Class-conditional Gaussian blobs with balanced classes; the human is
/// perfect on classes < K and guesses uniformly over all C classes otherwise.
DeferDataset generate_grouped_expert(std::size_t d, std::size_t n, int num_classes,
                                     int expert_strength, std::uint64_t seed,
                                     const GroupedExpertOptions& options = {});

/// key=value sidecar describing a planted instance.
void write_planted_metadata(std::ostream& out, const SyntheticConfig& config,
                            const HalfspacePair& planted);

}  // namespace deferlab
