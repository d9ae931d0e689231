#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cbm/types.hpp"

namespace cbm {

// Test fixtures with known group structure. Deterministic given the seed:
// draw order is pinned (blobs: all cluster centers first, then per-sample
// noise; manifold: per-sample noise only).
struct SyntheticSpec {
  enum class Kind { gaussian_blobs, circular_manifold };

  Kind kind = Kind::gaussian_blobs;
  int n_samples = 0;
  int dim = 0;
  int n_clusters = 0;  // angular bin count ("period") for the manifold
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidSpec
};

struct SyntheticData {
  FeatureMatrix features;
  std::vector<int> labels;
};

// Blobs: sample i belongs to cluster i*k/n (contiguous blocks), centered at a
// seed-determined N(0, I) center plus isotropic noise. Manifold: unit circle
// in the first two coordinates at angle 2*pi*i/n plus noise; label = angular bin.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Seeded per-query positive/negative draws from ground-truth labels
// (pos: same label, neg: different label, query excluded, no replacement).
// Pools smaller than the requested count are taken whole.
EvalAnnotations make_annotations(const std::vector<int>& labels, int n_pos, int n_neg,
                                 std::uint64_t seed);

}  // namespace cbm
