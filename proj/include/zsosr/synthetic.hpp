#pragma once

#include <cstdint>

#include "zsosr/dataset.hpp"

namespace zsosr::data {

struct SyntheticWorldConfig {
  std::size_t n_seen = 20;
  std::size_t n_unseen = 5;
  std::size_t n_unknown = 5;
  std::size_t attribute_dim = 16;
  std::size_t feature_dim = 64;
  std::size_t samples_per_class = 200;
  double noise_scale = 0.1;
};

/// A ZSL world with a known ground truth: class attribute prototypes on the
/// unit sphere, feature means given exactly by a fixed linear map of the
/// attributes, isotropic Gaussian features around them. The oracle side
/// (mixing map + noise scale) stays available for tests while the bundle
/// behaves like any loaded dataset.
struct SyntheticWorld {
  DatasetBundle bundle;
  nd::Matrix mixing;  // feature_dim × attribute_dim
  double noise_scale = 0.0;

  /// Exact feature mean of a class: mixing · attributes[class_id].
  std::vector<float> class_mean(std::uint32_t class_id) const;

  /// Fresh class-conditional samples from the true distribution.
  nd::Matrix sample_features(std::uint32_t class_id, std::size_t n,
                             std::uint64_t seed) const;
};

SyntheticWorld synth_world(const SyntheticWorldConfig& config, std::uint64_t seed);

}  // namespace zsosr::data
