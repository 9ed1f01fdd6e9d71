#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zsosr/classifier.hpp"
#include "zsosr/generator.hpp"

namespace zsosr::ase {

/// Alternative unknown-feature constructions the full method is compared
/// against.
enum class UnknownStrategy { Mixup, UniformNoise, SemanticNoise, AdversarialFeatures };

std::string strategy_name(UnknownStrategy s);
UnknownStrategy strategy_from_name(const std::string& name);

struct VariantConfig {
  std::size_t count = 5000;  // rows produced by mixup / uniform-noise
  double mixup_lambda_lo = 0.3;
  double mixup_lambda_hi = 0.7;
  double semantic_noise_scale = -1.0;     // < 0 → 0.05 × mean embedding norm
  std::size_t embeddings_per_class = 50;  // semantic-noise
  std::size_t per_embedding = 20;         // semantic-noise
  // adversarial-features: direct feature-space optimization
  std::size_t sample_count = 1000;
  std::size_t steps = 100;
  double step_size = 0.01;
  double temperature = 1.0;
  double anchor_weight = 1.0;  // L2 pull toward the start point
};

struct VariantInputs {
  const gen::SyntheticDataset* unseen_features = nullptr;   // mixup, uniform, adv-feat
  const nd::Matrix* unseen_embeddings = nullptr;            // semantic-noise
  const std::vector<std::uint32_t>* unseen_ids = nullptr;   // semantic-noise
  const gen::GeneratorModel* generator = nullptr;           // semantic-noise
  const gen::ClosedSetClassifier* classifier = nullptr;     // adversarial-features
};

/// Convex combination of two feature rows.
std::vector<float> mix_rows(std::span<const float> a, std::span<const float> b,
                            double lambda);

gen::SyntheticDataset variant_unknowns(UnknownStrategy strategy,
                                       const VariantInputs& inputs,
                                       const VariantConfig& config, std::uint64_t seed);

/// Adversarial-features variant with its optimization trace exposed: mean
/// adversarial energy of the point set before and after optimization.
struct AdversarialFeatureResult {
  gen::SyntheticDataset dataset;
  double initial_mean_energy = 0.0;  // mean adv_energy at the start points
  double final_mean_energy = 0.0;
};

AdversarialFeatureResult adversarial_feature_unknowns(
    const gen::SyntheticDataset& unseen_features,
    const gen::ClosedSetClassifier& classifier, const VariantConfig& config,
    std::uint64_t seed);

}  // namespace zsosr::ase
