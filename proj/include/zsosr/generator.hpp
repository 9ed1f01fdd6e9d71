#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zsosr/dataset.hpp"
#include "zsosr/mlp.hpp"

namespace zsosr::gen {

enum class GeneratorMode { WganClip, Cvae };

std::string generator_mode_name(GeneratorMode m);
GeneratorMode generator_mode_from_name(const std::string& name);

struct GeneratorConfig {
  GeneratorMode mode = GeneratorMode::Cvae;
  std::size_t hidden = 1024;
  std::size_t noise_dim = 0;  // 0 → attribute dim
  std::size_t steps = 2000;
  std::size_t critic_steps = 5;  // wgan: critic updates per generator update
  double clip = 0.01;            // wgan: critic weight clamp
  std::size_t batch = 64;
  double step_size = 1e-3;
  double kl_weight = 1.0;  // cvae

  void validate() const;
};

/// Conditional feature generator: maps [attribute ⊕ noise] to a feature
/// vector.
struct GeneratorModel {
  nd::MlpModel net;
  std::size_t attribute_dim = 0;
  std::size_t noise_dim = 0;
  std::size_t feature_dim = 0;

  /// Row-wise G(a_i, eps_i) for paired attribute and noise rows.
  nd::Matrix generate(const nd::Matrix& attributes, const nd::Matrix& noise) const;
};

/// Critic D(x, a): maps [feature ⊕ attribute] to a scalar.
struct DiscriminatorModel {
  nd::MlpModel net;
};

struct TrainedGenerator {
  GeneratorModel generator;
  std::optional<DiscriminatorModel> critic;  // wgan mode only
  std::vector<double> loss_trace;  // per-step reconstruction error (cvae) or
                                   // critic difference estimate (wgan)
};

/// Trains the conditional generator on seen-class data only. The cvae mode
/// trains an encoder/decoder pair with reconstruction + KL and returns the
/// decoder; the wgan-clip mode alternates clipped critic updates against
/// generator updates on the critic difference.
TrainedGenerator train_generator(const data::TrainingView& view,
                                 const GeneratorConfig& config, std::uint64_t seed);

enum class Provenance { Unseen, Unknown, Variant };

struct SyntheticDataset {
  nd::Matrix features;
  std::vector<std::uint32_t> labels;  // class ids; kUnknownLabel for unknown rows
  Provenance provenance = Provenance::Unseen;
  std::string variant;  // set when provenance == Variant
};

/// n_per_class fresh draws G(a_c, eps) per embedding row. Per-row noise
/// streams are derived from (seed, row index), so synthesis is
/// order-independent and reproducible.
SyntheticDataset synthesize_features(const GeneratorModel& generator,
                                     const nd::Matrix& embeddings,
                                     const std::vector<std::uint32_t>& class_ids,
                                     std::size_t n_per_class, std::uint64_t seed);

}  // namespace zsosr::gen
