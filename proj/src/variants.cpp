#include "zsosr/variants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "zsosr/adam.hpp"
#include "zsosr/ase.hpp"
#include "zsosr/loss.hpp"
#include "zsosr/rng.hpp"

namespace zsosr::ase {

using nd::Matrix;

std::string strategy_name(UnknownStrategy s) {
  switch (s) {
    case UnknownStrategy::Mixup: return "mixup";
    case UnknownStrategy::UniformNoise: return "uniform-noise";
    case UnknownStrategy::SemanticNoise: return "semantic-noise";
    case UnknownStrategy::AdversarialFeatures: return "adversarial-features";
  }
  throw std::logic_error("strategy_name: bad enum");
}

UnknownStrategy strategy_from_name(const std::string& name) {
  if (name == "mixup") return UnknownStrategy::Mixup;
  if (name == "uniform-noise") return UnknownStrategy::UniformNoise;
  if (name == "semantic-noise") return UnknownStrategy::SemanticNoise;
  if (name == "adversarial-features") return UnknownStrategy::AdversarialFeatures;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::vector<float> mix_rows(std::span<const float> a, std::span<const float> b,
                            double lambda) {
  if (a.size() != b.size()) throw std::invalid_argument("mix_rows: dim mismatch");
  std::vector<float> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    out[j] = static_cast<float>(lambda * a[j] + (1.0 - lambda) * b[j]);
  }
  return out;
}

namespace {

gen::SyntheticDataset make_variant(Matrix features, UnknownStrategy s) {
  gen::SyntheticDataset out;
  out.labels.assign(features.rows(), data::kUnknownLabel);
  out.features = std::move(features);
  out.provenance = gen::Provenance::Variant;
  out.variant = strategy_name(s);
  return out;
}

gen::SyntheticDataset mixup_unknowns(const gen::SyntheticDataset& unseen,
                                     const VariantConfig& cfg, std::uint64_t seed) {
  if (unseen.features.rows() < 2) {
    throw std::invalid_argument("mixup: need at least two unseen rows");
  }
  Rng rng(derive_seed(seed, "mixup"));
  Matrix rows(cfg.count, unseen.features.cols());
  for (std::size_t i = 0; i < cfg.count; ++i) {
    std::size_t a = rng.next_below(unseen.features.rows());
    std::size_t b = rng.next_below(unseen.features.rows());
    // Combinations must cross distinct unseen classes.
    while (unseen.labels[a] == unseen.labels[b]) {
      b = rng.next_below(unseen.features.rows());
    }
    const double lambda = rng.uniform(cfg.mixup_lambda_lo, cfg.mixup_lambda_hi);
    const std::vector<float> mixed =
        mix_rows(unseen.features.row(a), unseen.features.row(b), lambda);
    std::copy(mixed.begin(), mixed.end(), rows.row(i).begin());
  }
  return make_variant(std::move(rows), UnknownStrategy::Mixup);
}

gen::SyntheticDataset uniform_noise_unknowns(const gen::SyntheticDataset& unseen,
                                             const VariantConfig& cfg,
                                             std::uint64_t seed) {
  if (unseen.features.rows() == 0) {
    throw std::invalid_argument("uniform-noise: empty unseen features");
  }
  const std::size_t d = unseen.features.cols();
  std::vector<float> lo(d, std::numeric_limits<float>::max());
  std::vector<float> hi(d, std::numeric_limits<float>::lowest());
  for (std::size_t i = 0; i < unseen.features.rows(); ++i) {
    const auto row = unseen.features.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], row[j]);
      hi[j] = std::max(hi[j], row[j]);
    }
  }
  Rng rng(derive_seed(seed, "uniform-noise"));
  Matrix rows(cfg.count, d);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    auto row = rows.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = static_cast<float>(rng.uniform(lo[j], hi[j]));
    }
  }
  return make_variant(std::move(rows), UnknownStrategy::UniformNoise);
}

gen::SyntheticDataset semantic_noise_unknowns(const Matrix& embeddings,
                                              const std::vector<std::uint32_t>& ids,
                                              const gen::GeneratorModel& generator,
                                              const VariantConfig& cfg,
                                              std::uint64_t seed) {
  if (embeddings.rows() == 0) {
    throw std::invalid_argument("semantic-noise: no embeddings");
  }
  double scale = cfg.semantic_noise_scale;
  if (scale < 0.0) {
    double norm_sum = 0.0;
    for (std::size_t a = 0; a < embeddings.rows(); ++a) {
      double sq = 0.0;
      for (float v : embeddings.row(a)) sq += static_cast<double>(v) * v;
      norm_sum += std::sqrt(sq);
    }
    scale = 0.05 * norm_sum / static_cast<double>(embeddings.rows());
  }
  // Perturbed copies of each class embedding, then plain synthesis. With
  // scale 0 this reduces exactly to synthesize_features on repeated
  // embeddings under the same seed.
  Matrix noisy(embeddings.rows() * cfg.embeddings_per_class, embeddings.cols());
  std::vector<std::uint32_t> noisy_ids;
  noisy_ids.reserve(noisy.rows());
  for (std::size_t c = 0; c < embeddings.rows(); ++c) {
    Rng rng(derive_seed(seed, "semantic-noise", c));
    for (std::size_t k = 0; k < cfg.embeddings_per_class; ++k) {
      auto dst = noisy.row(c * cfg.embeddings_per_class + k);
      const auto src = embeddings.row(c);
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] = (scale > 0.0)
                     ? static_cast<float>(src[j] + scale * rng.gaussian())
                     : src[j];
      }
      noisy_ids.push_back(ids[c]);
    }
  }
  gen::SyntheticDataset synth =
      gen::synthesize_features(generator, noisy, noisy_ids, cfg.per_embedding, seed);
  gen::SyntheticDataset out = make_variant(std::move(synth.features),
                                           UnknownStrategy::SemanticNoise);
  return out;
}

}  // namespace

AdversarialFeatureResult adversarial_feature_unknowns(
    const gen::SyntheticDataset& unseen_features,
    const gen::ClosedSetClassifier& classifier, const VariantConfig& config,
    std::uint64_t seed) {
  if (unseen_features.features.rows() == 0) {
    throw std::invalid_argument("adversarial-features: empty unseen features");
  }
  const std::size_t d = unseen_features.features.cols();
  Rng rng(derive_seed(seed, "adversarial-features"));

  AdversarialFeatureResult result;
  Matrix points(config.sample_count, d);
  for (std::size_t i = 0; i < config.sample_count; ++i) {
    const std::size_t src = rng.next_below(unseen_features.features.rows());
    const auto row = unseen_features.features.row(src);
    std::copy(row.begin(), row.end(), points.row(i).begin());
  }

  const nd::LossSpec energy_spec{nd::LossKind::FreeEnergy, config.temperature};
  double initial_energy = 0.0;
  double final_energy = 0.0;

  for (std::size_t i = 0; i < points.rows(); ++i) {
    std::vector<float> x(points.row(i).begin(), points.row(i).end());
    const std::vector<float> start = x;
    nd::AdamVecState state = nd::AdamVecState::init(d, {.step_size = config.step_size});
    double last_adv = 0.0;
    for (std::size_t step = 0; step < config.steps; ++step) {
      Matrix batch(1, d);
      std::copy(x.begin(), x.end(), batch.row(0).begin());
      auto r = nd::loss_and_grads(classifier.net, batch, nd::Targets::none(),
                                  energy_spec, true);
      last_adv = r.loss;
      if (step == 0) initial_energy += -r.loss;
      std::vector<float> grad(r.grads.input.row(0).begin(),
                              r.grads.input.row(0).end());
      // L2 anchor to the start point; subgradient 0 at the start itself.
      const double dist = nd::euclidean_distance(x, start);
      if (dist > 0.0) {
        for (std::size_t j = 0; j < d; ++j) {
          grad[j] += static_cast<float>(config.anchor_weight *
                                        (static_cast<double>(x[j]) - start[j]) / dist);
        }
      }
      nd::adam_step_vec(x, grad, state);
    }
    final_energy += -last_adv;
    std::copy(x.begin(), x.end(), points.row(i).begin());
  }
  result.initial_mean_energy = initial_energy / static_cast<double>(points.rows());
  result.final_mean_energy = final_energy / static_cast<double>(points.rows());
  result.dataset =
      make_variant(std::move(points), UnknownStrategy::AdversarialFeatures);
  return result;
}

gen::SyntheticDataset variant_unknowns(UnknownStrategy strategy,
                                       const VariantInputs& inputs,
                                       const VariantConfig& config, std::uint64_t seed) {
  auto require = [](const void* p, const char* what, const char* strat) {
    if (p == nullptr) {
      throw std::invalid_argument(std::string(strat) + " strategy requires " + what);
    }
  };
  switch (strategy) {
    case UnknownStrategy::Mixup:
      require(inputs.unseen_features, "unseen features", "mixup");
      return mixup_unknowns(*inputs.unseen_features, config, seed);
    case UnknownStrategy::UniformNoise:
      require(inputs.unseen_features, "unseen features", "uniform-noise");
      return uniform_noise_unknowns(*inputs.unseen_features, config, seed);
    case UnknownStrategy::SemanticNoise:
      require(inputs.unseen_embeddings, "unseen embeddings", "semantic-noise");
      require(inputs.unseen_ids, "unseen class ids", "semantic-noise");
      require(inputs.generator, "a generator", "semantic-noise");
      return semantic_noise_unknowns(*inputs.unseen_embeddings, *inputs.unseen_ids,
                                     *inputs.generator, config, seed);
    case UnknownStrategy::AdversarialFeatures:
      require(inputs.unseen_features, "unseen features", "adversarial-features");
      require(inputs.classifier, "the closed-set classifier", "adversarial-features");
      return adversarial_feature_unknowns(*inputs.unseen_features, *inputs.classifier,
                                          config, seed)
          .dataset;
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace zsosr::ase
