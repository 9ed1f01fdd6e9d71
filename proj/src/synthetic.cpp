#include "zsosr/synthetic.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "zsosr/rng.hpp"

namespace zsosr::data {

std::vector<float> SyntheticWorld::class_mean(std::uint32_t class_id) const {
  if (class_id >= bundle.num_classes()) {
    throw std::out_of_range("class_mean: class " + std::to_string(class_id));
  }
  std::vector<float> mean(mixing.rows());
  const auto a = bundle.attributes.row(class_id);
  for (std::size_t i = 0; i < mixing.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < mixing.cols(); ++j) {
      acc += static_cast<double>(mixing.at(i, j)) * a[j];
    }
    mean[i] = static_cast<float>(acc);
  }
  return mean;
}

nd::Matrix SyntheticWorld::sample_features(std::uint32_t class_id, std::size_t n,
                                           std::uint64_t seed) const {
  const std::vector<float> mean = class_mean(class_id);
  nd::Matrix out(n, mixing.rows());
  Rng rng(derive_seed(seed, "oracle-sample", class_id));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < mean.size(); ++j) {
      out.at(i, j) = static_cast<float>(mean[j] + noise_scale * rng.gaussian());
    }
  }
  return out;
}

SyntheticWorld synth_world(const SyntheticWorldConfig& config, std::uint64_t seed) {
  if (config.n_seen == 0 || config.n_unseen == 0 || config.n_unknown == 0 ||
      config.attribute_dim == 0 || config.feature_dim == 0 ||
      config.samples_per_class == 0) {
    throw std::invalid_argument("synth_world: all counts must be positive");
  }
  if (config.noise_scale <= 0.0) {
    throw std::invalid_argument("synth_world: noise_scale must be > 0");
  }
  const std::size_t n_classes = config.n_seen + config.n_unseen + config.n_unknown;

  SyntheticWorld w;
  w.noise_scale = config.noise_scale;

  // Class attribute prototypes on the unit sphere. Coordinates carry a
  // decaying scale spectrum before normalization, so classes share a few
  // dominant semantic directions the way fine-grained attribute sets do;
  // unknown classes then fall between known ones rather than on isolated
  // orthogonal axes.
  Rng attr_rng(derive_seed(seed, "world-attributes"));
  w.bundle.attributes = nd::Matrix(n_classes, config.attribute_dim);
  constexpr double kSpectrumDecay = 0.8;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto row = w.bundle.attributes.row(c);
    double norm = 0.0;
    double scale = 1.0;
    for (float& v : row) {
      v = static_cast<float>(attr_rng.gaussian() * scale);
      norm += static_cast<double>(v) * v;
      scale *= kSpectrumDecay;
    }
    norm = std::sqrt(norm);
    for (float& v : row) v = static_cast<float>(v / norm);
  }

  // Fixed mixing map; entry scale 1/sqrt(M) keeps per-coordinate feature
  // means at unit order for unit-norm attributes.
  Rng mix_rng(derive_seed(seed, "world-mixing"));
  w.mixing = nd::Matrix(config.feature_dim, config.attribute_dim);
  float mix_scale = 1.0f / std::sqrt(static_cast<float>(config.attribute_dim));
  if (const char* cal = std::getenv("ZSOSR_CAL_WSCALE")) {
    mix_scale = std::stof(cal);  // calibration hook, temporary
  }
  for (std::size_t k = 0; k < w.mixing.size(); ++k) {
    w.mixing.data()[k] = mix_rng.gaussian_f() * mix_scale;
  }

  const std::size_t n_rows = n_classes * config.samples_per_class;
  w.bundle.features = nd::Matrix(n_rows, config.feature_dim);
  w.bundle.labels.reserve(n_rows);
  std::size_t row = 0;
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    const std::vector<float> mean = w.class_mean(c);
    Rng rng(derive_seed(seed, "world-features", c));
    for (std::size_t s = 0; s < config.samples_per_class; ++s, ++row) {
      float* dst = w.bundle.features.data() + row * config.feature_dim;
      for (std::size_t j = 0; j < config.feature_dim; ++j) {
        dst[j] = static_cast<float>(mean[j] + config.noise_scale * rng.gaussian());
      }
      w.bundle.labels.push_back(c);
    }
  }

  w.bundle.class_names.reserve(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    w.bundle.class_names.push_back("class_" + std::to_string(c));
  }

  for (std::uint32_t c = 0; c < config.n_seen; ++c) w.bundle.split.seen.push_back(c);
  for (std::uint32_t c = 0; c < config.n_unseen; ++c) {
    w.bundle.split.unseen.push_back(static_cast<std::uint32_t>(config.n_seen + c));
  }
  for (std::uint32_t c = 0; c < config.n_unknown; ++c) {
    w.bundle.split.unknown.push_back(
        static_cast<std::uint32_t>(config.n_seen + config.n_unseen + c));
  }
  w.bundle.validate();
  return w;
}

}  // namespace zsosr::data
