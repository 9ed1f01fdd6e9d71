#include "zsosr/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "zsosr/adam.hpp"
#include "zsosr/loss.hpp"
#include "zsosr/rng.hpp"

namespace zsosr::gen {

using nd::Activation;
using nd::Matrix;

std::string generator_mode_name(GeneratorMode m) {
  switch (m) {
    case GeneratorMode::WganClip: return "wgan-clip";
    case GeneratorMode::Cvae: return "cvae";
  }
  throw std::logic_error("generator_mode_name: bad enum");
}

GeneratorMode generator_mode_from_name(const std::string& name) {
  if (name == "wgan-clip") return GeneratorMode::WganClip;
  if (name == "cvae") return GeneratorMode::Cvae;
  throw std::invalid_argument("unknown generator mode: " + name);
}

void GeneratorConfig::validate() const {
  if (hidden == 0 || steps == 0 || batch == 0) {
    throw std::invalid_argument("generator config: hidden, steps and batch must be > 0");
  }
  if (step_size <= 0.0) {
    throw std::invalid_argument("generator config: step_size must be > 0");
  }
  if (mode == GeneratorMode::WganClip) {
    if (clip <= 0.0) {
      throw std::invalid_argument(
          "generator config: wgan-clip requires clip > 0 (a zero clip freezes the "
          "critic at zero)");
    }
    if (critic_steps == 0) {
      throw std::invalid_argument("generator config: critic_steps must be > 0");
    }
  }
}

Matrix GeneratorModel::generate(const Matrix& attributes, const Matrix& noise) const {
  if (attributes.cols() != attribute_dim) {
    throw std::invalid_argument("generate: attribute dim " +
                                std::to_string(attributes.cols()) + ", expected " +
                                std::to_string(attribute_dim));
  }
  if (noise.rows() != attributes.rows() || noise.cols() != noise_dim) {
    throw std::invalid_argument("generate: noise shape mismatch");
  }
  return nd::forward(net, nd::hconcat(attributes, noise));
}

namespace {

struct SeenBatcher {
  const data::TrainingView& view;
  std::map<std::uint32_t, std::size_t> attr_index;  // class id → seen_attributes row

  explicit SeenBatcher(const data::TrainingView& v) : view(v) {
    if (v.seen_features.rows() == 0) {
      throw std::invalid_argument("train_generator: empty seen view");
    }
    for (std::size_t i = 0; i < v.seen_ids.size(); ++i) {
      attr_index[v.seen_ids[i]] = i;
    }
  }

  /// Samples a batch of (feature, attribute) row pairs.
  void sample(std::size_t n, Rng& rng, Matrix& x, Matrix& a) const {
    x = Matrix(n, view.seen_features.cols());
    a = Matrix(n, view.seen_attributes.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = rng.next_below(view.seen_features.rows());
      const auto xr = view.seen_features.row(row);
      std::copy(xr.begin(), xr.end(), x.row(i).begin());
      const std::size_t arow = attr_index.at(view.seen_labels[row]);
      const auto ar = view.seen_attributes.row(arow);
      std::copy(ar.begin(), ar.end(), a.row(i).begin());
    }
  }
};

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = rng.gaussian_f();
  return m;
}

TrainedGenerator train_cvae(const data::TrainingView& view, const GeneratorConfig& cfg,
                            std::uint64_t seed) {
  const std::size_t d = view.seen_features.cols();
  const std::size_t m_dim = view.seen_attributes.cols();
  const std::size_t z_dim = cfg.noise_dim ? cfg.noise_dim : m_dim;

  nd::MlpModel encoder =
      nd::build_mlp({d + m_dim, cfg.hidden, 2 * z_dim},
                    {Activation::LeakyRectifier, Activation::Identity},
                    derive_seed(seed, "cvae-encoder"));
  nd::MlpModel decoder =
      nd::build_mlp({m_dim + z_dim, cfg.hidden, d},
                    {Activation::LeakyRectifier, Activation::Identity},
                    derive_seed(seed, "cvae-decoder"));

  nd::AdamConfig adam_cfg{.step_size = cfg.step_size};
  nd::AdamState enc_state = nd::AdamState::init(encoder, adam_cfg);
  nd::AdamState dec_state = nd::AdamState::init(decoder, adam_cfg);

  SeenBatcher batcher(view);
  Rng rng(derive_seed(seed, "cvae-train"));
  TrainedGenerator out;
  out.loss_trace.reserve(cfg.steps);

  Matrix x, a;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batcher.sample(cfg.batch, rng, x, a);
    const std::size_t n = x.rows();

    const nd::ForwardTrace enc_trace = nd::forward_cached(encoder, nd::hconcat(x, a));
    const Matrix& enc_out = enc_trace.output();
    Matrix mu = nd::slice_cols(enc_out, 0, z_dim);
    Matrix logv = nd::slice_cols(enc_out, z_dim, 2 * z_dim);
    // Bounded log-variance keeps exp() sane through early training.
    for (std::size_t k = 0; k < logv.size(); ++k) {
      logv.data()[k] = std::clamp(logv.data()[k], -8.0f, 8.0f);
    }

    const Matrix eps = gaussian_matrix(n, z_dim, rng);
    Matrix z(n, z_dim);
    for (std::size_t k = 0; k < z.size(); ++k) {
      z.data()[k] = mu.data()[k] +
                    std::exp(0.5f * logv.data()[k]) * eps.data()[k];
    }

    const Matrix dec_in = nd::hconcat(a, z);
    const nd::ForwardTrace dec_trace = nd::forward_cached(decoder, dec_in);
    const auto recon = nd::eval_loss_head(dec_trace.output(), nd::Targets::from_values(x),
                                          {nd::LossKind::MeanSquared});
    if (!std::isfinite(recon.loss)) {
      throw std::runtime_error("train_generator: cvae diverged at step " +
                               std::to_string(step));
    }
    out.loss_trace.push_back(recon.loss);

    nd::Gradients dec_grads =
        nd::backward(decoder, dec_in, dec_trace, recon.logit_grads, true);

    // Reparameterization chain plus KL gradients back to the encoder output.
    Matrix enc_out_grad(n, 2 * z_dim);
    const double kl_w = cfg.kl_weight / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < z_dim; ++j) {
        const double dz = dec_grads.input.at(i, m_dim + j);
        const double lv = logv.at(i, j);
        const double mu_ij = mu.at(i, j);
        const double d_mu = dz + kl_w * mu_ij;
        double d_logv = dz * eps.at(i, j) * 0.5 * std::exp(0.5 * lv) +
                        kl_w * 0.5 * (std::exp(lv) - 1.0);
        // No gradient through a saturated clamp.
        if (enc_out.at(i, z_dim + j) <= -8.0f || enc_out.at(i, z_dim + j) >= 8.0f) {
          d_logv = 0.0;
        }
        enc_out_grad.at(i, j) = static_cast<float>(d_mu);
        enc_out_grad.at(i, z_dim + j) = static_cast<float>(d_logv);
      }
    }
    nd::Gradients enc_grads =
        nd::backward(encoder, nd::hconcat(x, a), enc_trace, enc_out_grad, false);

    nd::adam_step(decoder, dec_grads, dec_state);
    nd::adam_step(encoder, enc_grads, enc_state);
  }

  out.generator = GeneratorModel{std::move(decoder), m_dim, z_dim, d};
  return out;
}

void clip_parameters(nd::MlpModel& model, float clip) {
  for (nd::Layer& l : model.layers()) {
    for (std::size_t k = 0; k < l.weights.size(); ++k) {
      l.weights.data()[k] = std::clamp(l.weights.data()[k], -clip, clip);
    }
    for (std::size_t k = 0; k < l.bias.size(); ++k) {
      l.bias.data()[k] = std::clamp(l.bias.data()[k], -clip, clip);
    }
  }
}

TrainedGenerator train_wgan(const data::TrainingView& view, const GeneratorConfig& cfg,
                            std::uint64_t seed) {
  const std::size_t d = view.seen_features.cols();
  const std::size_t m_dim = view.seen_attributes.cols();
  const std::size_t z_dim = cfg.noise_dim ? cfg.noise_dim : m_dim;

  nd::MlpModel generator =
      nd::build_mlp({m_dim + z_dim, cfg.hidden, d},
                    {Activation::LeakyRectifier, Activation::Identity},
                    derive_seed(seed, "wgan-generator"));
  nd::MlpModel critic =
      nd::build_mlp({d + m_dim, cfg.hidden, 1},
                    {Activation::LeakyRectifier, Activation::Identity},
                    derive_seed(seed, "wgan-critic"));

  // Low first-moment decay; heavy momentum interacts badly with weight
  // clipping.
  nd::AdamConfig adam_cfg{.step_size = cfg.step_size, .beta1 = 0.5};
  nd::AdamState gen_state = nd::AdamState::init(generator, adam_cfg);
  nd::AdamState critic_state = nd::AdamState::init(critic, adam_cfg);

  SeenBatcher batcher(view);
  Rng rng(derive_seed(seed, "wgan-train"));
  TrainedGenerator out;
  out.loss_trace.reserve(cfg.steps);

  Matrix x, a;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    double critic_estimate = 0.0;
    for (std::size_t c = 0; c < cfg.critic_steps; ++c) {
      batcher.sample(cfg.batch, rng, x, a);
      const Matrix eps = gaussian_matrix(x.rows(), z_dim, rng);
      const Matrix fake = nd::forward(generator, nd::hconcat(a, eps));

      const Matrix d_in =
          nd::vconcat(nd::hconcat(x, a), nd::hconcat(fake, a));
      std::vector<float> dirs(d_in.rows(), 1.0f);
      std::fill(dirs.begin() + x.rows(), dirs.end(), -1.0f);
      auto r = nd::loss_and_grads(critic, d_in, nd::Targets::from_directions(dirs),
                                  {nd::LossKind::CriticDifference});
      if (!std::isfinite(r.loss)) {
        throw std::runtime_error("train_generator: wgan critic diverged at step " +
                                 std::to_string(step));
      }
      critic_estimate = -r.loss;  // E[D(x,a)] - E[D(x~,a)]
      nd::adam_step(critic, r.grads, critic_state);
      clip_parameters(critic, static_cast<float>(cfg.clip));
    }
    out.loss_trace.push_back(critic_estimate);

    // Generator update: push D(x~, a) up through the frozen critic.
    batcher.sample(cfg.batch, rng, x, a);
    const Matrix eps = gaussian_matrix(x.rows(), z_dim, rng);
    const Matrix g_in = nd::hconcat(a, eps);
    const nd::ForwardTrace g_trace = nd::forward_cached(generator, g_in);
    const Matrix d_in = nd::hconcat(g_trace.output(), a);
    const nd::ForwardTrace d_trace = nd::forward_cached(critic, d_in);
    auto head = nd::eval_loss_head(d_trace.output(),
                                   nd::Targets::from_directions(
                                       std::vector<float>(d_in.rows(), 1.0f)),
                                   {nd::LossKind::CriticDifference});
    if (!std::isfinite(head.loss)) {
      throw std::runtime_error("train_generator: wgan generator diverged at step " +
                               std::to_string(step));
    }
    nd::Gradients d_grads = nd::backward(critic, d_in, d_trace, head.logit_grads, true);
    const Matrix dx = nd::slice_cols(d_grads.input, 0, d);
    nd::Gradients g_grads = nd::backward(generator, g_in, g_trace, dx, false);
    nd::adam_step(generator, g_grads, gen_state);
  }

  out.generator = GeneratorModel{std::move(generator), m_dim, z_dim, d};
  out.critic = DiscriminatorModel{std::move(critic)};
  return out;
}

}  // namespace

TrainedGenerator train_generator(const data::TrainingView& view,
                                 const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  switch (config.mode) {
    case GeneratorMode::Cvae: return train_cvae(view, config, seed);
    case GeneratorMode::WganClip: return train_wgan(view, config, seed);
  }
  throw std::logic_error("train_generator: bad mode");
}

SyntheticDataset synthesize_features(const GeneratorModel& generator,
                                     const nd::Matrix& embeddings,
                                     const std::vector<std::uint32_t>& class_ids,
                                     std::size_t n_per_class, std::uint64_t seed) {
  if (embeddings.rows() != class_ids.size()) {
    throw std::invalid_argument("synthesize_features: " +
                                std::to_string(embeddings.rows()) +
                                " embeddings for " + std::to_string(class_ids.size()) +
                                " class ids");
  }
  if (embeddings.cols() != generator.attribute_dim) {
    throw std::invalid_argument("synthesize_features: embedding dim " +
                                std::to_string(embeddings.cols()) + ", generator expects " +
                                std::to_string(generator.attribute_dim));
  }
  if (n_per_class == 0) {
    throw std::invalid_argument("synthesize_features: n_per_class must be > 0");
  }
  SyntheticDataset out;
  out.provenance = Provenance::Unseen;
  out.features = nd::Matrix(embeddings.rows() * n_per_class, generator.feature_dim);
  out.labels.reserve(out.features.rows());

  for (std::size_t e = 0; e < embeddings.rows(); ++e) {
    Rng rng(derive_seed(seed, "synthesize", e));
    Matrix attrs(n_per_class, embeddings.cols());
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const auto src = embeddings.row(e);
      std::copy(src.begin(), src.end(), attrs.row(i).begin());
    }
    const Matrix noise = gaussian_matrix(n_per_class, generator.noise_dim, rng);
    const Matrix feats = generator.generate(attrs, noise);
    std::copy(feats.data(), feats.data() + feats.size(),
              out.features.data() + e * n_per_class * generator.feature_dim);
    for (std::size_t i = 0; i < n_per_class; ++i) out.labels.push_back(class_ids[e]);
  }
  return out;
}

}  // namespace zsosr::gen
