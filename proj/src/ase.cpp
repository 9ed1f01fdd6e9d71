#include "zsosr/ase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "zsosr/adam.hpp"
#include "zsosr/loss.hpp"
#include "zsosr/rng.hpp"

namespace zsosr::ase {

using nd::Matrix;

std::string anchor_set_name(AnchorSet a) {
  switch (a) {
    case AnchorSet::UnseenOnly: return "unseen-only";
    case AnchorSet::SeenAndUnseen: return "seen-and-unseen";
  }
  throw std::logic_error("anchor_set_name: bad enum");
}

AnchorSet anchor_set_from_name(const std::string& name) {
  if (name == "unseen-only") return AnchorSet::UnseenOnly;
  if (name == "seen-and-unseen") return AnchorSet::SeenAndUnseen;
  throw std::invalid_argument("unknown anchor set: " + name);
}

void AseConfig::validate() const {
  if (beta < 0.0) throw std::invalid_argument("ase config: beta must be >= 0");
  if (temperature <= 0.0) {
    throw std::invalid_argument("ase config: temperature must be > 0");
  }
  if (embeddings_per_unseen == 0) {
    throw std::invalid_argument("ase config: embeddings_per_unseen must be >= 1");
  }
  if (noise_samples == 0) {
    throw std::invalid_argument("ase config: noise_samples must be >= 1");
  }
  if (step_size <= 0.0) throw std::invalid_argument("ase config: step_size must be > 0");
}

double adv_energy(std::span<const float> logits, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("adv_energy: temperature must be > 0");
  }
  if (logits.empty()) throw std::invalid_argument("adv_energy: empty logits");
  double m = logits[0] / temperature;
  for (float v : logits) m = std::max(m, v / temperature);
  double s = 0.0;
  for (float v : logits) s += std::exp(v / temperature - m);
  return temperature * (m + std::log(s));
}

double dis_loss(std::span<const float> a_hat, std::span<const float> a_anchor) {
  return nd::euclidean_distance(a_hat, a_anchor);
}

AseLossResult ase_loss(std::span<const float> a_hat, std::span<const float> a_anchor,
                       const gen::GeneratorModel& generator,
                       const gen::ClosedSetClassifier& phi_closed,
                       const AseConfig& config, const nd::Matrix& noise_batch) {
  config.validate();
  if (a_hat.size() != generator.attribute_dim) {
    throw std::invalid_argument("ase_loss: embedding dim " +
                                std::to_string(a_hat.size()) + ", generator expects " +
                                std::to_string(generator.attribute_dim));
  }
  if (a_hat.size() != a_anchor.size()) {
    throw std::invalid_argument("ase_loss: embedding and anchor dims differ");
  }
  if (noise_batch.cols() != generator.noise_dim || noise_batch.rows() == 0) {
    throw std::invalid_argument("ase_loss: bad noise batch shape");
  }
  const std::size_t m_dim = a_hat.size();
  const std::size_t n = noise_batch.rows();

  // Prototypes p = G(a_hat, eps_r), one per noise row.
  Matrix g_in(n, m_dim + generator.noise_dim);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = g_in.row(r);
    std::copy(a_hat.begin(), a_hat.end(), row.begin());
    const auto eps = noise_batch.row(r);
    std::copy(eps.begin(), eps.end(), row.begin() + m_dim);
  }
  const nd::ForwardTrace g_trace = nd::forward_cached(generator.net, g_in);
  const nd::ForwardTrace phi_trace =
      nd::forward_cached(phi_closed.net, g_trace.output());

  const auto head = nd::eval_loss_head(phi_trace.output(), nd::Targets::none(),
                                       {nd::LossKind::FreeEnergy, config.temperature});

  // Backprop through the frozen classifier, then the frozen generator; only
  // the embedding slice of the input gradient is kept.
  nd::Gradients phi_grads = nd::backward(phi_closed.net, g_trace.output(), phi_trace,
                                         head.logit_grads, true);
  nd::Gradients g_grads =
      nd::backward(generator.net, g_in, g_trace, phi_grads.input, true);

  AseLossResult out;
  out.l_adv = head.loss;
  out.l_dis = dis_loss(a_hat, a_anchor);
  out.l_ase = out.l_adv + config.beta * out.l_dis;
  out.grad.assign(m_dim, 0.0f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < m_dim; ++j) {
      out.grad[j] += g_grads.input.at(r, j);
    }
  }
  // Distance term; subgradient 0 at the cusp a_hat == anchor.
  if (out.l_dis > 0.0) {
    for (std::size_t j = 0; j < m_dim; ++j) {
      out.grad[j] += static_cast<float>(
          config.beta * (static_cast<double>(a_hat[j]) - a_anchor[j]) / out.l_dis);
    }
  }
  return out;
}

AdversarialEmbeddingSet init_embeddings(const Matrix& anchors,
                                        const std::vector<std::uint32_t>& anchor_ids,
                                        const AseConfig& config, std::uint64_t seed) {
  config.validate();
  if (anchors.rows() == 0) throw std::invalid_argument("init_embeddings: no anchors");
  if (anchors.rows() != anchor_ids.size()) {
    throw std::invalid_argument("init_embeddings: anchor id count mismatch");
  }
  double scale = config.init_noise_scale;
  if (scale < 0.0) {
    double norm_sum = 0.0;
    for (std::size_t a = 0; a < anchors.rows(); ++a) {
      double sq = 0.0;
      for (float v : anchors.row(a)) sq += static_cast<double>(v) * v;
      norm_sum += std::sqrt(sq);
    }
    scale = 0.05 * norm_sum / static_cast<double>(anchors.rows());
  }

  AdversarialEmbeddingSet set;
  set.anchors = anchors;
  set.anchor_ids = anchor_ids;
  set.per_anchor = config.embeddings_per_unseen;
  set.embeddings = Matrix(anchors.rows() * set.per_anchor, anchors.cols());
  for (std::size_t a = 0; a < anchors.rows(); ++a) {
    Rng rng(derive_seed(seed, "ase-init", a));
    for (std::size_t k = 0; k < set.per_anchor; ++k) {
      auto dst = set.embeddings.row(a * set.per_anchor + k);
      const auto src = anchors.row(a);
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] = static_cast<float>(src[j] + scale * rng.gaussian());
      }
    }
  }
  return set;
}

AdversarialEmbeddingSet learn_embeddings(const AdversarialEmbeddingSet& init,
                                         const gen::GeneratorModel& generator,
                                         const gen::ClosedSetClassifier& phi_closed,
                                         const AseConfig& config, std::uint64_t seed,
                                         std::size_t threads) {
  config.validate();
  AdversarialEmbeddingSet out = init;
  const std::size_t n_embeddings = init.embeddings.rows();
  const std::size_t m_dim = init.embeddings.cols();
  out.final_adv.assign(n_embeddings, 0.0);
  out.final_dis.assign(n_embeddings, 0.0);
  out.loss_lead_mean.assign(n_embeddings, 0.0);
  out.loss_trail_mean.assign(n_embeddings, 0.0);

  // Optional box projection keeps embeddings inside the anchors' value range.
  std::vector<float> box_lo, box_hi;
  if (config.box_projection) {
    box_lo.assign(m_dim, std::numeric_limits<float>::max());
    box_hi.assign(m_dim, std::numeric_limits<float>::lowest());
    for (std::size_t a = 0; a < init.anchors.rows(); ++a) {
      const auto row = init.anchors.row(a);
      for (std::size_t j = 0; j < m_dim; ++j) {
        box_lo[j] = std::min(box_lo[j], row[j]);
        box_hi[j] = std::max(box_hi[j], row[j]);
      }
    }
  }

  auto optimize_one = [&](std::size_t e) {
    std::vector<float> a_hat(init.embeddings.row(e).begin(),
                             init.embeddings.row(e).end());
    const auto anchor = init.anchors.row(init.anchor_of(e));
    nd::AdamVecState state =
        nd::AdamVecState::init(m_dim, {.step_size = config.step_size});
    Rng noise_rng(derive_seed(seed, "ase-noise", e));

    std::vector<double> trace;
    trace.reserve(config.steps);
    AseLossResult last;
    last.l_dis = dis_loss(a_hat, anchor);
    for (std::size_t step = 0; step < config.steps; ++step) {
      Matrix noise(config.noise_samples, generator.noise_dim);
      for (std::size_t k = 0; k < noise.size(); ++k) {
        noise.data()[k] = noise_rng.gaussian_f();
      }
      last = ase_loss(a_hat, anchor, generator, phi_closed, config, noise);
      if (!std::isfinite(last.l_ase)) {
        throw std::runtime_error("learn_embeddings: non-finite loss at embedding " +
                                 std::to_string(e) + ", step " + std::to_string(step));
      }
      trace.push_back(last.l_ase);
      nd::adam_step_vec(a_hat, last.grad, state);
      if (config.box_projection) {
        for (std::size_t j = 0; j < m_dim; ++j) {
          a_hat[j] = std::clamp(a_hat[j], box_lo[j], box_hi[j]);
        }
      }
    }
    std::copy(a_hat.begin(), a_hat.end(), out.embeddings.row(e).begin());
    out.final_adv[e] = last.l_adv;
    out.final_dis[e] = dis_loss(a_hat, anchor);
    if (!trace.empty()) {
      const std::size_t window = std::max<std::size_t>(1, trace.size() / 10);
      double lead = 0.0, trail = 0.0;
      for (std::size_t i = 0; i < window; ++i) lead += trace[i];
      for (std::size_t i = trace.size() - window; i < trace.size(); ++i) {
        trail += trace[i];
      }
      out.loss_lead_mean[e] = lead / static_cast<double>(window);
      out.loss_trail_mean[e] = trail / static_cast<double>(window);
    }
  };

  if (threads <= 1 || n_embeddings < 2) {
    for (std::size_t e = 0; e < n_embeddings; ++e) optimize_one(e);
    return out;
  }

  // Static partition over worker threads; every embedding writes only its
  // own rows, so the result is independent of the thread count.
  const std::size_t n_workers = std::min(threads, n_embeddings);
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_workers);
  workers.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t e = w; e < n_embeddings; e += n_workers) optimize_one(e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return out;
}

gen::SyntheticDataset generate_unknown_features(const gen::GeneratorModel& generator,
                                                const AdversarialEmbeddingSet& set,
                                                std::size_t per_embedding,
                                                std::uint64_t seed) {
  if (per_embedding == 0) {
    throw std::invalid_argument("generate_unknown_features: per_embedding must be >= 1");
  }
  std::vector<std::uint32_t> pseudo_ids(set.embeddings.rows(), data::kUnknownLabel);
  gen::SyntheticDataset out = gen::synthesize_features(
      generator, set.embeddings, pseudo_ids, per_embedding, seed);
  out.provenance = gen::Provenance::Unknown;
  return out;
}

OpenTrainResult train_open_classifier(const gen::SyntheticDataset& unseen_synth,
                                      const gen::SyntheticDataset& unknown_synth,
                                      const OpenClassifierConfig& config,
                                      std::uint64_t seed) {
  if (unseen_synth.features.rows() == 0) {
    throw std::invalid_argument("train_open_classifier: no unseen-class rows");
  }
  if (unknown_synth.features.rows() == 0) {
    throw std::invalid_argument(
        "train_open_classifier: no unknown rows; the K+1 head requires both groups");
  }
  if (unseen_synth.features.cols() != unknown_synth.features.cols()) {
    throw std::invalid_argument("train_open_classifier: feature dims differ");
  }
  for (std::uint32_t l : unseen_synth.labels) {
    if (l == data::kUnknownLabel) {
      throw std::invalid_argument(
          "train_open_classifier: unseen rows carry the unknown label");
    }
  }
  for (std::uint32_t l : unknown_synth.labels) {
    if (l != data::kUnknownLabel) {
      throw std::invalid_argument(
          "train_open_classifier: unknown rows must all carry the unknown label");
    }
  }

  std::set<std::uint32_t> distinct(unseen_synth.labels.begin(),
                                   unseen_synth.labels.end());
  std::vector<std::uint32_t> class_ids(distinct.begin(), distinct.end());
  const std::size_t k = class_ids.size();

  const Matrix features = nd::vconcat(unseen_synth.features, unknown_synth.features);
  std::vector<std::uint32_t> targets;
  targets.reserve(features.rows());
  for (std::uint32_t l : unseen_synth.labels) {
    const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), l);
    targets.push_back(static_cast<std::uint32_t>(it - class_ids.begin()));
  }
  targets.insert(targets.end(), unknown_synth.labels.size(),
                 static_cast<std::uint32_t>(k));

  std::vector<float> weights;
  if (config.unknown_weight != 1.0) {
    weights.assign(features.rows(), 1.0f);
    std::fill(weights.begin() + unseen_synth.features.rows(), weights.end(),
              static_cast<float>(config.unknown_weight));
  }

  gen::LinearTrainResult r = gen::train_linear_softmax(
      features, targets, k + 1, {nd::LossKind::SoftmaxCrossEntropy}, config.base, seed,
      weights);

  OpenTrainResult out;
  out.classifier = OpenSetClassifier{std::move(r.net), std::move(class_ids)};

  const Matrix z = out.classifier.logits(features);
  std::size_t known_hits = 0, unknown_hits = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (i < unseen_synth.features.rows()) {
      known_hits += (best == targets[i]);
    } else {
      unknown_hits += (best == k);
    }
  }
  out.known_train_accuracy = static_cast<double>(known_hits) /
                             static_cast<double>(unseen_synth.features.rows());
  out.unknown_train_recall = static_cast<double>(unknown_hits) /
                             static_cast<double>(unknown_synth.features.rows());
  return out;
}

ScoredPrediction open_score(const OpenSetClassifier& classifier,
                            std::span<const float> x) {
  Matrix batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.row(0).begin());
  return open_score_pool(classifier, batch).front();
}

std::vector<ScoredPrediction> open_score_pool(const OpenSetClassifier& classifier,
                                              const Matrix& features) {
  const Matrix z = classifier.logits(features);
  const Matrix p = nd::softmax(z);
  const std::size_t k = classifier.num_known();
  std::vector<ScoredPrediction> out;
  out.reserve(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    ScoredPrediction sp;
    const auto row = z.row(i);
    sp.logits.assign(row.begin(), row.end());
    sp.open_score = p.at(i, k);
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    sp.predicted_class = classifier.class_ids[best];
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace zsosr::ase
