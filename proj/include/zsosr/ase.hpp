#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zsosr/classifier.hpp"
#include "zsosr/generator.hpp"

namespace zsosr::ase {

enum class AnchorSet { UnseenOnly, SeenAndUnseen };

std::string anchor_set_name(AnchorSet a);
AnchorSet anchor_set_from_name(const std::string& name);

struct AseConfig {
  double beta = 1.0;         // weight on the embedding-space distance term
  double temperature = 1.0;  // free-energy temperature
  std::size_t embeddings_per_unseen = 50;
  std::size_t steps = 100;
  double step_size = 0.01;
  double init_noise_scale = -1.0;  // < 0 → 0.05 × mean anchor norm
  std::size_t noise_samples = 8;   // Monte-Carlo draws per loss evaluation
  AnchorSet anchor_set = AnchorSet::UnseenOnly;
  bool box_projection = false;  // clamp embeddings to the anchor value range

  void validate() const;
};

/// Learned unknown-class embeddings grouped by anchor: `per_anchor`
/// consecutive embedding rows belong to each anchor row.
struct AdversarialEmbeddingSet {
  nd::Matrix anchors;                     // A × M
  std::vector<std::uint32_t> anchor_ids;  // A
  nd::Matrix embeddings;                  // (A · per_anchor) × M
  std::size_t per_anchor = 0;
  // Filled by learn_embeddings, one entry per embedding row:
  std::vector<double> final_adv, final_dis;
  std::vector<double> loss_lead_mean, loss_trail_mean;

  std::size_t anchor_of(std::size_t embedding_row) const {
    return embedding_row / per_anchor;
  }
};

/// T · log Σ exp(logits/T), the negated Helmholtz free energy. Minimizing it
/// for generated prototypes pushes their energy up.
double adv_energy(std::span<const float> logits, double temperature);

/// Euclidean distance between an embedding and its anchor.
double dis_loss(std::span<const float> a_hat, std::span<const float> a_anchor);

struct AseLossResult {
  double l_ase = 0.0;
  double l_adv = 0.0;
  double l_dis = 0.0;
  std::vector<float> grad;  // dL_ase/d(a_hat)
};

/// Composite loss of one embedding against its anchor: the mean adversarial
/// energy of generated prototypes G(a_hat, eps) under the frozen closed-set
/// classifier, plus beta times the anchor distance. Gradient flows to a_hat
/// only; the generator and classifier are untouched.
AseLossResult ase_loss(std::span<const float> a_hat, std::span<const float> a_anchor,
                       const gen::GeneratorModel& generator,
                       const gen::ClosedSetClassifier& phi_closed,
                       const AseConfig& config, const nd::Matrix& noise_batch);

/// embeddings_per_unseen Gaussian-perturbed copies of each anchor.
AdversarialEmbeddingSet init_embeddings(const nd::Matrix& anchors,
                                        const std::vector<std::uint32_t>& anchor_ids,
                                        const AseConfig& config, std::uint64_t seed);

/// Adam on every embedding independently for the configured steps, with
/// fresh Monte-Carlo noise per step from an (embedding, seed)-derived
/// stream. Embeddings are independent given the frozen models, so they may
/// be optimized on several threads; results are identical for any thread
/// count.
AdversarialEmbeddingSet learn_embeddings(const AdversarialEmbeddingSet& init,
                                         const gen::GeneratorModel& generator,
                                         const gen::ClosedSetClassifier& phi_closed,
                                         const AseConfig& config, std::uint64_t seed,
                                         std::size_t threads = 1);

/// per_embedding fresh feature draws per learned embedding, all labeled
/// 'unknown'.
gen::SyntheticDataset generate_unknown_features(const gen::GeneratorModel& generator,
                                                const AdversarialEmbeddingSet& set,
                                                std::size_t per_embedding,
                                                std::uint64_t seed);

/// Linear K+1 classifier; logit column K is the unknown class.
struct OpenSetClassifier {
  nd::MlpModel net;
  std::vector<std::uint32_t> class_ids;  // the K known classes, column order

  std::size_t num_known() const { return class_ids.size(); }
  nd::Matrix logits(const nd::Matrix& features) const {
    return nd::forward(net, features);
  }
};

struct OpenClassifierConfig {
  gen::ClassifierConfig base;
  double unknown_weight = 1.0;  // relative loss weight of unknown rows
};

struct OpenTrainResult {
  OpenSetClassifier classifier;
  double known_train_accuracy = 0.0;
  double unknown_train_recall = 0.0;
};

/// Trains on [synthesized unseen, synthesized unknown]; both groups must be
/// non-empty and their label spaces disjoint (unknown rows carry
/// kUnknownLabel, known rows must not).
OpenTrainResult train_open_classifier(const gen::SyntheticDataset& unseen_synth,
                                      const gen::SyntheticDataset& unknown_synth,
                                      const OpenClassifierConfig& config,
                                      std::uint64_t seed);

struct ScoredPrediction {
  double open_score = 0.0;           // softmax probability of the unknown column
  std::uint32_t predicted_class = 0; // argmax over the K known columns
  std::vector<float> logits;
};

ScoredPrediction open_score(const OpenSetClassifier& classifier,
                            std::span<const float> x);
std::vector<ScoredPrediction> open_score_pool(const OpenSetClassifier& classifier,
                                              const nd::Matrix& features);

}  // namespace zsosr::ase
