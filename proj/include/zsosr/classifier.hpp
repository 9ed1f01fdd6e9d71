#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "zsosr/generator.hpp"
#include "zsosr/loss.hpp"
#include "zsosr/mlp.hpp"

namespace zsosr::gen {

struct ClassifierConfig {
  std::size_t epochs = 40;
  std::size_t batch = 128;
  double step_size = 1e-3;
};

/// Single linear layer over features; logit column order follows class_ids.
struct ClosedSetClassifier {
  nd::MlpModel net;
  std::vector<std::uint32_t> class_ids;

  std::size_t num_classes() const { return class_ids.size(); }
  nd::Matrix logits(const nd::Matrix& features) const { return nd::forward(net, features); }
  std::optional<std::size_t> class_index(std::uint32_t class_id) const;
  /// Argmax class ids, one per row.
  std::vector<std::uint32_t> predict(const nd::Matrix& features) const;
};

struct ClosedTrainResult {
  ClosedSetClassifier classifier;
  double train_accuracy = 0.0;
};

/// Trains a linear softmax classifier on the synthesized unseen features.
/// `class_order`, when given, fixes the logit column order; otherwise the
/// sorted distinct labels are used. Every class in the order must have at
/// least one sample.
ClosedTrainResult train_closed_classifier(const SyntheticDataset& train,
                                          const ClassifierConfig& config,
                                          std::uint64_t seed,
                                          std::vector<std::uint32_t> class_order = {});

/// Mean over classes of per-class top-1 accuracy on unseen-class samples.
double zsl_accuracy(const ClosedSetClassifier& classifier, const nd::Matrix& features,
                    const std::vector<std::uint32_t>& labels);

/// Shared linear-softmax training loop: minibatched cross-entropy variants
/// under Adam. Used by the closed, open and logit-norm classifier trainers.
struct LinearTrainResult {
  nd::MlpModel net;
  double train_accuracy = 0.0;
};

LinearTrainResult train_linear_softmax(const nd::Matrix& features,
                                       const std::vector<std::uint32_t>& target_indices,
                                       std::size_t num_outputs,
                                       const nd::LossSpec& spec,
                                       const ClassifierConfig& config, std::uint64_t seed,
                                       const std::vector<float>& row_weights = {});

}  // namespace zsosr::gen
