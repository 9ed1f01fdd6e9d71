#include "zsosr/classifier.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "zsosr/adam.hpp"
#include "zsosr/metrics.hpp"
#include "zsosr/rng.hpp"

namespace zsosr::gen {

using nd::Matrix;

std::optional<std::size_t> ClosedSetClassifier::class_index(std::uint32_t class_id) const {
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    if (class_ids[i] == class_id) return i;
  }
  return std::nullopt;
}

std::vector<std::uint32_t> ClosedSetClassifier::predict(const Matrix& features) const {
  const Matrix z = logits(features);
  std::vector<std::uint32_t> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = class_ids[best];
  }
  return out;
}

LinearTrainResult train_linear_softmax(const Matrix& features,
                                       const std::vector<std::uint32_t>& target_indices,
                                       std::size_t num_outputs, const nd::LossSpec& spec,
                                       const ClassifierConfig& config, std::uint64_t seed,
                                       const std::vector<float>& row_weights) {
  if (features.rows() == 0) throw std::invalid_argument("train: empty training set");
  if (target_indices.size() != features.rows()) {
    throw std::invalid_argument("train: target count mismatch");
  }
  // Zero-initialized linear head: the objective is convex, and zero init
  // makes training exactly equivariant under permutations of the class
  // order (column trajectories depend only on their own class).
  nd::MlpModel net = nd::build_mlp({features.cols(), num_outputs},
                                   {nd::Activation::Identity},
                                   derive_seed(seed, "classifier-init"));
  for (std::size_t k = 0; k < net.layer(0).weights.size(); ++k) {
    net.layer(0).weights.data()[k] = 0.0f;
  }
  nd::AdamState state = nd::AdamState::init(net, {.step_size = config.step_size});

  std::vector<std::uint32_t> order(features.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng(derive_seed(seed, "classifier-shuffle"));

  const std::size_t batch = std::min<std::size_t>(config.batch, features.rows());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start + batch <= order.size(); start += batch) {
      const std::span<const std::uint32_t> rows(order.data() + start, batch);
      const Matrix x = nd::gather_rows(features, rows);
      nd::Targets targets;
      targets.labels.reserve(batch);
      for (std::uint32_t r : rows) targets.labels.push_back(target_indices[r]);
      if (!row_weights.empty()) {
        targets.row_weights.reserve(batch);
        for (std::uint32_t r : rows) targets.row_weights.push_back(row_weights[r]);
      }
      auto r = nd::loss_and_grads(net, x, targets, spec);
      nd::adam_step(net, r.grads, state);
    }
  }

  LinearTrainResult result;
  const Matrix z = nd::forward(net, features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    hits += (best == target_indices[i]);
  }
  result.train_accuracy = static_cast<double>(hits) / static_cast<double>(z.rows());
  result.net = std::move(net);
  return result;
}

ClosedTrainResult train_closed_classifier(const SyntheticDataset& train,
                                          const ClassifierConfig& config,
                                          std::uint64_t seed,
                                          std::vector<std::uint32_t> class_order) {
  if (class_order.empty()) {
    std::set<std::uint32_t> distinct(train.labels.begin(), train.labels.end());
    class_order.assign(distinct.begin(), distinct.end());
  }
  if (class_order.empty()) {
    throw std::invalid_argument("train_closed_classifier: no classes");
  }
  std::map<std::uint32_t, std::size_t> index;
  for (std::size_t i = 0; i < class_order.size(); ++i) index[class_order[i]] = i;

  std::vector<std::size_t> per_class(class_order.size(), 0);
  std::vector<std::uint32_t> targets(train.labels.size());
  for (std::size_t i = 0; i < train.labels.size(); ++i) {
    auto it = index.find(train.labels[i]);
    if (it == index.end()) {
      throw std::invalid_argument("train_closed_classifier: label " +
                                  std::to_string(train.labels[i]) +
                                  " missing from the class order");
    }
    targets[i] = static_cast<std::uint32_t>(it->second);
    per_class[it->second] += 1;
  }
  for (std::size_t i = 0; i < per_class.size(); ++i) {
    if (per_class[i] == 0) {
      throw std::invalid_argument("train_closed_classifier: class " +
                                  std::to_string(class_order[i]) + " has no samples");
    }
  }

  LinearTrainResult r = train_linear_softmax(train.features, targets, class_order.size(),
                                             {nd::LossKind::SoftmaxCrossEntropy}, config,
                                             seed);
  ClosedTrainResult out;
  out.classifier = ClosedSetClassifier{std::move(r.net), std::move(class_order)};
  out.train_accuracy = r.train_accuracy;
  return out;
}

double zsl_accuracy(const ClosedSetClassifier& classifier, const Matrix& features,
                    const std::vector<std::uint32_t>& labels) {
  return eval::closed_acc(classifier.predict(features), labels, classifier.class_ids);
}

}  // namespace zsosr::gen
