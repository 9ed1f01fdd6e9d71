#include "zsosr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "zsosr/loss.hpp"

namespace zsosr::baselines {

using nd::Matrix;

std::string baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::Msp: return "msp";
    case BaselineKind::MaxLogit: return "maxlogit";
    case BaselineKind::Energy: return "energy";
    case BaselineKind::Odin: return "odin";
    case BaselineKind::LogitNorm: return "logitnorm";
  }
  throw std::logic_error("baseline_name: bad enum");
}

BaselineKind baseline_from_name(const std::string& name) {
  if (name == "msp") return BaselineKind::Msp;
  if (name == "maxlogit") return BaselineKind::MaxLogit;
  if (name == "energy") return BaselineKind::Energy;
  if (name == "odin") return BaselineKind::Odin;
  if (name == "logitnorm") return BaselineKind::LogitNorm;
  throw std::invalid_argument("unknown baseline: " + name);
}

void BaselineSpec::validate() const {
  if (temperature <= 0.0) {
    throw std::invalid_argument("baseline spec: temperature must be > 0");
  }
  if (odin_eps < 0.0) throw std::invalid_argument("baseline spec: odin_eps must be >= 0");
  if (logitnorm_tau <= 0.0) {
    throw std::invalid_argument("baseline spec: logitnorm tau must be > 0");
  }
}

namespace {

double max_softmax(std::span<const float> logits, double temperature) {
  double m = logits[0] / temperature;
  for (float v : logits) m = std::max(m, v / temperature);
  double s = 0.0;
  for (float v : logits) s += std::exp(v / temperature - m);
  // max softmax = exp(0) / s since m is the max of the scaled logits.
  return 1.0 / s;
}

}  // namespace

double score_msp(std::span<const float> logits) {
  if (logits.empty()) throw std::invalid_argument("score_msp: empty logits");
  return 1.0 - max_softmax(logits, 1.0);
}

double score_maxlogit(std::span<const float> logits) {
  if (logits.empty()) throw std::invalid_argument("score_maxlogit: empty logits");
  double m = logits[0];
  for (float v : logits) m = std::max(m, static_cast<double>(v));
  return -m;
}

double score_energy(std::span<const float> logits, double temperature) {
  return -ase::adv_energy(logits, temperature);
}

double score_odin(const gen::ClosedSetClassifier& classifier, std::span<const float> x,
                  double temperature, double eps) {
  Matrix batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.row(0).begin());

  if (eps != 0.0) {
    // Input gradient of -log max softmax(logits/T) at the predicted class.
    const Matrix z = nd::forward(classifier.net, batch);
    std::uint32_t pred = 0;
    for (std::size_t j = 1; j < z.cols(); ++j) {
      if (z.at(0, j) > z.at(0, pred)) pred = static_cast<std::uint32_t>(j);
    }
    nd::LossSpec spec{nd::LossKind::SoftmaxCrossEntropy, temperature};
    auto r = nd::loss_and_grads(classifier.net, batch, nd::Targets::from_labels({pred}),
                                spec, true);
    for (std::size_t j = 0; j < batch.cols(); ++j) {
      const float g = r.grads.input.at(0, j);
      const float sign = (g > 0.0f) ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
      batch.at(0, j) -= static_cast<float>(eps) * sign;
    }
  }
  const Matrix z = nd::forward(classifier.net, batch);
  return 1.0 - max_softmax(z.row(0), temperature);
}

gen::ClosedTrainResult train_logitnorm_classifier(const gen::SyntheticDataset& train,
                                                  double tau,
                                                  const gen::ClassifierConfig& config,
                                                  std::uint64_t seed) {
  if (tau <= 0.0) {
    throw std::invalid_argument("train_logitnorm_classifier: tau must be > 0");
  }
  std::set<std::uint32_t> distinct(train.labels.begin(), train.labels.end());
  std::vector<std::uint32_t> class_ids(distinct.begin(), distinct.end());
  std::map<std::uint32_t, std::size_t> index;
  for (std::size_t i = 0; i < class_ids.size(); ++i) index[class_ids[i]] = i;
  std::vector<std::uint32_t> targets(train.labels.size());
  for (std::size_t i = 0; i < train.labels.size(); ++i) {
    targets[i] = static_cast<std::uint32_t>(index.at(train.labels[i]));
  }
  nd::LossSpec spec{nd::LossKind::LogitNormCrossEntropy};
  spec.tau = tau;
  gen::LinearTrainResult r = gen::train_linear_softmax(train.features, targets,
                                                       class_ids.size(), spec, config,
                                                       seed);
  gen::ClosedTrainResult out;
  out.classifier = gen::ClosedSetClassifier{std::move(r.net), std::move(class_ids)};
  out.train_accuracy = r.train_accuracy;
  return out;
}

std::vector<ase::ScoredPrediction> run_baseline(const BaselineSpec& spec,
                                                const gen::ClosedSetClassifier& classifier,
                                                const Matrix& test_pool) {
  spec.validate();
  const Matrix z = nd::forward(classifier.net, test_pool);
  std::vector<ase::ScoredPrediction> out;
  out.reserve(test_pool.rows());
  for (std::size_t i = 0; i < test_pool.rows(); ++i) {
    ase::ScoredPrediction sp;
    const auto row = z.row(i);
    sp.logits.assign(row.begin(), row.end());
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    sp.predicted_class = classifier.class_ids[best];
    switch (spec.kind) {
      case BaselineKind::Msp:
      case BaselineKind::LogitNorm:  // logit-norm scores via MSP on raw logits
        sp.open_score = score_msp(row);
        break;
      case BaselineKind::MaxLogit:
        sp.open_score = score_maxlogit(row);
        break;
      case BaselineKind::Energy:
        sp.open_score = score_energy(row, spec.temperature);
        break;
      case BaselineKind::Odin:
        sp.open_score =
            score_odin(classifier, test_pool.row(i), spec.temperature, spec.odin_eps);
        break;
    }
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace zsosr::baselines
