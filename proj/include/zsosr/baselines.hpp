#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zsosr/ase.hpp"
#include "zsosr/classifier.hpp"

namespace zsosr::baselines {

enum class BaselineKind { Msp, MaxLogit, Energy, Odin, LogitNorm };

std::string baseline_name(BaselineKind k);
BaselineKind baseline_from_name(const std::string& name);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::Msp;
  double temperature = 1.0;     // msp/energy 1, odin 1000
  double odin_eps = 0.0014;     // odin input perturbation magnitude
  double logitnorm_tau = 0.04;  // logit-norm scale

  void validate() const;
};

/// 1 - max softmax probability; higher = more unknown.
double score_msp(std::span<const float> logits);

/// -max logit. Not shift-invariant: adding c to all logits shifts it by -c.
double score_maxlogit(std::span<const float> logits);

/// Helmholtz free energy -T log sum exp(logits/T); equals -adv_energy
/// identically.
double score_energy(std::span<const float> logits, double temperature);

/// Temperature-scaled MSP after one signed input perturbation against the
/// predicted-class confidence.
double score_odin(const gen::ClosedSetClassifier& classifier, std::span<const float> x,
                  double temperature, double eps);

/// Closed-set classifier trained with cross-entropy on logits normalized to
/// norm 1/tau; scored at inference via MSP on the raw logits.
gen::ClosedTrainResult train_logitnorm_classifier(const gen::SyntheticDataset& train,
                                                  double tau,
                                                  const gen::ClassifierConfig& config,
                                                  std::uint64_t seed);

/// One ScoredPrediction per test row; predicted class from the K-way head,
/// open score per the baseline formula.
std::vector<ase::ScoredPrediction> run_baseline(const BaselineSpec& spec,
                                                const gen::ClosedSetClassifier& classifier,
                                                const nd::Matrix& test_pool);

}  // namespace zsosr::baselines
