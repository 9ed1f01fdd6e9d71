#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zsosr/mlp.hpp"

namespace zsosr::nd {

enum class LossKind {
  SoftmaxCrossEntropy,
  MeanSquared,
  FreeEnergy,
  CriticDifference,
  LogitNormCrossEntropy,
  Composite,  // assembled by the owning module as a weighted sum of terms
};

std::string loss_kind_name(LossKind k);

struct LossSpec {
  LossKind kind = LossKind::SoftmaxCrossEntropy;
  double temperature = 1.0;  // cross-entropy logits/T, free-energy T
  double tau = 0.04;         // logit-norm scale
};

/// Targets for a loss head. Which member is read depends on the loss kind:
/// labels for the cross-entropy variants, values for mean-squared,
/// directions (+1 push up, -1 push down) for the critic difference,
/// nothing for free energy.
struct Targets {
  std::vector<std::uint32_t> labels;
  Matrix values;
  std::vector<float> directions;
  std::vector<float> row_weights;  // optional per-row loss weights (label losses)

  static Targets from_labels(std::vector<std::uint32_t> l) {
    Targets t;
    t.labels = std::move(l);
    return t;
  }
  static Targets from_values(Matrix v) {
    Targets t;
    t.values = std::move(v);
    return t;
  }
  static Targets from_directions(std::vector<float> d) {
    Targets t;
    t.directions = std::move(d);
    return t;
  }
  static Targets none() { return {}; }
};

/// max(z) + log(sum(exp(z - max))) over a row, in double.
double logsumexp(std::span<const float> z);

/// Row-wise softmax of logits/T.
Matrix softmax(const Matrix& logits, double temperature = 1.0);

struct LossValueAndLogitGrad {
  double loss = 0.0;
  Matrix logit_grads;  // dLoss/d(output), same shape as the output
};

/// Loss head on model outputs: value plus gradient with respect to the
/// outputs. Mean over rows for all kinds except the critic difference,
/// which uses its per-group means.
LossValueAndLogitGrad eval_loss_head(const Matrix& output, const Targets& targets,
                                     const LossSpec& spec);

struct LossAndGrads {
  double loss = 0.0;
  Gradients grads;
};

/// Forward + loss + reverse pass in one call. Input gradients are filled
/// when `wrt_input` is set (ODIN's perturbation and the adversarial
/// embedding path both differentiate through frozen models via this).
LossAndGrads loss_and_grads(const MlpModel& model, const Matrix& batch,
                            const Targets& targets, const LossSpec& spec,
                            bool wrt_input = false);

/// Double-precision forward pass reading the float32 parameters. This is the
/// numeric-differentiation reference path: it shares nothing with the float
/// backward pass beyond the layer definitions.
std::vector<double> forward_f64(const MlpModel& model, std::span<const double> input_row);
double eval_loss_f64(const MlpModel& model, const Matrix& batch, const Targets& targets,
                     const LossSpec& spec);

/// Max over sampled parameters (and inputs) of
/// |analytic - numeric| / max(1, |numeric|), with numeric gradients from
/// central differences of the double-precision path. `eps` must lie in
/// [1e-6, 1e-2].
double finite_diff_check(const MlpModel& model, const Matrix& batch,
                         const Targets& targets, const LossSpec& spec, double eps);

}  // namespace zsosr::nd
