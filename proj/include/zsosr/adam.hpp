#pragma once

#include <cstdint>
#include <vector>

#include "zsosr/mlp.hpp"

namespace zsosr::nd {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators, one per parameter tensor.
struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Matrix> m_bias, v_bias;
  std::uint64_t step = 0;

  static AdamState init(const MlpModel& model, const AdamConfig& config);
};

/// One bias-corrected Adam update, in place. Deterministic: identical
/// (model, grads, state) inputs produce identical outputs.
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state);

/// Flat-vector variant for optimizing free parameter vectors (adversarial
/// embeddings, feature-space points).
struct AdamVecState {
  AdamConfig config;
  std::vector<double> m, v;
  std::uint64_t step = 0;

  static AdamVecState init(std::size_t dim, const AdamConfig& config);
};

void adam_step_vec(std::vector<float>& params, const std::vector<float>& grads,
                   AdamVecState& state);

}  // namespace zsosr::nd
