#include "zsosr/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace zsosr::nd {

namespace {

void validate(const AdamConfig& c) {
  if (c.step_size <= 0.0) throw std::invalid_argument("adam: step_size must be > 0");
  if (c.beta1 <= 0.0 || c.beta1 >= 1.0 || c.beta2 <= 0.0 || c.beta2 >= 1.0) {
    throw std::invalid_argument("adam: decay rates must lie in (0,1)");
  }
  if (c.epsilon <= 0.0) throw std::invalid_argument("adam: epsilon must be > 0");
}

void update_tensor(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                   const AdamConfig& c, double bc1, double bc2) {
  if (!param.same_shape(grad)) {
    throw std::invalid_argument("adam: gradient shape " + std::to_string(grad.rows()) +
                                "x" + std::to_string(grad.cols()) +
                                " does not match parameter " +
                                std::to_string(param.rows()) + "x" +
                                std::to_string(param.cols()));
  }
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad.data()[k];
    const double mk = c.beta1 * m.data()[k] + (1.0 - c.beta1) * g;
    const double vk = c.beta2 * v.data()[k] + (1.0 - c.beta2) * g * g;
    m.data()[k] = static_cast<float>(mk);
    v.data()[k] = static_cast<float>(vk);
    const double m_hat = mk / bc1;
    const double v_hat = vk / bc2;
    param.data()[k] = static_cast<float>(param.data()[k] -
                                         c.step_size * m_hat /
                                             (std::sqrt(v_hat) + c.epsilon));
  }
}

}  // namespace

AdamState AdamState::init(const MlpModel& model, const AdamConfig& config) {
  validate(config);
  AdamState s;
  s.config = config;
  for (const Layer& l : model.layers()) {
    s.m_weights.emplace_back(l.weights.rows(), l.weights.cols());
    s.v_weights.emplace_back(l.weights.rows(), l.weights.cols());
    s.m_bias.emplace_back(1, l.bias.cols());
    s.v_bias.emplace_back(1, l.bias.cols());
  }
  return s;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state) {
  if (grads.weights.size() != model.num_layers() ||
      state.m_weights.size() != model.num_layers()) {
    throw std::invalid_argument("adam: layer count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    update_tensor(model.layer(i).weights, grads.weights[i], state.m_weights[i],
                  state.v_weights[i], state.config, bc1, bc2);
    update_tensor(model.layer(i).bias, grads.bias[i], state.m_bias[i], state.v_bias[i],
                  state.config, bc1, bc2);
  }
}

AdamVecState AdamVecState::init(std::size_t dim, const AdamConfig& config) {
  validate(config);
  AdamVecState s;
  s.config = config;
  s.m.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  return s;
}

void adam_step_vec(std::vector<float>& params, const std::vector<float>& grads,
                   AdamVecState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam: vector size mismatch");
  }
  state.step += 1;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * g;
    state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[k] / bc1;
    const double v_hat = state.v[k] / bc2;
    params[k] = static_cast<float>(params[k] -
                                   c.step_size * m_hat / (std::sqrt(v_hat) + c.epsilon));
  }
}

}  // namespace zsosr::nd
