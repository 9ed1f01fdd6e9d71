#include "zsosr/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "zsosr/rng.hpp"

namespace zsosr::nd {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Rectifier: return "rectifier";
    case Activation::LeakyRectifier: return "leaky-rectifier";
  }
  throw std::logic_error("activation_name: bad enum");
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "rectifier") return Activation::Rectifier;
  if (name == "leaky-rectifier") return Activation::LeakyRectifier;
  throw std::invalid_argument("unknown activation: " + name);
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

bool MlpModel::all_finite() const {
  for (const Layer& l : layers_) {
    if (!l.weights.all_finite() || !l.bias.all_finite()) return false;
  }
  return true;
}

MlpModel build_mlp(const std::vector<std::size_t>& dims,
                   const std::vector<Activation>& activations, std::uint64_t seed) {
  if (dims.size() < 2) {
    throw std::invalid_argument("build_mlp: need at least one layer (two dims)");
  }
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("build_mlp: zero dimension");
  }
  if (activations.size() != dims.size() - 1) {
    throw std::invalid_argument("build_mlp: need one activation per layer, got " +
                                std::to_string(activations.size()) + " for " +
                                std::to_string(dims.size() - 1) + " layers");
  }
  Rng rng(seed);
  std::vector<Layer> layers;
  layers.reserve(dims.size() - 1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    l.weights = Matrix(dims[i], dims[i + 1]);
    const float scale = 1.0f / std::sqrt(static_cast<float>(dims[i]));
    for (std::size_t k = 0; k < l.weights.size(); ++k) {
      l.weights.data()[k] = rng.gaussian_f() * scale;
    }
    l.bias = Matrix(1, dims[i + 1]);
    l.activation = activations[i];
    layers.push_back(std::move(l));
  }
  return MlpModel(std::move(layers));
}

namespace {

void apply_activation(Matrix& m, Activation a) {
  switch (a) {
    case Activation::Identity:
      return;
    case Activation::Rectifier:
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.data()[i] < 0.0f) m.data()[i] = 0.0f;
      }
      return;
    case Activation::LeakyRectifier:
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.data()[i] < 0.0f) m.data()[i] *= kLeakySlope;
      }
      return;
  }
}

void check_input_dim(const MlpModel& model, const Matrix& batch) {
  if (batch.cols() != model.input_dim()) {
    throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                " columns, model expects " +
                                std::to_string(model.input_dim()));
  }
}

void check_finite(const Matrix& m, std::size_t layer_index) {
  if (!m.all_finite()) {
    throw std::runtime_error("forward: non-finite values after layer " +
                             std::to_string(layer_index));
  }
}

}  // namespace

Matrix forward(const MlpModel& model, const Matrix& batch) {
  check_input_dim(model, batch);
  Matrix cur = batch;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const Layer& l = model.layer(i);
    cur = matmul(cur, l.weights);
    add_row_inplace(cur, l.bias);
    apply_activation(cur, l.activation);
    check_finite(cur, i);
  }
  return cur;
}

ForwardTrace forward_cached(const MlpModel& model, const Matrix& batch) {
  check_input_dim(model, batch);
  ForwardTrace t;
  t.pre.reserve(model.num_layers());
  t.post.reserve(model.num_layers());
  const Matrix* cur = &batch;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const Layer& l = model.layer(i);
    Matrix z = matmul(*cur, l.weights);
    add_row_inplace(z, l.bias);
    check_finite(z, i);
    t.pre.push_back(z);
    apply_activation(z, l.activation);
    t.post.push_back(std::move(z));
    cur = &t.post.back();
  }
  return t;
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  g.weights.reserve(model.num_layers());
  g.bias.reserve(model.num_layers());
  for (const Layer& l : model.layers()) {
    g.weights.emplace_back(l.weights.rows(), l.weights.cols());
    g.bias.emplace_back(1, l.bias.cols());
  }
  return g;
}

void Gradients::axpy(double scale, const Gradients& other) {
  if (weights.size() != other.weights.size()) {
    throw std::invalid_argument("Gradients::axpy: layer count mismatch");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (std::size_t k = 0; k < weights[i].size(); ++k) {
      weights[i].data()[k] = static_cast<float>(weights[i].data()[k] +
                                                scale * other.weights[i].data()[k]);
    }
    for (std::size_t k = 0; k < bias[i].size(); ++k) {
      bias[i].data()[k] =
          static_cast<float>(bias[i].data()[k] + scale * other.bias[i].data()[k]);
    }
  }
}

Gradients backward(const MlpModel& model, const Matrix& batch, const ForwardTrace& trace,
                   const Matrix& output_grad, bool wrt_input) {
  if (trace.post.size() != model.num_layers()) {
    throw std::invalid_argument("backward: trace does not match model");
  }
  if (output_grad.rows() != batch.rows() || output_grad.cols() != model.output_dim()) {
    throw std::invalid_argument("backward: output_grad is " +
                                std::to_string(output_grad.rows()) + "x" +
                                std::to_string(output_grad.cols()) + ", expected " +
                                std::to_string(batch.rows()) + "x" +
                                std::to_string(model.output_dim()));
  }
  Gradients g;
  g.weights.resize(model.num_layers());
  g.bias.resize(model.num_layers());

  Matrix delta = output_grad;
  for (std::size_t li = model.num_layers(); li-- > 0;) {
    const Layer& l = model.layer(li);
    // Activation derivative on the pre-activation.
    switch (l.activation) {
      case Activation::Identity:
        break;
      case Activation::Rectifier:
        for (std::size_t k = 0; k < delta.size(); ++k) {
          if (trace.pre[li].data()[k] <= 0.0f) delta.data()[k] = 0.0f;
        }
        break;
      case Activation::LeakyRectifier:
        for (std::size_t k = 0; k < delta.size(); ++k) {
          if (trace.pre[li].data()[k] <= 0.0f) delta.data()[k] *= kLeakySlope;
        }
        break;
    }
    const Matrix& layer_input = (li == 0) ? batch : trace.post[li - 1];
    g.weights[li] = matmul_tn(layer_input, delta);
    g.bias[li] = column_sums(delta);
    if (li > 0 || wrt_input) {
      delta = matmul_nt(delta, l.weights);
    }
  }
  if (wrt_input) g.input = std::move(delta);
  return g;
}

}  // namespace zsosr::nd
