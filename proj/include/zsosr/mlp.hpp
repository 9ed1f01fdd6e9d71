#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zsosr/matrix.hpp"

namespace zsosr::nd {

enum class Activation { Identity, Rectifier, LeakyRectifier };

/// Slope of the leaky rectifier's negative branch.
inline constexpr float kLeakySlope = 0.2f;

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Layer {
  Matrix weights;  // in × out
  Matrix bias;     // 1 × out
  Activation activation = Activation::Identity;

  bool operator==(const Layer& o) const = default;
};

/// Fixed stack of affine layers with elementwise activations. This is the
/// whole model zoo: generator, critic, encoder and both classifiers are
/// instances of it.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().weights.rows(); }
  std::size_t output_dim() const { return layers_.back().weights.cols(); }

  Layer& layer(std::size_t i) { return layers_[i]; }
  const Layer& layer(std::size_t i) const { return layers_[i]; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const;
  bool all_finite() const;

  bool operator==(const MlpModel& o) const = default;

 private:
  std::vector<Layer> layers_;
};

/// Builds an MLP with Gaussian weights scaled by 1/sqrt(fan_in) and zero
/// biases. `dims` lists input plus per-layer output sizes, so `dims.size()-1`
/// layers; `activations` has one entry per layer.
MlpModel build_mlp(const std::vector<std::size_t>& dims,
                   const std::vector<Activation>& activations, std::uint64_t seed);

/// Per-layer pre-activations and activated outputs kept for the backward pass.
struct ForwardTrace {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  const Matrix& output() const { return post.back(); }
};

Matrix forward(const MlpModel& model, const Matrix& batch);
ForwardTrace forward_cached(const MlpModel& model, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weights;  // same shapes as model weights
  std::vector<Matrix> bias;     // same shapes as model biases
  Matrix input;                 // batch-shaped; filled when requested

  static Gradients zeros_like(const MlpModel& model);
  /// this += scale * other (parameter gradients only).
  void axpy(double scale, const Gradients& other);
};

/// Reverse-mode pass from dLoss/d(output) back to parameter gradients and,
/// when `wrt_input` is set, dLoss/d(batch).
Gradients backward(const MlpModel& model, const Matrix& batch, const ForwardTrace& trace,
                   const Matrix& output_grad, bool wrt_input = false);

}  // namespace zsosr::nd
