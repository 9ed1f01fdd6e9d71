#include "zsosr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace zsosr::nd {

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::SoftmaxCrossEntropy: return "softmax-cross-entropy";
    case LossKind::MeanSquared: return "mean-squared";
    case LossKind::FreeEnergy: return "free-energy";
    case LossKind::CriticDifference: return "critic-difference";
    case LossKind::LogitNormCrossEntropy: return "logitnorm-cross-entropy";
    case LossKind::Composite: return "composite";
  }
  throw std::logic_error("loss_kind_name: bad enum");
}

double logsumexp(std::span<const float> z) {
  if (z.empty()) throw std::invalid_argument("logsumexp: empty row");
  double m = z[0];
  for (float v : z) m = std::max(m, static_cast<double>(v));
  double s = 0.0;
  for (float v : z) s += std::exp(static_cast<double>(v) - m);
  return m + std::log(s);
}

Matrix softmax(const Matrix& logits, double temperature) {
  if (temperature <= 0.0) throw std::invalid_argument("softmax: temperature must be > 0");
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    double m = row[0] / temperature;
    for (float v : row) m = std::max(m, v / temperature);
    double s = 0.0;
    std::vector<double> e(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      e[j] = std::exp(row[j] / temperature - m);
      s += e[j];
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      p.at(i, j) = static_cast<float>(e[j] / s);
    }
  }
  return p;
}

namespace {

void check_labels(const Targets& t, const Matrix& out) {
  if (t.labels.size() != out.rows()) {
    throw std::invalid_argument("loss: " + std::to_string(t.labels.size()) +
                                " labels for " + std::to_string(out.rows()) + " rows");
  }
  for (std::uint32_t l : t.labels) {
    if (l >= out.cols()) {
      throw std::invalid_argument("loss: label " + std::to_string(l) +
                                  " out of range for " + std::to_string(out.cols()) +
                                  " outputs");
    }
  }
  if (!t.row_weights.empty() && t.row_weights.size() != out.rows()) {
    throw std::invalid_argument("loss: row_weights size mismatch");
  }
}

double row_weight(const Targets& t, std::size_t i) {
  return t.row_weights.empty() ? 1.0 : static_cast<double>(t.row_weights[i]);
}

LossValueAndLogitGrad cross_entropy_head(const Matrix& out, const Targets& t,
                                         double temperature) {
  check_labels(t, out);
  const double inv_n = 1.0 / static_cast<double>(out.rows());
  LossValueAndLogitGrad r;
  r.logit_grads = Matrix(out.rows(), out.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const auto row = out.row(i);
    const double w = row_weight(t, i);
    double m = row[0] / temperature;
    for (float v : row) m = std::max(m, v / temperature);
    double s = 0.0;
    std::vector<double> e(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      e[j] = std::exp(row[j] / temperature - m);
      s += e[j];
    }
    const double lse = m + std::log(s);
    acc += w * (lse - row[t.labels[i]] / temperature);
    for (std::size_t j = 0; j < row.size(); ++j) {
      double g = e[j] / s;
      if (j == t.labels[i]) g -= 1.0;
      r.logit_grads.at(i, j) = static_cast<float>(w * g / temperature * inv_n);
    }
  }
  r.loss = acc * inv_n;
  return r;
}

LossValueAndLogitGrad mean_squared_head(const Matrix& out, const Targets& t) {
  if (!t.values.same_shape(out)) {
    throw std::invalid_argument("mean-squared loss: target shape " +
                                std::to_string(t.values.rows()) + "x" +
                                std::to_string(t.values.cols()) + " vs output " +
                                std::to_string(out.rows()) + "x" +
                                std::to_string(out.cols()));
  }
  const double inv_n = 1.0 / static_cast<double>(out.rows());
  LossValueAndLogitGrad r;
  r.logit_grads = Matrix(out.rows(), out.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = static_cast<double>(out.data()[i]) - t.values.data()[i];
    acc += d * d;
    r.logit_grads.data()[i] = static_cast<float>(2.0 * d * inv_n);
  }
  r.loss = acc * inv_n;
  return r;
}

LossValueAndLogitGrad free_energy_head(const Matrix& out, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("free-energy loss: temperature must be > 0");
  }
  const double inv_n = 1.0 / static_cast<double>(out.rows());
  LossValueAndLogitGrad r;
  r.logit_grads = Matrix(out.rows(), out.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const auto row = out.row(i);
    double m = row[0] / temperature;
    for (float v : row) m = std::max(m, v / temperature);
    double s = 0.0;
    std::vector<double> e(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      e[j] = std::exp(row[j] / temperature - m);
      s += e[j];
    }
    acc += temperature * (m + std::log(s));
    for (std::size_t j = 0; j < row.size(); ++j) {
      r.logit_grads.at(i, j) = static_cast<float>(e[j] / s * inv_n);
    }
  }
  r.loss = acc * inv_n;
  return r;
}

LossValueAndLogitGrad critic_difference_head(const Matrix& out, const Targets& t) {
  if (out.cols() != 1) {
    throw std::invalid_argument("critic-difference loss: output must have 1 column, has " +
                                std::to_string(out.cols()));
  }
  if (t.directions.size() != out.rows()) {
    throw std::invalid_argument("critic-difference loss: need one direction per row");
  }
  std::size_t n_up = 0, n_down = 0;
  for (float d : t.directions) {
    if (d > 0.0f) ++n_up;
    else if (d < 0.0f) ++n_down;
    else throw std::invalid_argument("critic-difference loss: zero direction");
  }
  LossValueAndLogitGrad r;
  r.logit_grads = Matrix(out.rows(), 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const bool up = t.directions[i] > 0.0f;
    const double group = up ? static_cast<double>(n_up) : static_cast<double>(n_down);
    const double sign = up ? 1.0 : -1.0;
    acc -= sign * out.at(i, 0) / group;
    r.logit_grads.at(i, 0) = static_cast<float>(-sign / group);
  }
  r.loss = acc;
  return r;
}

// Stabilizer added to the logit norm before dividing; keeps the gradient
// finite for all-zero logit rows.
constexpr double kNormEps = 1e-7;

LossValueAndLogitGrad logitnorm_head(const Matrix& out, const Targets& t, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("logitnorm loss: tau must be > 0");
  check_labels(t, out);
  const double inv_n = 1.0 / static_cast<double>(out.rows());
  LossValueAndLogitGrad r;
  r.logit_grads = Matrix(out.rows(), out.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const auto row = out.row(i);
    double norm_sq = 0.0;
    for (float v : row) norm_sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(norm_sq);
    const double denom = (norm + kNormEps) * tau;
    std::vector<double> zn(row.size());
    double m = -1e300;
    for (std::size_t j = 0; j < row.size(); ++j) {
      zn[j] = row[j] / denom;
      m = std::max(m, zn[j]);
    }
    double s = 0.0;
    std::vector<double> e(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      e[j] = std::exp(zn[j] - m);
      s += e[j];
    }
    acc += (m + std::log(s)) - zn[t.labels[i]];
    // dL/dzn then through zn_j = z_j / ((|z|+eps) tau).
    std::vector<double> g(row.size());
    double g_dot_z = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      g[j] = e[j] / s - (j == t.labels[i] ? 1.0 : 0.0);
      g_dot_z += g[j] * row[j];
    }
    // dL/dz_j = g_j/denom - (g . z) * tau * z_j / (|z| * denom^2)
    for (std::size_t j = 0; j < row.size(); ++j) {
      double dz = g[j] / denom;
      if (norm > 0.0) {
        dz -= g_dot_z * tau * row[j] / (norm * denom * denom);
      }
      r.logit_grads.at(i, j) = static_cast<float>(dz * inv_n);
    }
  }
  r.loss = acc * inv_n;
  return r;
}

}  // namespace

LossValueAndLogitGrad eval_loss_head(const Matrix& output, const Targets& targets,
                                     const LossSpec& spec) {
  if (output.rows() == 0) throw std::invalid_argument("loss: empty batch");
  switch (spec.kind) {
    case LossKind::SoftmaxCrossEntropy:
      return cross_entropy_head(output, targets, spec.temperature);
    case LossKind::MeanSquared:
      return mean_squared_head(output, targets);
    case LossKind::FreeEnergy:
      return free_energy_head(output, spec.temperature);
    case LossKind::CriticDifference:
      return critic_difference_head(output, targets);
    case LossKind::LogitNormCrossEntropy:
      return logitnorm_head(output, targets, spec.tau);
    case LossKind::Composite:
      throw std::invalid_argument(
          "composite losses are assembled by their owning module, not evaluated "
          "as a single head");
  }
  throw std::invalid_argument("unknown loss kind");
}

LossAndGrads loss_and_grads(const MlpModel& model, const Matrix& batch,
                            const Targets& targets, const LossSpec& spec,
                            bool wrt_input) {
  const ForwardTrace trace = forward_cached(model, batch);
  LossValueAndLogitGrad head = eval_loss_head(trace.output(), targets, spec);
  if (!std::isfinite(head.loss)) {
    throw std::runtime_error("loss: non-finite value from " + loss_kind_name(spec.kind));
  }
  LossAndGrads r;
  r.loss = head.loss;
  r.grads = backward(model, batch, trace, head.logit_grads, wrt_input);
  return r;
}

// ---------------------------------------------------------------------------
// Double-precision reference path.
// ---------------------------------------------------------------------------

std::vector<double> forward_f64(const MlpModel& model, std::span<const double> input_row) {
  if (input_row.size() != model.input_dim()) {
    throw std::invalid_argument("forward_f64: row has " +
                                std::to_string(input_row.size()) + " entries, expected " +
                                std::to_string(model.input_dim()));
  }
  std::vector<double> cur(input_row.begin(), input_row.end());
  for (const Layer& l : model.layers()) {
    std::vector<double> next(l.weights.cols());
    for (std::size_t j = 0; j < next.size(); ++j) {
      double acc = l.bias.data()[j];
      for (std::size_t k = 0; k < cur.size(); ++k) {
        acc += cur[k] * static_cast<double>(l.weights.at(k, j));
      }
      switch (l.activation) {
        case Activation::Identity: break;
        case Activation::Rectifier: acc = std::max(acc, 0.0); break;
        case Activation::LeakyRectifier:
          if (acc < 0.0) acc *= static_cast<double>(kLeakySlope);
          break;
      }
      next[j] = acc;
    }
    cur = std::move(next);
  }
  return cur;
}

namespace {

double lse_f64(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

double row_loss_f64(const std::vector<double>& out, std::size_t row_index,
                    const Targets& t, const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::SoftmaxCrossEntropy: {
      std::vector<double> zt(out.size());
      for (std::size_t j = 0; j < out.size(); ++j) zt[j] = out[j] / spec.temperature;
      const double w = t.row_weights.empty() ? 1.0 : t.row_weights[row_index];
      return w * (lse_f64(zt) - zt[t.labels[row_index]]);
    }
    case LossKind::MeanSquared: {
      double acc = 0.0;
      for (std::size_t j = 0; j < out.size(); ++j) {
        const double d = out[j] - t.values.at(row_index, j);
        acc += d * d;
      }
      return acc;
    }
    case LossKind::FreeEnergy: {
      std::vector<double> zt(out.size());
      for (std::size_t j = 0; j < out.size(); ++j) zt[j] = out[j] / spec.temperature;
      return spec.temperature * lse_f64(zt);
    }
    case LossKind::LogitNormCrossEntropy: {
      double norm_sq = 0.0;
      for (double v : out) norm_sq += v * v;
      const double denom = (std::sqrt(norm_sq) + kNormEps) * spec.tau;
      std::vector<double> zn(out.size());
      for (std::size_t j = 0; j < out.size(); ++j) zn[j] = out[j] / denom;
      return lse_f64(zn) - zn[t.labels[row_index]];
    }
    default:
      throw std::invalid_argument("row_loss_f64: unsupported kind");
  }
}

}  // namespace

double eval_loss_f64(const MlpModel& model, const Matrix& batch, const Targets& targets,
                     const LossSpec& spec) {
  if (batch.rows() == 0) throw std::invalid_argument("eval_loss_f64: empty batch");
  if (spec.kind == LossKind::CriticDifference) {
    std::size_t n_up = 0, n_down = 0;
    for (float d : targets.directions) (d > 0.0f ? n_up : n_down) += 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      std::vector<double> in(batch.row(i).begin(), batch.row(i).end());
      const std::vector<double> out = forward_f64(model, in);
      const bool up = targets.directions[i] > 0.0f;
      acc -= (up ? 1.0 : -1.0) * out[0] / (up ? n_up : n_down);
    }
    return acc;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    std::vector<double> in(batch.row(i).begin(), batch.row(i).end());
    const std::vector<double> out = forward_f64(model, in);
    acc += row_loss_f64(out, i, targets, spec);
  }
  return acc / static_cast<double>(batch.rows());
}

double finite_diff_check(const MlpModel& model, const Matrix& batch,
                         const Targets& targets, const LossSpec& spec, double eps) {
  if (eps < 1e-6 || eps > 1e-2) {
    throw std::invalid_argument("finite_diff_check: eps must lie in [1e-6, 1e-2]");
  }
  LossAndGrads analytic = loss_and_grads(model, batch, targets, spec, true);

  MlpModel probe = model;
  Matrix probe_batch = batch;

  auto central = [&](float* slot) {
    const float saved = *slot;
    const float hi = static_cast<float>(static_cast<double>(saved) + eps);
    const float lo = static_cast<float>(static_cast<double>(saved) - eps);
    *slot = hi;
    const double f_hi = eval_loss_f64(probe, probe_batch, targets, spec);
    *slot = lo;
    const double f_lo = eval_loss_f64(probe, probe_batch, targets, spec);
    *slot = saved;
    // Use the realized float step, not the nominal eps.
    return (f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
  };

  double worst = 0.0;
  auto consider = [&](double a, double n) {
    const double err = std::abs(a - n) / std::max(1.0, std::abs(n));
    worst = std::max(worst, err);
  };

  const std::size_t total = model.parameter_count();
  const std::size_t stride = std::max<std::size_t>(1, total / 256);
  std::size_t flat = 0;
  for (std::size_t li = 0; li < probe.num_layers(); ++li) {
    Layer& l = probe.layer(li);
    for (std::size_t k = 0; k < l.weights.size(); ++k, ++flat) {
      if (flat % stride != 0) continue;
      consider(analytic.grads.weights[li].data()[k], central(&l.weights.data()[k]));
    }
    for (std::size_t k = 0; k < l.bias.size(); ++k, ++flat) {
      if (flat % stride != 0) continue;
      consider(analytic.grads.bias[li].data()[k], central(&l.bias.data()[k]));
    }
  }

  const std::size_t in_total = probe_batch.size();
  const std::size_t in_stride = std::max<std::size_t>(1, in_total / 128);
  for (std::size_t k = 0; k < in_total; k += in_stride) {
    consider(analytic.grads.input.data()[k], central(&probe_batch.data()[k]));
  }
  return worst;
}

}  // namespace zsosr::nd
