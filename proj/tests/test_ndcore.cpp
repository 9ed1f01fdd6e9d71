#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "zsosr/adam.hpp"
#include "zsosr/loss.hpp"
#include "zsosr/matrix.hpp"
#include "zsosr/mlp.hpp"
#include "zsosr/rng.hpp"

using namespace zsosr;
using namespace zsosr::nd;

namespace {

MlpModel identity_layer(std::size_t dim) {
  MlpModel m = build_mlp({dim, dim}, {Activation::Identity}, 0);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      m.layer(0).weights.at(i, j) = (i == j) ? 1.0f : 0.0f;
    }
    m.layer(0).bias.at(0, i) = 0.0f;
  }
  return m;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t k = 0; k < m.size(); ++k) {
    m.data()[k] = static_cast<float>(rng.gaussian() * scale);
  }
  return m;
}

}  // namespace

TEST_CASE("build_mlp identity network maps input to itself") {
  MlpModel m = identity_layer(3);
  Matrix out = forward(m, Matrix::from_rows({{1.0f, 2.0f, 3.0f}}));
  CHECK(out.at(0, 0) == 1.0f);
  CHECK(out.at(0, 1) == 2.0f);
  CHECK(out.at(0, 2) == 3.0f);
}

TEST_CASE("build_mlp is deterministic for a fixed seed") {
  MlpModel a = build_mlp({2, 1}, {Activation::Identity}, 42);
  MlpModel b = build_mlp({2, 1}, {Activation::Identity}, 42);
  CHECK(a == b);
  MlpModel c = build_mlp({2, 1}, {Activation::Identity}, 43);
  CHECK(a.layer(0).weights != c.layer(0).weights);
}

TEST_CASE("build_mlp parameter count") {
  MlpModel m = build_mlp({2048, 1024, 312},
                         {Activation::LeakyRectifier, Activation::Identity}, 7);
  CHECK(m.parameter_count() == 2048u * 1024u + 1024u + 1024u * 312u + 312u);
}

TEST_CASE("build_mlp rejects bad dimension lists") {
  CHECK_THROWS(build_mlp({}, {}, 0));
  CHECK_THROWS(build_mlp({4}, {}, 0));
  CHECK_THROWS(build_mlp({4, 0, 2}, {Activation::Identity, Activation::Identity}, 0));
}

TEST_CASE("forward applies rectifiers as defined") {
  MlpModel m = identity_layer(2);
  m.layer(0).activation = Activation::Rectifier;
  Matrix out = forward(m, Matrix::from_rows({{-1.0f, 2.0f}}));
  CHECK(out.at(0, 0) == 0.0f);
  CHECK(out.at(0, 1) == 2.0f);

  MlpModel leaky = identity_layer(1);
  leaky.layer(0).activation = Activation::LeakyRectifier;
  Matrix lout = forward(leaky, Matrix::from_rows({{-5.0f}}));
  CHECK(lout.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("forward names expected and actual dims on shape mismatch") {
  MlpModel m = build_mlp({3, 2}, {Activation::Identity}, 0);
  try {
    forward(m, Matrix(1, 4));
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find('4') != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("cross-entropy of uniform logits is ln K") {
  for (std::size_t k : {2u, 5u, 25u}) {
    MlpModel m = identity_layer(k);
    Matrix batch(1, k, 0.0f);
    auto r = loss_and_grads(m, batch, Targets::from_labels({0}),
                            {LossKind::SoftmaxCrossEntropy});
    CHECK(r.loss == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-9));
  }
}

TEST_CASE("squared loss hand-differentiated case: w=2, x=1, target=0") {
  MlpModel m = build_mlp({1, 1}, {Activation::Identity}, 0);
  m.layer(0).weights.at(0, 0) = 2.0f;
  m.layer(0).bias.at(0, 0) = 0.0f;
  auto r = loss_and_grads(m, Matrix::from_rows({{1.0f}}),
                          Targets::from_values(Matrix::from_rows({{0.0f}})),
                          {LossKind::MeanSquared});
  CHECK(r.loss == doctest::Approx(4.0));
  CHECK(r.grads.weights[0].at(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("free-energy loss of zero logits is ln 2") {
  MlpModel m = identity_layer(2);
  auto r = loss_and_grads(m, Matrix(1, 2, 0.0f), Targets::none(),
                          {LossKind::FreeEnergy, 1.0});
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("composite loss kind is rejected by the single-head evaluator") {
  MlpModel m = identity_layer(2);
  CHECK_THROWS(loss_and_grads(m, Matrix(1, 2, 0.0f), Targets::none(),
                              {LossKind::Composite}));
}

TEST_CASE("adam leaves parameters unchanged under zero gradient") {
  MlpModel m = build_mlp({2, 2}, {Activation::Identity}, 3);
  MlpModel before = m;
  AdamState s = AdamState::init(m, {});
  adam_step(m, Gradients::zeros_like(m), s);
  CHECK(m == before);
}

TEST_CASE("adam first step moves by about the step size") {
  MlpModel m = build_mlp({1, 1}, {Activation::Identity}, 0);
  m.layer(0).weights.at(0, 0) = 0.0f;
  Gradients g = Gradients::zeros_like(m);
  g.weights[0].at(0, 0) = 1.0f;
  AdamState s = AdamState::init(m, {.step_size = 0.1});
  adam_step(m, g, s);
  CHECK(m.layer(0).weights.at(0, 0) == doctest::Approx(-0.1).epsilon(1e-4));
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    MlpModel m = build_mlp({3, 2}, {Activation::Identity}, 11);
    AdamState s = AdamState::init(m, {});
    Gradients g = Gradients::zeros_like(m);
    for (std::size_t k = 0; k < g.weights[0].size(); ++k) {
      g.weights[0].data()[k] = 0.25f * static_cast<float>(k + 1);
    }
    adam_step(m, g, s);
    adam_step(m, g, s);
    return m;
  };
  CHECK(run() == run());
}

TEST_CASE("adam validates hyperparameters and shapes") {
  MlpModel m = build_mlp({2, 2}, {Activation::Identity}, 0);
  CHECK_THROWS(AdamState::init(m, {.step_size = 0.0}));
  CHECK_THROWS(AdamState::init(m, {.beta1 = 1.0}));
  AdamState s = AdamState::init(m, {});
  Gradients bad = Gradients::zeros_like(m);
  bad.weights[0] = Matrix(3, 3);
  CHECK_THROWS(adam_step(m, bad, s));
}

TEST_CASE("finite differences: identity layer with squared loss") {
  MlpModel m = identity_layer(3);
  Rng rng(5);
  Matrix batch = random_matrix(4, 3, rng);
  Matrix target = random_matrix(4, 3, rng);
  const double err = finite_diff_check(m, batch, Targets::from_values(target),
                                       {LossKind::MeanSquared}, 1e-4);
  CHECK(err < 1e-6);
}

TEST_CASE("finite differences: two-layer rectifier net with cross-entropy") {
  MlpModel m = build_mlp({4, 6, 3}, {Activation::Rectifier, Activation::Identity}, 0);
  Rng rng(0);
  Matrix batch = random_matrix(5, 4, rng);
  const double err = finite_diff_check(m, batch,
                                       Targets::from_labels({0, 1, 2, 0, 1}),
                                       {LossKind::SoftmaxCrossEntropy}, 1e-4);
  CHECK(err < 1e-3);
}

TEST_CASE("finite differences: free-energy loss gradients include inputs") {
  MlpModel m = build_mlp({3, 5, 4}, {Activation::LeakyRectifier, Activation::Identity}, 2);
  Rng rng(2);
  Matrix batch = random_matrix(3, 3, rng);
  const double err =
      finite_diff_check(m, batch, Targets::none(), {LossKind::FreeEnergy, 1.5}, 1e-4);
  CHECK(err < 1e-3);
}

TEST_CASE("finite differences: every loss kind on 20 random instances") {
  const Activation acts[] = {Activation::Identity, Activation::Rectifier,
                             Activation::LeakyRectifier};
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(1000 + inst);
    const std::size_t in = 2 + rng.next_below(4);
    const std::size_t hid = 2 + rng.next_below(5);
    const std::size_t rows = 1 + rng.next_below(4);

    {
      // cross-entropy, two layers
      const std::size_t out = 2 + rng.next_below(4);
      MlpModel m = build_mlp({in, hid, out},
                             {acts[rng.next_below(3)], Activation::Identity},
                             rng.next_u64());
      Matrix batch = random_matrix(rows, in, rng);
      std::vector<std::uint32_t> labels(rows);
      for (auto& l : labels) l = static_cast<std::uint32_t>(rng.next_below(out));
      CHECK(finite_diff_check(m, batch, Targets::from_labels(labels),
                              {LossKind::SoftmaxCrossEntropy, 0.5 + rng.next_double()},
                              1e-4) < 1e-3);
    }
    {
      // mean-squared
      const std::size_t out = 1 + rng.next_below(4);
      MlpModel m = build_mlp({in, hid, out},
                             {acts[rng.next_below(3)], Activation::Identity},
                             rng.next_u64());
      Matrix batch = random_matrix(rows, in, rng);
      Matrix target = random_matrix(rows, out, rng);
      CHECK(finite_diff_check(m, batch, Targets::from_values(target),
                              {LossKind::MeanSquared}, 1e-4) < 1e-3);
    }
    {
      // free energy
      const std::size_t out = 2 + rng.next_below(4);
      MlpModel m = build_mlp({in, hid, out},
                             {acts[rng.next_below(3)], Activation::Identity},
                             rng.next_u64());
      Matrix batch = random_matrix(rows, in, rng);
      CHECK(finite_diff_check(m, batch, Targets::none(),
                              {LossKind::FreeEnergy, 0.5 + rng.next_double()},
                              1e-4) < 1e-3);
    }
    {
      // critic difference: scalar output, mixed directions
      MlpModel m = build_mlp({in, hid, 1},
                             {acts[rng.next_below(3)], Activation::Identity},
                             rng.next_u64());
      const std::size_t n = rows + 1;
      Matrix batch = random_matrix(n, in, rng);
      std::vector<float> dirs(n, 1.0f);
      dirs.back() = -1.0f;
      CHECK(finite_diff_check(m, batch, Targets::from_directions(dirs),
                              {LossKind::CriticDifference}, 1e-4) < 1e-3);
    }
    {
      // normalized-logit cross-entropy. A fully dead rectifier layer yields
      // exactly-zero logits, the one non-differentiable point of this loss,
      // so the hidden activation is kept leaky or linear here.
      const std::size_t out = 2 + rng.next_below(4);
      MlpModel m = build_mlp({in, hid, out},
                             {rng.next_below(2) ? Activation::LeakyRectifier
                                                : Activation::Identity,
                              Activation::Identity},
                             rng.next_u64());
      Matrix batch = random_matrix(rows, in, rng);
      std::vector<std::uint32_t> labels(rows);
      for (auto& l : labels) l = static_cast<std::uint32_t>(rng.next_below(out));
      LossSpec spec{LossKind::LogitNormCrossEntropy};
      spec.tau = 0.04 + rng.next_double() * 0.5;
      CHECK(finite_diff_check(m, batch, Targets::from_labels(labels), spec, 1e-4) <
            1e-3);
    }
  }
}

TEST_CASE("softmax rows sum to one and survive large logits") {
  Rng rng(9);
  Matrix logits = random_matrix(6, 8, rng, 3.0);
  logits.at(0, 0) = 1000.0f;  // must not overflow thanks to max-subtraction
  Matrix p = softmax(logits);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (float v : p.row(i)) {
      CHECK(std::isfinite(v));
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("cross-entropy of a one-hot-correct prediction falls monotonically with margin") {
  MlpModel m = identity_layer(2);
  double prev = 1e300;
  for (double margin : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    Matrix batch = Matrix::from_rows({{static_cast<float>(margin), 0.0f}});
    auto r = loss_and_grads(m, batch, Targets::from_labels({0}),
                            {LossKind::SoftmaxCrossEntropy});
    CHECK(r.loss < prev);
    prev = r.loss;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("loss_and_grads is bit-deterministic") {
  MlpModel m = build_mlp({4, 3}, {Activation::LeakyRectifier}, 21);
  Rng rng(21);
  Matrix batch = random_matrix(3, 4, rng);
  auto a = loss_and_grads(m, batch, Targets::from_labels({0, 1, 2}),
                          {LossKind::SoftmaxCrossEntropy}, true);
  auto b = loss_and_grads(m, batch, Targets::from_labels({0, 1, 2}),
                          {LossKind::SoftmaxCrossEntropy}, true);
  CHECK(a.loss == b.loss);
  CHECK(a.grads.weights[0] == b.grads.weights[0]);
  CHECK(a.grads.input == b.grads.input);
}

TEST_CASE("forward reports the offending layer on non-finite values") {
  MlpModel m = build_mlp({2, 2, 2}, {Activation::Identity, Activation::Identity}, 0);
  m.layer(1).weights.at(0, 0) = std::numeric_limits<float>::infinity();
  try {
    forward(m, Matrix(1, 2, 1.0f));
    FAIL("expected a non-finite error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("logitnorm normalized logits have norm 1/tau") {
  const double tau = 0.04;
  Rng rng(13);
  Matrix logits = random_matrix(5, 4, rng, 2.0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double norm = 0.0;
    for (float v : logits.row(i)) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    double znorm = 0.0;
    for (float v : logits.row(i)) {
      const double zn = v / ((norm + 1e-7) * tau);
      znorm += zn * zn;
    }
    CHECK(std::sqrt(znorm) == doctest::Approx(1.0 / tau).epsilon(1e-5));
  }
}
