#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "zsosr/classifier.hpp"
#include "zsosr/generator.hpp"
#include "zsosr/metrics.hpp"
#include "zsosr/rng.hpp"
#include "zsosr/synthetic.hpp"

using namespace zsosr;
using namespace zsosr::gen;
using zsosr::data::SplitView;
using zsosr::data::SyntheticWorld;
using zsosr::data::SyntheticWorldConfig;
using zsosr::data::TrainingView;
using zsosr::nd::Matrix;

namespace {

struct WorldFixture {
  SyntheticWorld world;
  SplitView split;
  TrainingView view;

  explicit WorldFixture(double noise, std::uint64_t seed,
                        std::size_t samples_per_class = 100) {
    SyntheticWorldConfig cfg;
    cfg.noise_scale = noise;
    cfg.samples_per_class = samples_per_class;
    world = data::synth_world(cfg, seed);
    split = data::make_split(world.bundle, {}, seed);
    view = data::training_view(world.bundle, split);
  }
};

GeneratorConfig small_cvae(std::size_t steps = 2000) {
  GeneratorConfig cfg;
  cfg.mode = GeneratorMode::Cvae;
  cfg.hidden = 128;
  cfg.steps = steps;
  cfg.batch = 64;
  cfg.step_size = 1e-3;
  return cfg;
}

GeneratorConfig small_wgan(std::size_t steps = 600) {
  GeneratorConfig cfg;
  cfg.mode = GeneratorMode::WganClip;
  cfg.hidden = 128;
  cfg.steps = steps;
  cfg.critic_steps = 5;
  cfg.clip = 0.05;
  cfg.batch = 64;
  cfg.step_size = 5e-4;
  return cfg;
}

double mean_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  return std::accumulate(v.begin() + begin, v.begin() + end, 0.0) /
         static_cast<double>(end - begin);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<float> per_class_mean(const Matrix& rows) {
  std::vector<float> mean(rows.cols());
  for (std::size_t j = 0; j < rows.cols(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) acc += rows.at(i, j);
    mean[j] = static_cast<float>(acc / static_cast<double>(rows.rows()));
  }
  return mean;
}

}  // namespace

TEST_CASE("cvae training halves the reconstruction error") {
  WorldFixture f(0.1, 42);
  TrainedGenerator g = train_generator(f.view, small_cvae(2000), 7);
  REQUIRE(g.loss_trace.size() == 2000);
  const double first = mean_of(g.loss_trace, 0, 20);
  const double last = mean_of(g.loss_trace, 1980, 2000);
  CHECK(last < 0.5 * first);
  CHECK(g.generator.net.all_finite());
}

TEST_CASE("wgan generator recovers oracle class structure") {
  WorldFixture f(0.1, 42);
  TrainedGenerator g = train_generator(f.view, small_wgan(4000), 7);
  REQUIRE(g.critic.has_value());

  // Generated means of the *unseen* classes track the oracle means.
  SyntheticDataset synth = synthesize_features(
      g.generator, f.view.unseen_attributes, f.view.unseen_ids, 200, 11);
  double cos_sum = 0.0;
  for (std::size_t c = 0; c < f.view.unseen_ids.size(); ++c) {
    Matrix rows(200, synth.features.cols());
    for (std::size_t i = 0; i < 200; ++i) {
      const auto src = synth.features.row(c * 200 + i);
      std::copy(src.begin(), src.end(), rows.row(i).begin());
    }
    const std::vector<float> gen_mean = per_class_mean(rows);
    const std::vector<float> oracle = f.world.class_mean(f.view.unseen_ids[c]);
    cos_sum += cosine(gen_mean, oracle);
  }
  CHECK(cos_sum / f.view.unseen_ids.size() >= 0.8);
}

TEST_CASE("wgan critic separates real from generated seen data") {
  WorldFixture f(0.1, 13);
  TrainedGenerator g = train_generator(f.view, small_wgan(), 3);
  REQUIRE(g.critic.has_value());

  // Held-out seen-class samples from the true distribution.
  double real_sum = 0.0, fake_sum = 0.0;
  std::size_t n = 0;
  for (std::uint32_t cls : f.view.seen_ids) {
    const Matrix fresh = f.world.sample_features(cls, 50, 912);
    const auto idx = std::find(f.view.seen_ids.begin(), f.view.seen_ids.end(), cls) -
                     f.view.seen_ids.begin();
    Matrix attrs(fresh.rows(), f.view.seen_attributes.cols());
    for (std::size_t i = 0; i < fresh.rows(); ++i) {
      const auto a = f.view.seen_attributes.row(idx);
      std::copy(a.begin(), a.end(), attrs.row(i).begin());
    }
    Rng rng(derive_seed(511, "critic-test", cls));
    Matrix noise(fresh.rows(), g.generator.noise_dim);
    for (std::size_t k = 0; k < noise.size(); ++k) noise.data()[k] = rng.gaussian_f();
    const Matrix fake = g.generator.generate(attrs, noise);

    const Matrix d_real = nd::forward(g.critic->net, nd::hconcat(fresh, attrs));
    const Matrix d_fake = nd::forward(g.critic->net, nd::hconcat(fake, attrs));
    for (std::size_t i = 0; i < d_real.rows(); ++i) {
      real_sum += d_real.at(i, 0);
      fake_sum += d_fake.at(i, 0);
      ++n;
    }
  }
  CHECK(real_sum / n > fake_sum / n);
}

TEST_CASE("wgan with zero clip is a configuration error") {
  WorldFixture f(0.1, 5, 10);
  GeneratorConfig cfg = small_wgan(10);
  cfg.clip = 0.0;
  CHECK_THROWS_AS(train_generator(f.view, cfg, 1), std::invalid_argument);
}

TEST_CASE("synthesize_features bookkeeping, determinism and finiteness") {
  // 25 classes x 300 draws, mirroring the benchmark synthesis volume.
  Matrix embeddings(25, 8);
  Rng rng(3);
  for (std::size_t k = 0; k < embeddings.size(); ++k) {
    embeddings.data()[k] = rng.gaussian_f();
  }
  std::vector<std::uint32_t> ids(25);
  std::iota(ids.begin(), ids.end(), 100);

  GeneratorModel g;
  g.net = nd::build_mlp({8 + 8, 32, 16},
                        {nd::Activation::LeakyRectifier, nd::Activation::Identity}, 9);
  g.attribute_dim = 8;
  g.noise_dim = 8;
  g.feature_dim = 16;

  SyntheticDataset s = synthesize_features(g, embeddings, ids, 300, 77);
  CHECK(s.features.rows() == 7500);
  CHECK(s.features.all_finite());
  std::map<std::uint32_t, std::size_t> counts;
  for (auto l : s.labels) counts[l]++;
  CHECK(counts.size() == 25);
  for (const auto& [id, c] : counts) CHECK(c == 300);

  SyntheticDataset s2 = synthesize_features(g, embeddings, ids, 300, 77);
  CHECK(s.features == s2.features);

  // Distinct embeddings produce distinct synthesized class means.
  double min_dist = 1e300;
  for (std::size_t a = 0; a < 25; ++a) {
    Matrix rows_a(300, 16);
    for (std::size_t i = 0; i < 300; ++i) {
      const auto src = s.features.row(a * 300 + i);
      std::copy(src.begin(), src.end(), rows_a.row(i).begin());
    }
    const auto mean_a = per_class_mean(rows_a);
    for (std::size_t b = a + 1; b < 25; ++b) {
      Matrix rows_b(300, 16);
      for (std::size_t i = 0; i < 300; ++i) {
        const auto src = s.features.row(b * 300 + i);
        std::copy(src.begin(), src.end(), rows_b.row(i).begin());
      }
      min_dist = std::min(min_dist,
                          nd::euclidean_distance(mean_a, per_class_mean(rows_b)));
    }
  }
  CHECK(min_dist > 0.0);

  CHECK_THROWS(synthesize_features(g, Matrix(2, 5), {1, 2}, 10, 0));  // dim mismatch
}

TEST_CASE("cvae decoder Monte-Carlo means are consistent and near the zero-noise decode") {
  WorldFixture f(0.05, 31);
  TrainedGenerator g = train_generator(f.view, small_cvae(1500), 19);

  const std::size_t n = 2000;
  SyntheticDataset s1 = synthesize_features(g.generator, f.view.unseen_attributes,
                                            f.view.unseen_ids, n, 5);
  SyntheticDataset s2 = synthesize_features(g.generator, f.view.unseen_attributes,
                                            f.view.unseen_ids, n, 6);
  for (std::size_t c = 0; c < f.view.unseen_ids.size(); ++c) {
    Matrix rows1(n, s1.features.cols()), rows2(n, s2.features.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = s1.features.row(c * n + i);
      std::copy(a.begin(), a.end(), rows1.row(i).begin());
      const auto b = s2.features.row(c * n + i);
      std::copy(b.begin(), b.end(), rows2.row(i).begin());
    }
    const std::vector<float> m1 = per_class_mean(rows1);
    const std::vector<float> m2 = per_class_mean(rows2);

    // Two independent Monte-Carlo estimates of E[G(a, eps)] agree within the
    // combined standard error on almost every coordinate.
    std::size_t in_band = 0;
    double pooled_std_sum = 0.0;
    for (std::size_t j = 0; j < m1.size(); ++j) {
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = rows1.at(i, j) - m1[j];
        var += d * d;
      }
      var /= static_cast<double>(n - 1);
      pooled_std_sum += std::sqrt(var);
      const double se_combined = std::sqrt(2.0 * var / static_cast<double>(n));
      if (std::abs(m1[j] - m2[j]) <= 3.0 * se_combined) ++in_band;
    }
    CHECK(static_cast<double>(in_band) / m1.size() >= 0.9);

    // The zero-noise decode is close to the sample mean at the scale of the
    // output spread itself: G is nonlinear in the noise, so E[G(a,eps)] and
    // G(a,0) differ by a curvature term well below one standard deviation.
    Matrix attr(1, f.view.unseen_attributes.cols());
    const auto a = f.view.unseen_attributes.row(c);
    std::copy(a.begin(), a.end(), attr.row(0).begin());
    const Matrix ref = g.generator.generate(attr, Matrix(1, g.generator.noise_dim));
    const double mean_std = pooled_std_sum / static_cast<double>(m1.size());
    for (std::size_t j = 0; j < m1.size(); ++j) {
      CHECK(std::abs(m1[j] - ref.at(0, j)) <= 3.0 * mean_std);
    }
  }
}

TEST_CASE("closed classifier drives a separable toy set to full accuracy") {
  SyntheticDataset toy;
  toy.features = Matrix(40, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    toy.features.at(i, 0) = -2.0f + 0.01f * i;
    toy.features.at(i, 1) = 1.0f;
    toy.labels.push_back(5);
  }
  for (std::size_t i = 20; i < 40; ++i) {
    toy.features.at(i, 0) = 2.0f + 0.01f * i;
    toy.features.at(i, 1) = -1.0f;
    toy.labels.push_back(9);
  }
  ClosedTrainResult r = train_closed_classifier(toy, {.epochs = 100, .batch = 8}, 4);
  CHECK(r.train_accuracy == 1.0);
  CHECK(r.classifier.class_ids == std::vector<std::uint32_t>{5, 9});
}

TEST_CASE("closed classifier rejects classes without samples") {
  SyntheticDataset toy;
  toy.features = Matrix(4, 2, 1.0f);
  toy.labels = {0, 0, 1, 1};
  CHECK_THROWS_WITH_AS(train_closed_classifier(toy, {}, 0, {0, 1, 2}),
                       doctest::Contains("no samples"), std::invalid_argument);
}

TEST_CASE("permuting the class order permutes logit columns") {
  SyntheticDataset toy;
  toy.features = Matrix(30, 3);
  Rng rng(8);
  for (std::size_t k = 0; k < toy.features.size(); ++k) {
    toy.features.data()[k] = rng.gaussian_f();
  }
  for (std::size_t i = 0; i < 30; ++i) {
    toy.labels.push_back(static_cast<std::uint32_t>(i % 3));
  }
  ClosedTrainResult a = train_closed_classifier(toy, {.epochs = 5}, 2, {0, 1, 2});
  ClosedTrainResult b = train_closed_classifier(toy, {.epochs = 5}, 2, {2, 0, 1});

  // Identical training stream, so column c of (a) equals the column of (b)
  // holding the same class.
  const Matrix za = a.classifier.logits(toy.features);
  const Matrix zb = b.classifier.logits(toy.features);
  for (std::size_t i = 0; i < za.rows(); ++i) {
    for (std::uint32_t cls = 0; cls < 3; ++cls) {
      const std::size_t ca = *a.classifier.class_index(cls);
      const std::size_t cb = *b.classifier.class_index(cls);
      CHECK(za.at(i, ca) == doctest::Approx(zb.at(i, cb)).epsilon(1e-6));
    }
  }
}

TEST_CASE("closed classifier logits are affine in the input") {
  SyntheticDataset toy;
  toy.features = Matrix(20, 4);
  Rng rng(6);
  for (std::size_t k = 0; k < toy.features.size(); ++k) {
    toy.features.data()[k] = rng.gaussian_f();
  }
  for (std::size_t i = 0; i < 20; ++i) {
    toy.labels.push_back(static_cast<std::uint32_t>(i % 2));
  }
  ClosedTrainResult r = train_closed_classifier(toy, {.epochs = 3}, 1);
  const auto& layer = r.classifier.net.layer(0);
  Matrix x = Matrix::from_rows({{0.3f, -1.2f, 0.7f, 2.0f}});
  Matrix z = r.classifier.logits(x);
  Matrix manual = nd::matmul(x, layer.weights);
  nd::add_row_inplace(manual, layer.bias);
  CHECK(z == manual);
}

TEST_CASE("zsl accuracy conventions") {
  // Perfect predictions.
  std::vector<std::uint32_t> labels{1, 1, 2, 2, 2, 3};
  CHECK(eval::closed_acc(labels, labels, {1, 2, 3}) == 1.0);

  // Constant predictor on K balanced classes scores 1/K.
  std::vector<std::uint32_t> balanced{1, 1, 2, 2, 3, 3};
  std::vector<std::uint32_t> constant(balanced.size(), 1);
  CHECK(eval::closed_acc(constant, balanced, {1, 2, 3}) ==
        doctest::Approx(1.0 / 3.0));

  // Per-class mean: accuracies 1.0 and 0.5 average to 0.75 regardless of
  // class sizes.
  std::vector<std::uint32_t> truth{7, 7, 7, 7, 8, 8};
  std::vector<std::uint32_t> pred{7, 7, 7, 7, 8, 9};
  CHECK(eval::closed_acc(pred, truth, {7, 8}) == doctest::Approx(0.75));
}

TEST_CASE("closed-set pipeline reaches high unseen accuracy on an easy world") {
  WorldFixture f(0.05, 17);
  TrainedGenerator g = train_generator(f.view, small_cvae(2000), 23);
  SyntheticDataset synth = synthesize_features(g.generator, f.view.unseen_attributes,
                                               f.view.unseen_ids, 300, 29);
  ClosedTrainResult r = train_closed_classifier(synth, {.epochs = 40}, 31);

  const data::TestPool pool = data::test_pool(f.world.bundle, f.split);
  std::vector<std::uint32_t> rows;
  std::vector<std::uint32_t> truth;
  for (std::size_t i = 0; i < pool.truth.size(); ++i) {
    if (pool.truth[i] != data::kUnknownLabel) {
      rows.push_back(static_cast<std::uint32_t>(i));
      truth.push_back(pool.truth[i]);
    }
  }
  const Matrix known = nd::gather_rows(pool.features, rows);
  CHECK(zsl_accuracy(r.classifier, known, truth) >= 0.9);
}

TEST_CASE("generator training is deterministic under a fixed seed") {
  WorldFixture f(0.1, 2, 30);
  GeneratorConfig cfg = small_cvae(120);
  TrainedGenerator a = train_generator(f.view, cfg, 5);
  TrainedGenerator b = train_generator(f.view, cfg, 5);
  CHECK(a.generator.net == b.generator.net);
  CHECK(a.loss_trace == b.loss_trace);
}
