#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "zsosr/metrics.hpp"
#include "zsosr/report.hpp"
#include "zsosr/rng.hpp"

using namespace zsosr;
using namespace zsosr::eval;

namespace fs = std::filesystem;

namespace {

/// Independent oracle: AUROC by trapezoidal integration of the ROC curve
/// over all distinct thresholds.
double auroc_trapezoid(std::vector<double> known, std::vector<double> unknown) {
  std::vector<double> thresholds = known;
  thresholds.insert(thresholds.end(), unknown.begin(), unknown.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  points.emplace_back(0.0, 0.0);
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (double s : unknown) tp += (s >= t);
    for (double s : known) fp += (s >= t);
    points.emplace_back(static_cast<double>(fp) / known.size(),
                        static_cast<double>(tp) / unknown.size());
  }
  points.emplace_back(1.0, 1.0);
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].first - points[i - 1].first) *
            (points[i].second + points[i - 1].second) / 2.0;
  }
  return area;
}

/// Brute-force pair counting oracle, ties half.
double auroc_pairs(const std::vector<double>& known, const std::vector<double>& unknown) {
  double wins = 0.0;
  for (double u : unknown) {
    for (double k : known) {
      if (u > k) wins += 1.0;
      else if (u == k) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(known.size()) * unknown.size());
}

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("zsosr_eval_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

std::vector<ase::ScoredPrediction> as_scored(const std::vector<double>& scores) {
  std::vector<ase::ScoredPrediction> out;
  for (double s : scores) {
    ase::ScoredPrediction sp;
    sp.open_score = s;
    sp.predicted_class = 0;
    out.push_back(sp);
  }
  return out;
}

}  // namespace

TEST_CASE("auroc frozen examples") {
  CHECK(auroc(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}) == 1.0);
  CHECK(auroc(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}) == 0.5);
  // 3 of 4 pairs correctly ordered.
  CHECK(auroc(std::vector<double>{0.1, 0.6}, std::vector<double>{0.4, 0.9}) == 0.75);
  CHECK_THROWS(auroc({}, std::vector<double>{1.0}));
  CHECK_THROWS(auroc(std::vector<double>{1.0}, {}));
}

TEST_CASE("rank auroc equals trapezoidal and pair-counting oracles") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nk = 1 + rng.next_below(40);
    const std::size_t nu = 1 + rng.next_below(40);
    std::vector<double> known(nk), unknown(nu);
    // Quantized scores force plenty of ties.
    for (double& s : known) {
      s = std::round(rng.gaussian() * 4.0) / 4.0;
    }
    for (double& s : unknown) {
      s = std::round((rng.gaussian() + 0.5) * 4.0) / 4.0;
    }
    const double rank = auroc(known, unknown);
    CHECK(rank == doctest::Approx(auroc_trapezoid(known, unknown)).epsilon(1e-9));
    CHECK(rank == doctest::Approx(auroc_pairs(known, unknown)).epsilon(1e-12));
  }
}

TEST_CASE("auroc invariances") {
  Rng rng(5);
  std::vector<double> known(30), unknown(25);
  for (double& s : known) s = rng.gaussian();
  for (double& s : unknown) s = rng.gaussian() + 0.7;

  const double base = auroc(known, unknown);

  // Strictly increasing transforms leave it unchanged.
  auto apply = [](std::vector<double> v, auto f) {
    for (double& s : v) s = f(s);
    return v;
  };
  auto exp_t = [](double s) { return std::exp(s); };
  auto affine = [](double s) { return 3.0 * s + 11.0; };
  CHECK(auroc(apply(known, exp_t), apply(unknown, exp_t)) ==
        doctest::Approx(base).epsilon(1e-12));
  CHECK(auroc(apply(known, affine), apply(unknown, affine)) ==
        doctest::Approx(base).epsilon(1e-12));

  // Swapping the groups complements it.
  CHECK(auroc(known, unknown) + auroc(unknown, known) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Permutation invariance.
  std::vector<double> shuffled_known = known;
  std::vector<double> shuffled_unknown = unknown;
  Rng shuffler(123);
  shuffler.shuffle(shuffled_known);
  shuffler.shuffle(shuffled_unknown);
  CHECK(auroc(shuffled_known, shuffled_unknown) == base);
}

TEST_CASE("fpr_at_tpr frozen examples") {
  // Perfect separation: no known sample above the detection threshold.
  CHECK(fpr_at_tpr(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}) == 0.0);

  // tpr_target = 1 detects down to the minimum unknown score.
  std::vector<double> known{0.1, 0.35, 0.6};
  std::vector<double> unknown{0.3, 0.5, 0.9};
  double expect = 0.0;
  for (double s : known) expect += (s >= 0.3);
  expect /= known.size();
  CHECK(fpr_at_tpr(known, unknown, 1.0) == doctest::Approx(expect));

  CHECK_THROWS(fpr_at_tpr({}, unknown));
  CHECK_THROWS(fpr_at_tpr(known, unknown, 0.0));
}

TEST_CASE("fpr95 of identical distributions sits near 0.95") {
  // Brute-force simulation under the chosen convention: both groups i.i.d.
  // from one distribution.
  double sum = 0.0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    Rng rng(1000 + t);
    std::vector<double> known(100), unknown(100);
    for (double& s : known) s = rng.gaussian();
    for (double& s : unknown) s = rng.gaussian();
    sum += fpr_at_tpr(known, unknown, 0.95);
  }
  CHECK(sum / trials == doctest::Approx(0.95).epsilon(0.105));
}

TEST_CASE("fpr_at_tpr is invariant under strictly increasing transforms") {
  Rng rng(7);
  std::vector<double> known(50), unknown(60);
  for (double& s : known) s = rng.gaussian();
  for (double& s : unknown) s = rng.gaussian() + 1.0;
  const double base = fpr_at_tpr(known, unknown);
  auto apply = [](std::vector<double> v, auto f) {
    for (double& s : v) s = f(s);
    return v;
  };
  auto exp_t = [](double s) { return std::exp(s); };
  auto affine = [](double s) { return 0.5 * s - 3.0; };
  CHECK(fpr_at_tpr(apply(known, exp_t), apply(unknown, exp_t)) == base);
  CHECK(fpr_at_tpr(apply(known, affine), apply(unknown, affine)) == base);
}

TEST_CASE("fpr_at_tpr id-positive convention mirrors the default") {
  std::vector<double> known{0.1, 0.2, 0.3, 0.4};
  std::vector<double> unknown{0.5, 0.6, 0.7, 0.8};
  // Perfect separation keeps both conventions at zero false positives.
  CHECK(fpr_at_tpr(known, unknown, 0.95, true) == 0.0);
  CHECK(fpr_at_tpr(known, unknown, 0.95, false) == 0.0);
}

TEST_CASE("openness values match the published sweep") {
  CHECK(openness(10, 10) == doctest::Approx(0.293).epsilon(0.004));
  CHECK(openness(10, 20) == doctest::Approx(0.423).epsilon(0.004));
  CHECK(openness(10, 30) == doctest::Approx(0.5).epsilon(0.004));
  CHECK(openness(10, 40) == doctest::Approx(0.553).epsilon(0.004));
  CHECK(openness(25, 0) == 0.0);
  CHECK_THROWS(openness(0, 10));
}

TEST_CASE("make_report populates metrics and histograms") {
  std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
  std::vector<std::uint32_t> truth{3, 3, data::kUnknownLabel, data::kUnknownLabel};
  auto scored = as_scored(scores);
  scored[0].predicted_class = 3;
  scored[1].predicted_class = 4;

  ReportOptions opt;
  opt.histogram_bins = 4;
  opt.n_unseen_classes = 10;
  opt.n_unknown_classes = 10;
  opt.method = "test";
  MetricsReport r = make_report(scored, truth, opt);
  CHECK(r.auroc == 1.0);
  CHECK(r.fpr95 == 0.0);
  CHECK(r.acc == doctest::Approx(0.5));
  CHECK(r.openness == doctest::Approx(0.293).epsilon(0.004));
  CHECK(r.n_unseen_samples == 2);
  CHECK(r.n_unknown_samples == 2);
  CHECK(std::accumulate(r.hist_unseen.begin(), r.hist_unseen.end(), std::size_t{0}) ==
        2);
  CHECK(std::accumulate(r.hist_unknown.begin(), r.hist_unknown.end(), std::size_t{0}) ==
        2);

  // A missing group is an error naming it.
  std::vector<std::uint32_t> all_known{3, 3, 3, 3};
  CHECK_THROWS_WITH_AS(make_report(scored, all_known, opt),
                       doctest::Contains("unknown"), std::invalid_argument);
  std::vector<std::uint32_t> all_unknown(4, data::kUnknownLabel);
  CHECK_THROWS_WITH_AS(make_report(scored, all_unknown, opt),
                       doctest::Contains("unseen"), std::invalid_argument);
}

TEST_CASE("score csv has one data row per sample") {
  const fs::path dir = temp_dir();
  std::vector<double> scores{0.25, 0.75};
  std::vector<std::uint32_t> truth{1, data::kUnknownLabel};
  const std::string path = (dir / "scores.csv").string();
  write_score_csv(path, as_scored(scores), truth);

  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "sample_id,score,group,predicted_class");
  CHECK(lines[1].find("unseen") != std::string::npos);
  CHECK(lines[2].find("unknown") != std::string::npos);
}

TEST_CASE("aggregation of identical runs has zero spread") {
  MetricsReport r;
  r.acc = 0.8;
  r.auroc = 0.9;
  r.fpr95 = 0.3;
  r.method = "ase";
  AggregateReport agg = aggregate_reports({r, r, r});
  CHECK(agg.n_runs == 3);
  CHECK(agg.auroc.mean == doctest::Approx(0.9));
  CHECK(agg.auroc.stddev == 0.0);
  CHECK(agg.acc.stddev == 0.0);
  CHECK(agg.fpr95.stddev == 0.0);
}

TEST_CASE("report json round-trips") {
  const fs::path dir = temp_dir();
  MetricsReport r;
  r.acc = 0.875;
  r.auroc = 0.9125;
  r.fpr95 = 0.25;
  r.openness = 0.293;
  r.n_unseen_samples = 100;
  r.n_unknown_samples = 80;
  r.seed = 42;
  r.config_hash = "deadbeef";
  r.method = "ase";
  const std::string path = (dir / "report.json").string();
  write_report_json(path, r);
  MetricsReport back = read_report_json(path);
  CHECK(back.acc == r.acc);
  CHECK(back.auroc == r.auroc);
  CHECK(back.fpr95 == r.fpr95);
  CHECK(back.seed == r.seed);
  CHECK(back.config_hash == r.config_hash);
  CHECK(back.method == r.method);
}

TEST_CASE("histogram json counts match sample counts") {
  const fs::path dir = temp_dir();
  Rng rng(3);
  std::vector<double> scores;
  std::vector<std::uint32_t> truth;
  for (int i = 0; i < 57; ++i) {
    scores.push_back(rng.next_double());
    truth.push_back(2);
  }
  for (int i = 0; i < 43; ++i) {
    scores.push_back(rng.next_double());
    truth.push_back(data::kUnknownLabel);
  }
  auto scored = as_scored(scores);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != data::kUnknownLabel) scored[i].predicted_class = 2;
  }
  ReportOptions opt;
  opt.histogram_bins = 10;
  MetricsReport r = make_report(scored, truth, opt);
  CHECK(std::accumulate(r.hist_unseen.begin(), r.hist_unseen.end(), std::size_t{0}) ==
        57);
  CHECK(std::accumulate(r.hist_unknown.begin(), r.hist_unknown.end(), std::size_t{0}) ==
        43);
  write_histogram_json((dir / "hist.json").string(), r);
  std::ifstream in(dir / "hist.json");
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(content.find("\"edges\"") != std::string::npos);
  CHECK(content.find("\"unseen\"") != std::string::npos);
  CHECK(content.find("\"unknown\"") != std::string::npos);
}

TEST_CASE("metrics are permutation invariant over input order") {
  Rng rng(17);
  std::vector<ase::ScoredPrediction> scored;
  std::vector<std::uint32_t> truth;
  for (int i = 0; i < 60; ++i) {
    ase::ScoredPrediction sp;
    sp.open_score = rng.next_double();
    sp.predicted_class = static_cast<std::uint32_t>(rng.next_below(3));
    scored.push_back(sp);
    truth.push_back(i % 4 == 0 ? data::kUnknownLabel
                               : static_cast<std::uint32_t>(rng.next_below(3)));
  }
  ReportOptions opt;
  MetricsReport a = make_report(scored, truth, opt);

  std::vector<std::size_t> perm(scored.size());
  std::iota(perm.begin(), perm.end(), 0u);
  Rng shuffler(5);
  shuffler.shuffle(perm);
  std::vector<ase::ScoredPrediction> scored_p;
  std::vector<std::uint32_t> truth_p;
  for (std::size_t i : perm) {
    scored_p.push_back(scored[i]);
    truth_p.push_back(truth[i]);
  }
  MetricsReport b = make_report(scored_p, truth_p, opt);
  CHECK(a.auroc == b.auroc);
  CHECK(a.fpr95 == b.fpr95);
  CHECK(a.acc == b.acc);
}
