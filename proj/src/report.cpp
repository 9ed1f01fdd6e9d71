#include "zsosr/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "zsosr/dataset.hpp"

namespace zsosr::eval {

using nlohmann::json;

MetricsReport make_report(const std::vector<ase::ScoredPrediction>& scored,
                          const std::vector<std::uint32_t>& truth,
                          const ReportOptions& options) {
  if (scored.size() != truth.size()) {
    throw std::invalid_argument("make_report: " + std::to_string(scored.size()) +
                                " scores for " + std::to_string(truth.size()) +
                                " truth labels");
  }
  std::vector<double> known_scores, unknown_scores;
  std::vector<std::uint32_t> known_pred, known_truth;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (truth[i] == data::kUnknownLabel) {
      unknown_scores.push_back(scored[i].open_score);
    } else {
      known_scores.push_back(scored[i].open_score);
      known_pred.push_back(scored[i].predicted_class);
      known_truth.push_back(truth[i]);
    }
  }
  if (known_scores.empty()) {
    throw std::invalid_argument("make_report: missing group 'unseen'");
  }
  if (unknown_scores.empty()) {
    throw std::invalid_argument("make_report: missing group 'unknown'");
  }

  MetricsReport r;
  r.n_unseen_samples = known_scores.size();
  r.n_unknown_samples = unknown_scores.size();
  r.auroc = auroc(known_scores, unknown_scores);
  r.fpr95 = fpr_at_tpr(known_scores, unknown_scores, 0.95, options.unknown_positive_fpr);
  {
    // Per-class accuracy over the distinct truth classes present.
    std::vector<std::uint32_t> ids = known_truth;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    r.acc = closed_acc(known_pred, known_truth, ids);
  }
  if (options.n_unseen_classes > 0) {
    r.openness = openness(options.n_unseen_classes, options.n_unknown_classes);
  }

  const std::size_t bins = std::max<std::size_t>(1, options.histogram_bins);
  double lo = known_scores[0], hi = known_scores[0];
  for (double s : known_scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (double s : unknown_scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi <= lo) hi = lo + 1.0;
  r.hist_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    r.hist_edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  }
  r.hist_unseen.assign(bins, 0);
  r.hist_unknown.assign(bins, 0);
  auto bin_of = [&](double s) {
    const std::size_t b = static_cast<std::size_t>((s - lo) / (hi - lo) *
                                                   static_cast<double>(bins));
    return std::min(b, bins - 1);
  };
  for (double s : known_scores) r.hist_unseen[bin_of(s)] += 1;
  for (double s : unknown_scores) r.hist_unknown[bin_of(s)] += 1;

  r.seed = options.seed;
  r.config_hash = options.config_hash;
  r.method = options.method;
  return r;
}

void write_score_csv(const std::string& path,
                     const std::vector<ase::ScoredPrediction>& scored,
                     const std::vector<std::uint32_t>& truth) {
  if (scored.size() != truth.size()) {
    throw std::invalid_argument("write_score_csv: size mismatch");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_score_csv: cannot write " + path);
  out << "sample_id,score,group,predicted_class\n";
  out.precision(17);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    out << i << ',' << scored[i].open_score << ','
        << (truth[i] == data::kUnknownLabel ? "unknown" : "unseen") << ','
        << scored[i].predicted_class << '\n';
  }
}

namespace {

json report_to_json(const MetricsReport& r) {
  return json{{"acc", r.acc},
              {"auroc", r.auroc},
              {"fpr95", r.fpr95},
              {"openness", r.openness},
              {"n_unseen_samples", r.n_unseen_samples},
              {"n_unknown_samples", r.n_unknown_samples},
              {"seed", r.seed},
              {"config_hash", r.config_hash},
              {"method", r.method}};
}

}  // namespace

void write_report_json(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_report_json: cannot write " + path);
  out << report_to_json(report).dump(2) << '\n';
}

MetricsReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_report_json: cannot open " + path);
  json doc;
  in >> doc;
  MetricsReport r;
  r.acc = doc.at("acc").get<double>();
  r.auroc = doc.at("auroc").get<double>();
  r.fpr95 = doc.at("fpr95").get<double>();
  r.openness = doc.value("openness", 0.0);
  r.n_unseen_samples = doc.value("n_unseen_samples", std::size_t{0});
  r.n_unknown_samples = doc.value("n_unknown_samples", std::size_t{0});
  r.seed = doc.value("seed", std::uint64_t{0});
  r.config_hash = doc.value("config_hash", std::string{});
  r.method = doc.value("method", std::string{});
  return r;
}

void write_histogram_json(const std::string& path, const MetricsReport& report) {
  json doc{{"edges", report.hist_edges},
           {"counts", json{{"unseen", report.hist_unseen},
                           {"unknown", report.hist_unknown}}}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_histogram_json: cannot write " + path);
  out << doc.dump(2) << '\n';
}

namespace {

AggregateStats stats_of(const std::vector<double>& values) {
  // Shifted accumulation: identical inputs yield exactly zero spread.
  const double base = values.front();
  double delta_sum = 0.0;
  for (double v : values) delta_sum += v - base;
  const double delta_mean = delta_sum / static_cast<double>(values.size());
  AggregateStats s;
  s.mean = base + delta_mean;
  double var = 0.0;
  for (double v : values) {
    const double d = (v - base) - delta_mean;
    var += d * d;
  }
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

}  // namespace

AggregateReport aggregate_reports(const std::vector<MetricsReport>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_reports: no runs");
  std::vector<double> acc, auc, fpr;
  for (const MetricsReport& r : runs) {
    acc.push_back(r.acc);
    auc.push_back(r.auroc);
    fpr.push_back(r.fpr95);
  }
  AggregateReport agg;
  agg.acc = stats_of(acc);
  agg.auroc = stats_of(auc);
  agg.fpr95 = stats_of(fpr);
  agg.n_runs = runs.size();
  agg.method = runs.front().method;
  return agg;
}

void write_aggregate_json(const std::string& path, const AggregateReport& agg) {
  json doc{{"method", agg.method},
           {"n_runs", agg.n_runs},
           {"acc", json{{"mean", agg.acc.mean}, {"std", agg.acc.stddev}}},
           {"auroc", json{{"mean", agg.auroc.mean}, {"std", agg.auroc.stddev}}},
           {"fpr95", json{{"mean", agg.fpr95.mean}, {"std", agg.fpr95.stddev}}}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_aggregate_json: cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace zsosr::eval
