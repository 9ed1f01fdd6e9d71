#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zsosr/ase.hpp"
#include "zsosr/metrics.hpp"

namespace zsosr::eval {

/// All metrics of one evaluation run plus the score distributions.
struct MetricsReport {
  double acc = 0.0;
  double auroc = 0.0;
  double fpr95 = 0.0;
  double openness = 0.0;
  std::size_t n_unseen_samples = 0;
  std::size_t n_unknown_samples = 0;
  std::vector<double> hist_edges;         // bins+1 edges over all scores
  std::vector<std::size_t> hist_unseen;   // counts per bin
  std::vector<std::size_t> hist_unknown;  // counts per bin
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string method;
};

struct ReportOptions {
  std::size_t histogram_bins = 30;
  std::size_t n_unseen_classes = 0;   // for the openness field
  std::size_t n_unknown_classes = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string method;
  bool unknown_positive_fpr = true;  // fpr95 positive-class convention
};

/// Computes Acc / AUROC / FPR95 / openness and the per-group score
/// histograms from scored predictions against the truth labels
/// (kUnknownLabel marks unknown rows). Both groups must be present.
MetricsReport make_report(const std::vector<ase::ScoredPrediction>& scored,
                          const std::vector<std::uint32_t>& truth,
                          const ReportOptions& options);

/// `sample_id,score,group,predicted_class` rows, one per sample.
void write_score_csv(const std::string& path,
                     const std::vector<ase::ScoredPrediction>& scored,
                     const std::vector<std::uint32_t>& truth);

void write_report_json(const std::string& path, const MetricsReport& report);
MetricsReport read_report_json(const std::string& path);

/// Histogram JSON: {"edges": [...], "counts": {"unseen": [...], "unknown": [...]}}.
void write_histogram_json(const std::string& path, const MetricsReport& report);

struct AggregateStats {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Mean and (population) standard deviation per metric across runs.
struct AggregateReport {
  AggregateStats acc, auroc, fpr95;
  std::size_t n_runs = 0;
  std::string method;
};

AggregateReport aggregate_reports(const std::vector<MetricsReport>& runs);
void write_aggregate_json(const std::string& path, const AggregateReport& agg);

}  // namespace zsosr::eval
