#include "zsosr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

namespace zsosr::eval {

double auroc(std::span<const double> scores_known,
             std::span<const double> scores_unknown) {
  if (scores_known.empty() || scores_unknown.empty()) {
    throw std::invalid_argument("auroc: both score lists must be non-empty");
  }
  // Midrank formulation: AUC = (R_unknown - n_u(n_u+1)/2) / (n_u * n_k),
  // where R_unknown is the rank sum of unknown scores in the pooled order.
  struct Entry {
    double score;
    bool unknown;
  };
  std::vector<Entry> pooled;
  pooled.reserve(scores_known.size() + scores_unknown.size());
  for (double s : scores_known) pooled.push_back({s, false});
  for (double s : scores_unknown) pooled.push_back({s, true});
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  const double n_u = static_cast<double>(scores_unknown.size());
  const double n_k = static_cast<double>(scores_known.size());
  double rank_sum_unknown = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].score == pooled[i].score) ++j;
    // Ranks i+1..j share the midrank.
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].unknown) rank_sum_unknown += midrank;
    }
    i = j;
  }
  return (rank_sum_unknown - n_u * (n_u + 1.0) / 2.0) / (n_u * n_k);
}

double fpr_at_tpr(std::span<const double> scores_known,
                  std::span<const double> scores_unknown, double tpr_target,
                  bool unknown_positive) {
  if (scores_known.empty() || scores_unknown.empty()) {
    throw std::invalid_argument("fpr_at_tpr: both score lists must be non-empty");
  }
  if (tpr_target <= 0.0 || tpr_target > 1.0) {
    throw std::invalid_argument("fpr_at_tpr: tpr_target must lie in (0, 1]");
  }
  if (unknown_positive) {
    // Threshold = the k-th largest unknown score with k = ceil(target * n):
    // lowering the threshold to exactly this value first reaches the target
    // recall. Ties count as detections (>= comparison).
    std::vector<double> unknown(scores_unknown.begin(), scores_unknown.end());
    std::sort(unknown.begin(), unknown.end(), std::greater<>());
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(tpr_target * static_cast<double>(unknown.size())));
    const double threshold = unknown[k - 1];
    std::size_t fp = 0;
    for (double s : scores_known) fp += (s >= threshold);
    return static_cast<double>(fp) / static_cast<double>(scores_known.size());
  }
  // In-distribution-positive convention: detect known samples by low score.
  std::vector<double> known(scores_known.begin(), scores_known.end());
  std::sort(known.begin(), known.end());
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(tpr_target * static_cast<double>(known.size())));
  const double threshold = known[k - 1];
  std::size_t fp = 0;
  for (double s : scores_unknown) fp += (s <= threshold);
  return static_cast<double>(fp) / static_cast<double>(scores_unknown.size());
}

double closed_acc(const std::vector<std::uint32_t>& predicted,
                  const std::vector<std::uint32_t>& labels,
                  const std::vector<std::uint32_t>& class_ids) {
  if (predicted.size() != labels.size()) {
    throw std::invalid_argument("closed_acc: " + std::to_string(predicted.size()) +
                                " predictions for " + std::to_string(labels.size()) +
                                " labels");
  }
  if (labels.empty()) throw std::invalid_argument("closed_acc: empty pool");
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> per_class;  // hit, total
  for (std::uint32_t id : class_ids) per_class[id] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = per_class.find(labels[i]);
    if (it == per_class.end()) {
      throw std::invalid_argument("closed_acc: label " + std::to_string(labels[i]) +
                                  " not in the class-id list");
    }
    it->second.second += 1;
    it->second.first += (predicted[i] == labels[i]);
  }
  double acc_sum = 0.0;
  std::size_t counted = 0;
  for (const auto& [id, hit_total] : per_class) {
    if (hit_total.second == 0) {
      std::cerr << "closed_acc: class " << id << " has no samples, excluded\n";
      continue;
    }
    acc_sum += static_cast<double>(hit_total.first) / hit_total.second;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("closed_acc: no class has samples");
  return acc_sum / static_cast<double>(counted);
}

double openness(std::size_t n_unseen_classes, std::size_t n_unknown_classes) {
  if (n_unseen_classes == 0) {
    throw std::invalid_argument("openness: undefined without unseen classes");
  }
  const double u = static_cast<double>(n_unseen_classes);
  const double k = static_cast<double>(n_unknown_classes);
  return 1.0 - std::sqrt(u / (u + k));
}

}  // namespace zsosr::eval
