#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace zsosr::eval {

/// Probability that a random unknown sample scores higher than a random
/// known one, ties counted one half (rank formulation with midranks).
double auroc(std::span<const double> scores_known, std::span<const double> scores_unknown);

/// False-positive rate at the threshold detecting `tpr_target` of the
/// positives. Default convention: positives = unknown, detection = score >=
/// threshold, threshold = smallest score still reaching the target recall.
/// The flag flips to the in-distribution-positive convention (positives =
/// known, detection = score <= threshold).
double fpr_at_tpr(std::span<const double> scores_known,
                  std::span<const double> scores_unknown, double tpr_target = 0.95,
                  bool unknown_positive = true);

/// Mean over classes of per-class top-1 accuracy. Classes without samples
/// are excluded (with a warning on stderr).
double closed_acc(const std::vector<std::uint32_t>& predicted,
                  const std::vector<std::uint32_t>& labels,
                  const std::vector<std::uint32_t>& class_ids);

/// 1 - sqrt(n_unseen / (n_unseen + n_unknown)).
double openness(std::size_t n_unseen_classes, std::size_t n_unknown_classes);

}  // namespace zsosr::eval
