#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "zsosr/matrix.hpp"

namespace zsosr::data {

/// Label value marking a sample as belonging to no known class.
inline constexpr std::uint32_t kUnknownLabel = std::numeric_limits<std::uint32_t>::max();

/// Disjoint class-id sets for one dataset. Ids are 0-based internally;
/// manifest files may declare `one_based: true` for ids printed the way the
/// benchmark tables list them.
struct SplitSpec {
  std::vector<std::uint32_t> seen;
  std::vector<std::uint32_t> unseen;
  std::vector<std::uint32_t> unknown;

  void validate(std::size_t num_classes) const;
};

struct TransformSpec {
  bool l2_normalize = false;
  bool minmax_scale = false;
};

/// Features, labels, per-class attributes and the split, loaded and
/// validated together. Read-only after load.
struct DatasetBundle {
  nd::Matrix features;               // N × d
  std::vector<std::uint32_t> labels; // N, values in [0, C)
  nd::Matrix attributes;             // C × M
  std::vector<std::string> class_names;  // C
  SplitSpec split;
  TransformSpec transforms;

  std::size_t num_samples() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::size_t num_classes() const { return attributes.rows(); }
  std::size_t attribute_dim() const { return attributes.cols(); }

  void validate() const;
};

/// Loads a JSON manifest referencing matrix files (paths relative to the
/// manifest) plus split id lists, validates the bundle and applies the
/// declared feature transforms.
DatasetBundle load_bundle(const std::string& manifest_path);

/// Reads a canonical split file ({"unseen": [...], "unknown": [...],
/// "one_based": bool}) and fills `seen` with the complement.
SplitSpec load_canonical_split(const std::string& path, std::size_t num_classes);

enum class SplitMode { ZsOsr, Generalized, Openness, Ood };

std::string split_mode_name(SplitMode m);
SplitMode split_mode_from_name(const std::string& name);

struct SplitRequest {
  SplitMode mode = SplitMode::ZsOsr;
  std::size_t openness_unseen = 0;   // openness mode: classes kept as unseen
  std::size_t openness_unknown = 0;  // openness mode: classes treated as unknown
  std::size_t ood_unknown_classes = 25;  // ood mode: classes drawn from the other bundle
  double seen_train_fraction = 0.8;  // generalized mode: per-class train share
};

/// Resolved sample-level split. Unknown rows index into the ood source
/// bundle when `unknown_from_other` is set, otherwise into the own bundle.
struct SplitView {
  SplitMode mode = SplitMode::ZsOsr;
  std::vector<std::uint32_t> seen_ids, unseen_ids, unknown_ids;
  std::vector<std::uint32_t> train_rows;         // seen-class training samples
  std::vector<std::uint32_t> test_known_rows;    // unseen (+ held-out seen) samples
  std::vector<std::uint32_t> test_unknown_rows;  // unknown-class samples
  bool unknown_from_other = false;
};

SplitView make_split(const DatasetBundle& bundle, const SplitRequest& request,
                     std::uint64_t seed, const DatasetBundle* ood_source = nullptr);

/// Everything training code is allowed to see: seen-class samples and the
/// seen/unseen attribute rows. Unknown-class attributes and features are
/// structurally absent, which is the ZS-OSR information boundary.
struct TrainingView {
  nd::Matrix seen_features;               // train rows
  std::vector<std::uint32_t> seen_labels; // raw class ids, one per row
  nd::Matrix seen_attributes;             // |seen| × M, row order = seen_ids
  nd::Matrix unseen_attributes;           // |unseen| × M, row order = unseen_ids
  std::vector<std::uint32_t> seen_ids, unseen_ids;

  std::size_t attribute_rows() const {
    return seen_attributes.rows() + unseen_attributes.rows();
  }
};

TrainingView training_view(const DatasetBundle& bundle, const SplitView& view);

/// Test samples with group truth: the class id for known rows, kUnknownLabel
/// for unknown rows.
struct TestPool {
  nd::Matrix features;
  std::vector<std::uint32_t> truth;
};

TestPool test_pool(const DatasetBundle& bundle, const SplitView& view,
                   const DatasetBundle* ood_source = nullptr);

}  // namespace zsosr::data
