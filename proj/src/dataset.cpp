#include "zsosr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "zsosr/matrix_io.hpp"
#include "zsosr/rng.hpp"

namespace zsosr::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_ids(const std::vector<std::uint32_t>& ids, std::size_t num_classes,
               const std::string& field) {
  std::set<std::uint32_t> seen;
  for (std::uint32_t id : ids) {
    if (id >= num_classes) {
      throw std::runtime_error("split field '" + field + "': class id " +
                               std::to_string(id) + " out of range for " +
                               std::to_string(num_classes) + " classes");
    }
    if (!seen.insert(id).second) {
      throw std::runtime_error("split field '" + field + "': duplicate class id " +
                               std::to_string(id));
    }
  }
}

void check_disjoint(const std::vector<std::uint32_t>& a,
                    const std::vector<std::uint32_t>& b, const std::string& fa,
                    const std::string& fb) {
  std::set<std::uint32_t> sa(a.begin(), a.end());
  for (std::uint32_t id : b) {
    if (sa.count(id)) {
      throw std::runtime_error("split fields '" + fa + "' and '" + fb +
                               "' overlap on class id " + std::to_string(id));
    }
  }
}

std::vector<std::uint32_t> ids_from_json(const json& arr, bool one_based,
                                         const std::string& field) {
  std::vector<std::uint32_t> ids;
  for (const auto& v : arr) {
    const std::int64_t raw = v.get<std::int64_t>();
    const std::int64_t adjusted = one_based ? raw - 1 : raw;
    if (adjusted < 0) {
      throw std::runtime_error("split field '" + field + "': id " +
                               std::to_string(raw) + " underflows 0-based indexing");
    }
    ids.push_back(static_cast<std::uint32_t>(adjusted));
  }
  return ids;
}

std::vector<std::uint32_t> rows_with_labels(const DatasetBundle& bundle,
                                            const std::vector<std::uint32_t>& ids) {
  std::set<std::uint32_t> wanted(ids.begin(), ids.end());
  std::vector<std::uint32_t> rows;
  for (std::size_t i = 0; i < bundle.labels.size(); ++i) {
    if (wanted.count(bundle.labels[i])) rows.push_back(static_cast<std::uint32_t>(i));
  }
  return rows;
}

}  // namespace

void SplitSpec::validate(std::size_t num_classes) const {
  check_ids(seen, num_classes, "seen");
  check_ids(unseen, num_classes, "unseen");
  check_ids(unknown, num_classes, "unknown");
  check_disjoint(seen, unseen, "seen", "unseen");
  check_disjoint(seen, unknown, "seen", "unknown");
  check_disjoint(unseen, unknown, "unseen", "unknown");
}

void DatasetBundle::validate() const {
  if (features.cols() == 0 || attributes.cols() == 0) {
    throw std::runtime_error("bundle: feature and attribute dims must be positive");
  }
  if (labels.size() != features.rows()) {
    throw std::runtime_error("bundle: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(features.rows()) +
                             " feature rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes()) {
      throw std::runtime_error("bundle: label " + std::to_string(labels[i]) +
                               " at row " + std::to_string(i) + " out of range for " +
                               std::to_string(num_classes()) + " attribute rows");
    }
  }
  if (!class_names.empty() && class_names.size() != num_classes()) {
    throw std::runtime_error("bundle: class_names size " +
                             std::to_string(class_names.size()) + " vs " +
                             std::to_string(num_classes()) + " classes");
  }
  split.validate(num_classes());
}

namespace {

void apply_transforms(DatasetBundle& b) {
  if (b.transforms.minmax_scale && b.features.rows() > 0) {
    for (std::size_t j = 0; j < b.features.cols(); ++j) {
      float lo = b.features.at(0, j), hi = lo;
      for (std::size_t i = 1; i < b.features.rows(); ++i) {
        lo = std::min(lo, b.features.at(i, j));
        hi = std::max(hi, b.features.at(i, j));
      }
      const float span = hi - lo;
      if (span <= 0.0f) continue;
      for (std::size_t i = 0; i < b.features.rows(); ++i) {
        b.features.at(i, j) = (b.features.at(i, j) - lo) / span;
      }
    }
  }
  if (b.transforms.l2_normalize) {
    for (std::size_t i = 0; i < b.features.rows(); ++i) {
      auto row = b.features.row(i);
      double norm = 0.0;
      for (float v : row) norm += static_cast<double>(v) * v;
      norm = std::sqrt(norm);
      if (norm <= 0.0) continue;
      for (float& v : row) v = static_cast<float>(v / norm);
    }
  }
}

}  // namespace

DatasetBundle load_bundle(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("manifest: cannot open " + manifest_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest: parse error in " + manifest_path + ": " +
                             e.what());
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& rel) { return (base / rel).string(); };

  for (const char* field : {"features", "labels", "attributes", "splits"}) {
    if (!doc.contains(field)) {
      throw std::runtime_error("manifest: missing field '" + std::string(field) + "'");
    }
  }

  DatasetBundle b;
  b.features = read_matrix(resolve(doc["features"].get<std::string>()));
  b.labels = read_indices(resolve(doc["labels"].get<std::string>()));
  b.attributes = read_matrix(resolve(doc["attributes"].get<std::string>()));

  if (doc.contains("class_names")) {
    const auto& cn = doc["class_names"];
    if (cn.is_string()) {
      std::ifstream names(resolve(cn.get<std::string>()));
      if (!names) {
        throw std::runtime_error("manifest: cannot open class_names file " +
                                 cn.get<std::string>());
      }
      std::string line;
      while (std::getline(names, line)) {
        if (!line.empty()) b.class_names.push_back(line);
      }
    } else {
      b.class_names = cn.get<std::vector<std::string>>();
    }
  }

  const json& sp = doc["splits"];
  const bool one_based = sp.value("one_based", false);
  b.split.seen = ids_from_json(sp.at("seen"), one_based, "seen");
  b.split.unseen = ids_from_json(sp.at("unseen"), one_based, "unseen");
  b.split.unknown = ids_from_json(sp.at("unknown"), one_based, "unknown");

  if (doc.contains("transforms")) {
    b.transforms.l2_normalize = doc["transforms"].value("l2_normalize", false);
    b.transforms.minmax_scale = doc["transforms"].value("minmax_scale", false);
  }

  b.validate();
  apply_transforms(b);
  return b;
}

SplitSpec load_canonical_split(const std::string& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("split file: cannot open " + path);
  json doc;
  in >> doc;
  const bool one_based = doc.value("one_based", false);
  SplitSpec s;
  s.unseen = ids_from_json(doc.at("unseen"), one_based, "unseen");
  s.unknown = ids_from_json(doc.at("unknown"), one_based, "unknown");
  std::set<std::uint32_t> zsl_unseen(s.unseen.begin(), s.unseen.end());
  zsl_unseen.insert(s.unknown.begin(), s.unknown.end());
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    if (!zsl_unseen.count(c)) s.seen.push_back(c);
  }
  s.validate(num_classes);
  return s;
}

std::string split_mode_name(SplitMode m) {
  switch (m) {
    case SplitMode::ZsOsr: return "zs-osr";
    case SplitMode::Generalized: return "generalized";
    case SplitMode::Openness: return "openness";
    case SplitMode::Ood: return "ood";
  }
  throw std::logic_error("split_mode_name: bad enum");
}

SplitMode split_mode_from_name(const std::string& name) {
  if (name == "zs-osr") return SplitMode::ZsOsr;
  if (name == "generalized") return SplitMode::Generalized;
  if (name == "openness") return SplitMode::Openness;
  if (name == "ood") return SplitMode::Ood;
  throw std::invalid_argument("unknown split mode: " + name);
}

SplitView make_split(const DatasetBundle& bundle, const SplitRequest& request,
                     std::uint64_t seed, const DatasetBundle* ood_source) {
  SplitView v;
  v.mode = request.mode;
  v.seen_ids = bundle.split.seen;

  switch (request.mode) {
    case SplitMode::ZsOsr: {
      v.unseen_ids = bundle.split.unseen;
      v.unknown_ids = bundle.split.unknown;
      v.train_rows = rows_with_labels(bundle, v.seen_ids);
      v.test_known_rows = rows_with_labels(bundle, v.unseen_ids);
      v.test_unknown_rows = rows_with_labels(bundle, v.unknown_ids);
      break;
    }
    case SplitMode::Generalized: {
      v.unseen_ids = bundle.split.unseen;
      v.unknown_ids = bundle.split.unknown;
      // Per-class train/test assignment for the seen classes under the seed.
      std::map<std::uint32_t, std::vector<std::uint32_t>> by_class;
      for (std::uint32_t row : rows_with_labels(bundle, v.seen_ids)) {
        by_class[bundle.labels[row]].push_back(row);
      }
      for (auto& [cls, rows] : by_class) {
        Rng rng(derive_seed(seed, "generalized-split", cls));
        rng.shuffle(rows);
        const std::size_t n_train = static_cast<std::size_t>(
            std::ceil(request.seen_train_fraction * static_cast<double>(rows.size())));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          (i < n_train ? v.train_rows : v.test_known_rows).push_back(rows[i]);
        }
      }
      std::sort(v.train_rows.begin(), v.train_rows.end());
      const auto unseen_rows = rows_with_labels(bundle, v.unseen_ids);
      v.test_known_rows.insert(v.test_known_rows.end(), unseen_rows.begin(),
                               unseen_rows.end());
      std::sort(v.test_known_rows.begin(), v.test_known_rows.end());
      v.test_unknown_rows = rows_with_labels(bundle, v.unknown_ids);
      break;
    }
    case SplitMode::Openness: {
      // Repartition the ZSL-unseen pool (unseen + unknown of the canonical
      // split) into requested unseen/unknown counts.
      std::vector<std::uint32_t> pool = bundle.split.unseen;
      pool.insert(pool.end(), bundle.split.unknown.begin(),
                  bundle.split.unknown.end());
      if (request.openness_unseen == 0 ||
          request.openness_unseen + request.openness_unknown > pool.size()) {
        throw std::invalid_argument(
            "openness split: requested " + std::to_string(request.openness_unseen) +
            "+" + std::to_string(request.openness_unknown) + " classes from a pool of " +
            std::to_string(pool.size()));
      }
      Rng rng(derive_seed(seed, "openness-split"));
      rng.shuffle(pool);
      v.unseen_ids.assign(pool.begin(), pool.begin() + request.openness_unseen);
      v.unknown_ids.assign(pool.begin() + request.openness_unseen,
                           pool.begin() + request.openness_unseen +
                               request.openness_unknown);
      std::sort(v.unseen_ids.begin(), v.unseen_ids.end());
      std::sort(v.unknown_ids.begin(), v.unknown_ids.end());
      v.train_rows = rows_with_labels(bundle, v.seen_ids);
      v.test_known_rows = rows_with_labels(bundle, v.unseen_ids);
      v.test_unknown_rows = rows_with_labels(bundle, v.unknown_ids);
      break;
    }
    case SplitMode::Ood: {
      if (ood_source == nullptr) {
        throw std::invalid_argument("ood split: no unknown-source bundle supplied");
      }
      v.unseen_ids = bundle.split.unseen;
      v.train_rows = rows_with_labels(bundle, v.seen_ids);
      v.test_known_rows = rows_with_labels(bundle, v.unseen_ids);
      std::vector<std::uint32_t> pool(ood_source->num_classes());
      for (std::size_t c = 0; c < pool.size(); ++c) {
        pool[c] = static_cast<std::uint32_t>(c);
      }
      if (request.ood_unknown_classes > pool.size()) {
        throw std::invalid_argument("ood split: requested " +
                                    std::to_string(request.ood_unknown_classes) +
                                    " classes from a source with " +
                                    std::to_string(pool.size()));
      }
      Rng rng(derive_seed(seed, "ood-split"));
      rng.shuffle(pool);
      v.unknown_ids.assign(pool.begin(), pool.begin() + request.ood_unknown_classes);
      std::sort(v.unknown_ids.begin(), v.unknown_ids.end());
      v.test_unknown_rows = rows_with_labels(*ood_source, v.unknown_ids);
      v.unknown_from_other = true;
      break;
    }
  }
  return v;
}

TrainingView training_view(const DatasetBundle& bundle, const SplitView& view) {
  TrainingView t;
  t.seen_ids = view.seen_ids;
  t.unseen_ids = view.unseen_ids;
  t.seen_features = nd::gather_rows(bundle.features, view.train_rows);
  t.seen_labels.reserve(view.train_rows.size());
  for (std::uint32_t row : view.train_rows) t.seen_labels.push_back(bundle.labels[row]);
  t.seen_attributes = nd::gather_rows(bundle.attributes, view.seen_ids);
  t.unseen_attributes = nd::gather_rows(bundle.attributes, view.unseen_ids);
  return t;
}

TestPool test_pool(const DatasetBundle& bundle, const SplitView& view,
                   const DatasetBundle* ood_source) {
  TestPool p;
  nd::Matrix known = nd::gather_rows(bundle.features, view.test_known_rows);
  const DatasetBundle& unknown_bundle =
      view.unknown_from_other
          ? (ood_source ? *ood_source
                        : throw std::invalid_argument(
                              "test_pool: split takes unknowns from another bundle "
                              "but none was supplied"))
          : bundle;
  nd::Matrix unknown = nd::gather_rows(unknown_bundle.features, view.test_unknown_rows);
  if (unknown.cols() != known.cols() && unknown.rows() > 0 && known.rows() > 0) {
    throw std::runtime_error("test_pool: feature dims differ between bundles (" +
                             std::to_string(known.cols()) + " vs " +
                             std::to_string(unknown.cols()) + ")");
  }
  p.features = nd::vconcat(known, unknown);
  p.truth.reserve(view.test_known_rows.size() + view.test_unknown_rows.size());
  for (std::uint32_t row : view.test_known_rows) p.truth.push_back(bundle.labels[row]);
  for (std::size_t i = 0; i < view.test_unknown_rows.size(); ++i) {
    p.truth.push_back(kUnknownLabel);
  }
  return p;
}

}  // namespace zsosr::data
