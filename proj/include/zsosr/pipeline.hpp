#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsosr/ase.hpp"
#include "zsosr/baselines.hpp"
#include "zsosr/classifier.hpp"
#include "zsosr/dataset.hpp"
#include "zsosr/generator.hpp"
#include "zsosr/report.hpp"
#include "zsosr/synthetic.hpp"
#include "zsosr/variants.hpp"

namespace zsosr::cli {

/// The five post-hoc / training-time scorers run by default suites.
std::vector<baselines::BaselineSpec> default_baseline_specs();

/// Full experiment configuration: dataset reference, mode, per-stage
/// settings and the seed protocol. Loaded from JSON; command-line flags
/// override file values.
struct RunConfig {
  // Dataset: a manifest path, or "synthetic" for the generated fixture.
  std::string dataset = "synthetic";
  data::SyntheticWorldConfig synthetic;
  std::uint64_t synthetic_seed = 7;

  std::string mode = "zs-osr";  // zs-osr | generalized | openness | ood
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string outdir = "runs/default";

  gen::GeneratorConfig generator;
  std::size_t synth_per_class = 300;
  gen::ClassifierConfig closed;
  ase::AseConfig ase_cfg;
  std::size_t ase_per_embedding = 20;
  gen::ClassifierConfig open_base;
  double open_unknown_weight = 1.0;
  std::vector<baselines::BaselineSpec> baseline_specs = default_baseline_specs();
  ase::VariantConfig variant_cfg;
  std::size_t histogram_bins = 30;

  // openness mode
  std::size_t openness_unseen = 10;
  std::vector<std::size_t> openness_unknown_list = {10, 20, 30, 40};
  // ood mode
  std::string ood_dataset;
  std::size_t ood_unknown_classes = 25;
  double seen_train_fraction = 0.8;

  std::size_t threads = 1;

  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
};

/// Executes pipeline stages under one configuration. Stage artifacts live
/// in <outdir>/<stage>/seed_<seed>/ and chain by config hash: every stage
/// records its own hash and validates its prerequisite's.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  const RunConfig& config() const { return config_; }
  const data::DatasetBundle& bundle() const { return bundle_; }

  // Stage hashes (chained).
  std::string split_hash(std::size_t openness_unknown = 0) const;
  std::string generator_hash() const;
  std::string synth_hash() const;
  std::string closed_hash() const;
  std::string ase_hash() const;
  std::string open_hash() const;
  std::string score_hash() const;
  std::string baseline_hash(const baselines::BaselineSpec& spec) const;

  std::string stage_dir(const std::string& stage, std::uint64_t seed) const;

  // Stages; each writes its checkpoint directory and returns it.
  std::string run_split(std::uint64_t seed);
  std::string run_train_gen(std::uint64_t seed);
  std::string run_synth_data(std::uint64_t seed);
  std::string run_train_closed(std::uint64_t seed);
  std::string run_learn_ase(std::uint64_t seed);
  std::string run_train_open(std::uint64_t seed);
  std::string run_score(std::uint64_t seed);
  std::string run_baseline(const baselines::BaselineSpec& spec, std::uint64_t seed);
  /// Evaluates a method's scores ("ase" or a baseline name) into a report.
  eval::MetricsReport run_eval(const std::string& method, std::uint64_t seed);

  /// Unknown-source ablation: ASE replaced by one variant strategy.
  eval::MetricsReport run_variant(ase::UnknownStrategy strategy, std::uint64_t seed);

  /// The multi-seed protocol: ASE plus every configured baseline on every
  /// seed, aggregated per method. Returns (method -> aggregate).
  std::vector<eval::AggregateReport> run_suite();

  /// One suite per openness configuration.
  struct OpennessPoint {
    double openness = 0.0;
    std::size_t k_unknown = 0;
    std::vector<eval::AggregateReport> methods;
  };
  std::vector<OpennessPoint> run_openness_sweep();

  // Loaded artifacts for downstream consumers (tests, acceptance).
  data::SplitView load_split(std::uint64_t seed);
  gen::GeneratorModel load_generator(std::uint64_t seed);
  gen::SyntheticDataset load_synth(std::uint64_t seed);
  gen::ClosedSetClassifier load_closed(std::uint64_t seed);
  ase::AdversarialEmbeddingSet load_embeddings(std::uint64_t seed);
  ase::OpenSetClassifier load_open(std::uint64_t seed);

 private:
  RunConfig config_;
  data::DatasetBundle bundle_;
  std::optional<data::DatasetBundle> ood_bundle_;
  std::size_t current_openness_unknown_ = 0;  // nonzero during sweeps

  data::SplitRequest split_request() const;
  nlohmann::json dataset_slice() const;
};

/// Writes a synthetic-world bundle (manifest + matrix files) to a directory
/// and returns the manifest path.
std::string write_world_bundle(const data::SyntheticWorld& world, const std::string& dir);

}  // namespace zsosr::cli
