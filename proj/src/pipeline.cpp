#include "zsosr/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "zsosr/checkpoint.hpp"
#include "zsosr/matrix_io.hpp"
#include "zsosr/rng.hpp"

namespace zsosr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

json generator_to_json(const gen::GeneratorConfig& g) {
  return json{{"mode", gen::generator_mode_name(g.mode)},
              {"hidden", g.hidden},
              {"noise_dim", g.noise_dim},
              {"steps", g.steps},
              {"critic_steps", g.critic_steps},
              {"clip", g.clip},
              {"batch", g.batch},
              {"step_size", g.step_size},
              {"kl_weight", g.kl_weight}};
}

gen::GeneratorConfig generator_from_json(const json& j) {
  gen::GeneratorConfig g;
  g.mode = gen::generator_mode_from_name(j.value("mode", "cvae"));
  g.hidden = j.value("hidden", g.hidden);
  g.noise_dim = j.value("noise_dim", g.noise_dim);
  g.steps = j.value("steps", g.steps);
  g.critic_steps = j.value("critic_steps", g.critic_steps);
  g.clip = j.value("clip", g.clip);
  g.batch = j.value("batch", g.batch);
  g.step_size = j.value("step_size", g.step_size);
  g.kl_weight = j.value("kl_weight", g.kl_weight);
  return g;
}

json classifier_to_json(const gen::ClassifierConfig& c) {
  return json{{"epochs", c.epochs}, {"batch", c.batch}, {"step_size", c.step_size}};
}

gen::ClassifierConfig classifier_from_json(const json& j) {
  gen::ClassifierConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.step_size = j.value("step_size", c.step_size);
  return c;
}

json ase_to_json(const ase::AseConfig& a) {
  return json{{"beta", a.beta},
              {"temperature", a.temperature},
              {"embeddings_per_unseen", a.embeddings_per_unseen},
              {"steps", a.steps},
              {"step_size", a.step_size},
              {"init_noise_scale", a.init_noise_scale},
              {"noise_samples", a.noise_samples},
              {"anchor_set", ase::anchor_set_name(a.anchor_set)},
              {"box_projection", a.box_projection}};
}

ase::AseConfig ase_from_json(const json& j) {
  ase::AseConfig a;
  a.beta = j.value("beta", a.beta);
  a.temperature = j.value("temperature", a.temperature);
  a.embeddings_per_unseen = j.value("embeddings_per_unseen", a.embeddings_per_unseen);
  a.steps = j.value("steps", a.steps);
  a.step_size = j.value("step_size", a.step_size);
  a.init_noise_scale = j.value("init_noise_scale", a.init_noise_scale);
  a.noise_samples = j.value("noise_samples", a.noise_samples);
  a.anchor_set = ase::anchor_set_from_name(j.value("anchor_set", "unseen-only"));
  a.box_projection = j.value("box_projection", a.box_projection);
  return a;
}

json baseline_to_json(const baselines::BaselineSpec& b) {
  return json{{"kind", baselines::baseline_name(b.kind)},
              {"temperature", b.temperature},
              {"odin_eps", b.odin_eps},
              {"logitnorm_tau", b.logitnorm_tau}};
}

baselines::BaselineSpec baseline_from_json(const json& j) {
  baselines::BaselineSpec b;
  b.kind = baselines::baseline_from_name(j.at("kind").get<std::string>());
  b.temperature = j.value("temperature",
                          b.kind == baselines::BaselineKind::Odin ? 1000.0 : 1.0);
  b.odin_eps = j.value("odin_eps", b.odin_eps);
  b.logitnorm_tau = j.value("logitnorm_tau", b.logitnorm_tau);
  return b;
}

json synthetic_to_json(const data::SyntheticWorldConfig& s) {
  return json{{"n_seen", s.n_seen},
              {"n_unseen", s.n_unseen},
              {"n_unknown", s.n_unknown},
              {"attribute_dim", s.attribute_dim},
              {"feature_dim", s.feature_dim},
              {"samples_per_class", s.samples_per_class},
              {"noise_scale", s.noise_scale}};
}

data::SyntheticWorldConfig synthetic_from_json(const json& j) {
  data::SyntheticWorldConfig s;
  s.n_seen = j.value("n_seen", s.n_seen);
  s.n_unseen = j.value("n_unseen", s.n_unseen);
  s.n_unknown = j.value("n_unknown", s.n_unknown);
  s.attribute_dim = j.value("attribute_dim", s.attribute_dim);
  s.feature_dim = j.value("feature_dim", s.feature_dim);
  s.samples_per_class = j.value("samples_per_class", s.samples_per_class);
  s.noise_scale = j.value("noise_scale", s.noise_scale);
  return s;
}

}  // namespace

std::vector<baselines::BaselineSpec> default_baseline_specs() {
  std::vector<baselines::BaselineSpec> out;
  for (auto kind : {baselines::BaselineKind::Msp, baselines::BaselineKind::MaxLogit,
                    baselines::BaselineKind::Energy, baselines::BaselineKind::Odin,
                    baselines::BaselineKind::LogitNorm}) {
    baselines::BaselineSpec spec;
    spec.kind = kind;
    if (kind == baselines::BaselineKind::Odin) spec.temperature = 1000.0;
    out.push_back(spec);
  }
  return out;
}

RunConfig RunConfig::from_json(const json& doc) {
  RunConfig c;
  c.dataset = doc.value("dataset", c.dataset);
  if (doc.contains("synthetic")) c.synthetic = synthetic_from_json(doc["synthetic"]);
  c.synthetic_seed = doc.value("synthetic_seed", c.synthetic_seed);
  c.mode = doc.value("mode", c.mode);
  if (doc.contains("seeds")) c.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
  if (c.seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  c.outdir = doc.value("outdir", c.outdir);
  if (doc.contains("generator")) c.generator = generator_from_json(doc["generator"]);
  c.synth_per_class = doc.value("synth_per_class", c.synth_per_class);
  if (doc.contains("closed")) c.closed = classifier_from_json(doc["closed"]);
  if (doc.contains("ase")) c.ase_cfg = ase_from_json(doc["ase"]);
  c.ase_per_embedding = doc.value("ase_per_embedding", c.ase_per_embedding);
  if (doc.contains("open")) {
    c.open_base = classifier_from_json(doc["open"]);
    c.open_unknown_weight = doc["open"].value("unknown_weight", c.open_unknown_weight);
  }
  if (doc.contains("baselines")) {
    c.baseline_specs.clear();
    for (const json& b : doc["baselines"]) c.baseline_specs.push_back(baseline_from_json(b));
  } else {
    c.baseline_specs = default_baseline_specs();
  }
  c.histogram_bins = doc.value("histogram_bins", c.histogram_bins);
  if (doc.contains("openness")) {
    c.openness_unseen = doc["openness"].value("k_unseen", c.openness_unseen);
    if (doc["openness"].contains("k_unknown")) {
      c.openness_unknown_list =
          doc["openness"]["k_unknown"].get<std::vector<std::size_t>>();
    }
  }
  if (doc.contains("ood")) {
    c.ood_dataset = doc["ood"].value("dataset", c.ood_dataset);
    c.ood_unknown_classes = doc["ood"].value("unknown_classes", c.ood_unknown_classes);
  }
  c.seen_train_fraction = doc.value("seen_train_fraction", c.seen_train_fraction);
  c.threads = doc.value("threads", c.threads);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  RunConfig c = from_json(doc);
  // Environment overrides: output directory and thread count only.
  if (const char* env = std::getenv("ZSOSR_OUTDIR")) c.outdir = env;
  if (const char* env = std::getenv("ZSOSR_THREADS")) {
    c.threads = static_cast<std::size_t>(std::stoul(env));
  }
  return c;
}

json RunConfig::to_json() const {
  json baselines_json = json::array();
  for (const auto& b : baseline_specs) baselines_json.push_back(baseline_to_json(b));
  return json{{"dataset", dataset},
              {"synthetic", synthetic_to_json(synthetic)},
              {"synthetic_seed", synthetic_seed},
              {"mode", mode},
              {"seeds", seeds},
              {"outdir", outdir},
              {"generator", generator_to_json(generator)},
              {"synth_per_class", synth_per_class},
              {"closed", classifier_to_json(closed)},
              {"ase", ase_to_json(ase_cfg)},
              {"ase_per_embedding", ase_per_embedding},
              {"open", [this] {
                 json j = classifier_to_json(open_base);
                 j["unknown_weight"] = open_unknown_weight;
                 return j;
               }()},
              {"baselines", baselines_json},
              {"histogram_bins", histogram_bins},
              {"openness", json{{"k_unseen", openness_unseen},
                                {"k_unknown", openness_unknown_list}}},
              {"ood", json{{"dataset", ood_dataset},
                           {"unknown_classes", ood_unknown_classes}}},
              {"seen_train_fraction", seen_train_fraction},
              {"threads", threads}};
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

std::string write_world_bundle(const data::SyntheticWorld& world,
                               const std::string& dir) {
  fs::create_directories(dir);
  data::write_matrix((fs::path(dir) / "features.zsmx").string(), world.bundle.features);
  data::write_indices((fs::path(dir) / "labels.zsmx").string(), world.bundle.labels);
  data::write_matrix((fs::path(dir) / "attributes.zsmx").string(),
                     world.bundle.attributes);
  json manifest{{"features", "features.zsmx"},
                {"labels", "labels.zsmx"},
                {"attributes", "attributes.zsmx"},
                {"splits", json{{"seen", world.bundle.split.seen},
                                {"unseen", world.bundle.split.unseen},
                                {"unknown", world.bundle.split.unknown}}}};
  const std::string path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(path, std::ios::trunc);
  out << manifest.dump(2) << '\n';
  return path;
}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
  if (config_.dataset == "synthetic") {
    bundle_ = data::synth_world(config_.synthetic, config_.synthetic_seed).bundle;
  } else {
    bundle_ = data::load_bundle(config_.dataset);
  }
  if (config_.mode == "ood") {
    if (config_.ood_dataset.empty()) {
      throw std::invalid_argument("config: ood mode requires ood.dataset");
    }
    ood_bundle_ = data::load_bundle(config_.ood_dataset);
  }
  data::split_mode_from_name(config_.mode);  // validate early
}

data::SplitRequest Pipeline::split_request() const {
  data::SplitRequest req;
  req.mode = data::split_mode_from_name(config_.mode);
  req.openness_unseen = config_.openness_unseen;
  req.openness_unknown = config_.openness_unknown_list.empty()
                             ? 0
                             : config_.openness_unknown_list.front();
  req.ood_unknown_classes = config_.ood_unknown_classes;
  req.seen_train_fraction = config_.seen_train_fraction;
  return req;
}

json Pipeline::dataset_slice() const {
  json j{{"dataset", config_.dataset}};
  if (config_.dataset == "synthetic") {
    j["synthetic"] = synthetic_to_json(config_.synthetic);
    j["synthetic_seed"] = config_.synthetic_seed;
  }
  return j;
}

std::string Pipeline::split_hash(std::size_t openness_unknown) const {
  json slice{{"data", dataset_slice()},
             {"mode", config_.mode},
             {"seen_train_fraction", config_.seen_train_fraction}};
  if (config_.mode == "openness") {
    slice["k_unseen"] = config_.openness_unseen;
    slice["k_unknown"] = openness_unknown ? openness_unknown
                                          : (config_.openness_unknown_list.empty()
                                                 ? 0
                                                 : config_.openness_unknown_list.front());
  }
  if (config_.mode == "ood") {
    slice["ood_dataset"] = config_.ood_dataset;
    slice["ood_unknown_classes"] = config_.ood_unknown_classes;
  }
  return chain_hash("split", slice, "");
}

std::string Pipeline::generator_hash() const {
  return chain_hash("train-gen", generator_to_json(config_.generator), split_hash());
}

std::string Pipeline::synth_hash() const {
  return chain_hash("synth-data", json{{"per_class", config_.synth_per_class}},
                    generator_hash());
}

std::string Pipeline::closed_hash() const {
  return chain_hash("train-closed", classifier_to_json(config_.closed), synth_hash());
}

std::string Pipeline::ase_hash() const {
  json slice = ase_to_json(config_.ase_cfg);
  slice["per_embedding"] = config_.ase_per_embedding;
  return chain_hash("learn-ase", slice, closed_hash());
}

std::string Pipeline::open_hash() const {
  json slice = classifier_to_json(config_.open_base);
  slice["unknown_weight"] = config_.open_unknown_weight;
  return chain_hash("train-open", slice, ase_hash());
}

std::string Pipeline::score_hash() const {
  return chain_hash("score", json::object(), open_hash());
}

std::string Pipeline::baseline_hash(const baselines::BaselineSpec& spec) const {
  return chain_hash("baseline", baseline_to_json(spec), closed_hash());
}

std::string Pipeline::stage_dir(const std::string& stage, std::uint64_t seed) const {
  return (fs::path(config_.outdir) / stage / ("seed_" + std::to_string(seed))).string();
}

// --- split ------------------------------------------------------------------

std::string Pipeline::run_split(std::uint64_t seed) {
  const data::SplitView view =
      data::make_split(bundle_, split_request(), seed,
                       ood_bundle_ ? &*ood_bundle_ : nullptr);
  const std::string dir = stage_dir("split", seed);
  fs::create_directories(dir);
  data::write_indices((fs::path(dir) / "train_rows.zsmx").string(), view.train_rows);
  data::write_indices((fs::path(dir) / "test_known_rows.zsmx").string(),
                      view.test_known_rows);
  data::write_indices((fs::path(dir) / "test_unknown_rows.zsmx").string(),
                      view.test_unknown_rows);
  json desc{{"stage", "split"},
            {"config_hash", split_hash()},
            {"parent_hash", ""},
            {"master_seed", seed},
            {"mode", config_.mode},
            {"seen_ids", view.seen_ids},
            {"unseen_ids", view.unseen_ids},
            {"unknown_ids", view.unknown_ids},
            {"unknown_from_other", view.unknown_from_other}};
  write_descriptor(dir, desc);
  return dir;
}

data::SplitView Pipeline::load_split(std::uint64_t seed) {
  const std::string dir = stage_dir("split", seed);
  json desc = read_descriptor(dir, "split");
  require_fresh(desc, split_hash(), "split");
  data::SplitView view;
  view.mode = data::split_mode_from_name(desc.at("mode").get<std::string>());
  view.seen_ids = desc.at("seen_ids").get<std::vector<std::uint32_t>>();
  view.unseen_ids = desc.at("unseen_ids").get<std::vector<std::uint32_t>>();
  view.unknown_ids = desc.at("unknown_ids").get<std::vector<std::uint32_t>>();
  view.unknown_from_other = desc.value("unknown_from_other", false);
  view.train_rows = data::read_indices((fs::path(dir) / "train_rows.zsmx").string());
  view.test_known_rows =
      data::read_indices((fs::path(dir) / "test_known_rows.zsmx").string());
  view.test_unknown_rows =
      data::read_indices((fs::path(dir) / "test_unknown_rows.zsmx").string());
  return view;
}

// --- train-gen ---------------------------------------------------------------

std::string Pipeline::run_train_gen(std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const data::TrainingView view = data::training_view(bundle_, split);
  gen::TrainedGenerator trained =
      gen::train_generator(view, config_.generator, derive_seed(seed, "train-gen"));

  const std::string dir = stage_dir("train-gen", seed);
  fs::create_directories(dir);
  json desc{{"stage", "train-gen"},
            {"config_hash", generator_hash()},
            {"parent_hash", split_hash()},
            {"master_seed", seed},
            {"mode", gen::generator_mode_name(config_.generator.mode)},
            {"attribute_dim", trained.generator.attribute_dim},
            {"noise_dim", trained.generator.noise_dim},
            {"feature_dim", trained.generator.feature_dim},
            {"net", save_mlp(dir, "generator", trained.generator.net)}};
  if (trained.critic) {
    desc["critic"] = save_mlp(dir, "critic", trained.critic->net);
  }
  nd::Matrix trace(1, trained.loss_trace.size());
  for (std::size_t i = 0; i < trained.loss_trace.size(); ++i) {
    trace.at(0, i) = static_cast<float>(trained.loss_trace[i]);
  }
  data::write_matrix((fs::path(dir) / "loss_trace.zsmx").string(), trace);
  write_descriptor(dir, desc);
  return dir;
}

gen::GeneratorModel Pipeline::load_generator(std::uint64_t seed) {
  const std::string dir = stage_dir("train-gen", seed);
  json desc = read_descriptor(dir, "train-gen");
  require_fresh(desc, generator_hash(), "train-gen");
  gen::GeneratorModel g;
  g.net = load_mlp(dir, desc.at("net"));
  g.attribute_dim = desc.at("attribute_dim").get<std::size_t>();
  g.noise_dim = desc.at("noise_dim").get<std::size_t>();
  g.feature_dim = desc.at("feature_dim").get<std::size_t>();
  return g;
}

// --- synth-data ---------------------------------------------------------------

std::string Pipeline::run_synth_data(std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const data::TrainingView view = data::training_view(bundle_, split);
  const gen::GeneratorModel generator = load_generator(seed);
  gen::SyntheticDataset synth = gen::synthesize_features(
      generator, view.unseen_attributes, view.unseen_ids, config_.synth_per_class,
      derive_seed(seed, "synth-data"));

  const std::string dir = stage_dir("synth-data", seed);
  fs::create_directories(dir);
  data::write_matrix((fs::path(dir) / "features.zsmx").string(), synth.features);
  data::write_indices((fs::path(dir) / "labels.zsmx").string(), synth.labels);
  write_descriptor(dir, json{{"stage", "synth-data"},
                             {"config_hash", synth_hash()},
                             {"parent_hash", generator_hash()},
                             {"master_seed", seed},
                             {"per_class", config_.synth_per_class}});
  return dir;
}

gen::SyntheticDataset Pipeline::load_synth(std::uint64_t seed) {
  const std::string dir = stage_dir("synth-data", seed);
  json desc = read_descriptor(dir, "synth-data");
  require_fresh(desc, synth_hash(), "synth-data");
  gen::SyntheticDataset s;
  s.features = data::read_matrix((fs::path(dir) / "features.zsmx").string());
  s.labels = data::read_indices((fs::path(dir) / "labels.zsmx").string());
  s.provenance = gen::Provenance::Unseen;
  return s;
}

// --- train-closed --------------------------------------------------------------

namespace {

/// Known-class training material: synthesized unseen features, plus the real
/// seen-class rows in generalized mode.
gen::SyntheticDataset known_training_set(const gen::SyntheticDataset& synth,
                                         const data::DatasetBundle& bundle,
                                         const data::SplitView& split) {
  if (split.mode != data::SplitMode::Generalized) return synth;
  gen::SyntheticDataset out;
  nd::Matrix seen = nd::gather_rows(bundle.features, split.train_rows);
  out.features = nd::vconcat(seen, synth.features);
  out.labels.reserve(split.train_rows.size() + synth.labels.size());
  for (std::uint32_t row : split.train_rows) out.labels.push_back(bundle.labels[row]);
  out.labels.insert(out.labels.end(), synth.labels.begin(), synth.labels.end());
  return out;
}

}  // namespace

std::string Pipeline::run_train_closed(std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const gen::SyntheticDataset synth = load_synth(seed);
  const gen::SyntheticDataset train = known_training_set(synth, bundle_, split);
  gen::ClosedTrainResult r = gen::train_closed_classifier(
      train, config_.closed, derive_seed(seed, "train-closed"));

  const std::string dir = stage_dir("train-closed", seed);
  fs::create_directories(dir);
  write_descriptor(dir, json{{"stage", "train-closed"},
                             {"config_hash", closed_hash()},
                             {"parent_hash", synth_hash()},
                             {"master_seed", seed},
                             {"class_ids", r.classifier.class_ids},
                             {"train_accuracy", r.train_accuracy},
                             {"net", save_mlp(dir, "closed", r.classifier.net)}});
  return dir;
}

gen::ClosedSetClassifier Pipeline::load_closed(std::uint64_t seed) {
  const std::string dir = stage_dir("train-closed", seed);
  json desc = read_descriptor(dir, "train-closed");
  require_fresh(desc, closed_hash(), "train-closed");
  gen::ClosedSetClassifier c;
  c.net = load_mlp(dir, desc.at("net"));
  c.class_ids = desc.at("class_ids").get<std::vector<std::uint32_t>>();
  return c;
}

// --- learn-ase ------------------------------------------------------------------

std::string Pipeline::run_learn_ase(std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const data::TrainingView view = data::training_view(bundle_, split);
  const gen::GeneratorModel generator = load_generator(seed);
  const gen::ClosedSetClassifier closed = load_closed(seed);

  ase::AseConfig cfg = config_.ase_cfg;
  // Generalized mode spreads adversarial embeddings around every known
  // class, seen and unseen alike.
  if (split.mode == data::SplitMode::Generalized) {
    cfg.anchor_set = ase::AnchorSet::SeenAndUnseen;
  }
  nd::Matrix anchors = view.unseen_attributes;
  std::vector<std::uint32_t> anchor_ids = view.unseen_ids;
  if (cfg.anchor_set == ase::AnchorSet::SeenAndUnseen) {
    anchors = nd::vconcat(view.seen_attributes, view.unseen_attributes);
    anchor_ids = view.seen_ids;
    anchor_ids.insert(anchor_ids.end(), view.unseen_ids.begin(), view.unseen_ids.end());
  }

  ase::AdversarialEmbeddingSet init =
      ase::init_embeddings(anchors, anchor_ids, cfg, derive_seed(seed, "ase-init"));
  ase::AdversarialEmbeddingSet learned = ase::learn_embeddings(
      init, generator, closed, cfg, derive_seed(seed, "ase-learn"), config_.threads);

  const std::string dir = stage_dir("learn-ase", seed);
  fs::create_directories(dir);
  data::write_matrix((fs::path(dir) / "embeddings.zsmx").string(), learned.embeddings);
  data::write_matrix((fs::path(dir) / "anchors.zsmx").string(), learned.anchors);
  json desc{{"stage", "learn-ase"},
            {"config_hash", ase_hash()},
            {"parent_hash", closed_hash()},
            {"master_seed", seed},
            {"anchor_ids", learned.anchor_ids},
            {"per_anchor", learned.per_anchor},
            {"anchor_set", ase::anchor_set_name(cfg.anchor_set)},
            {"final_adv", learned.final_adv},
            {"final_dis", learned.final_dis}};
  write_descriptor(dir, desc);
  return dir;
}

ase::AdversarialEmbeddingSet Pipeline::load_embeddings(std::uint64_t seed) {
  const std::string dir = stage_dir("learn-ase", seed);
  json desc = read_descriptor(dir, "learn-ase");
  require_fresh(desc, ase_hash(), "learn-ase");
  ase::AdversarialEmbeddingSet set;
  set.embeddings = data::read_matrix((fs::path(dir) / "embeddings.zsmx").string());
  set.anchors = data::read_matrix((fs::path(dir) / "anchors.zsmx").string());
  set.anchor_ids = desc.at("anchor_ids").get<std::vector<std::uint32_t>>();
  set.per_anchor = desc.at("per_anchor").get<std::size_t>();
  set.final_adv = desc.value("final_adv", std::vector<double>{});
  set.final_dis = desc.value("final_dis", std::vector<double>{});
  return set;
}

// --- train-open -------------------------------------------------------------------

std::string Pipeline::run_train_open(std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const gen::GeneratorModel generator = load_generator(seed);
  const gen::SyntheticDataset synth = load_synth(seed);
  const ase::AdversarialEmbeddingSet embeddings = load_embeddings(seed);

  gen::SyntheticDataset unknown = ase::generate_unknown_features(
      generator, embeddings, config_.ase_per_embedding, derive_seed(seed, "unknown-gen"));
  const gen::SyntheticDataset known = known_training_set(synth, bundle_, split);

  ase::OpenClassifierConfig cfg;
  cfg.base = config_.open_base;
  cfg.unknown_weight = config_.open_unknown_weight;
  ase::OpenTrainResult r = ase::train_open_classifier(
      known, unknown, cfg, derive_seed(seed, "train-open"));

  const std::string dir = stage_dir("train-open", seed);
  fs::create_directories(dir);
  write_descriptor(dir,
                   json{{"stage", "train-open"},
                        {"config_hash", open_hash()},
                        {"parent_hash", ase_hash()},
                        {"master_seed", seed},
                        {"class_ids", r.classifier.class_ids},
                        {"known_train_accuracy", r.known_train_accuracy},
                        {"unknown_train_recall", r.unknown_train_recall},
                        {"net", save_mlp(dir, "open", r.classifier.net)}});
  return dir;
}

ase::OpenSetClassifier Pipeline::load_open(std::uint64_t seed) {
  const std::string dir = stage_dir("train-open", seed);
  json desc = read_descriptor(dir, "train-open");
  require_fresh(desc, open_hash(), "train-open");
  ase::OpenSetClassifier c;
  c.net = load_mlp(dir, desc.at("net"));
  c.class_ids = desc.at("class_ids").get<std::vector<std::uint32_t>>();
  return c;
}

// --- score / baseline ----------------------------------------------------------------

std::string Pipeline::run_score(std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const ase::OpenSetClassifier open = load_open(seed);
  const data::TestPool pool =
      data::test_pool(bundle_, split, ood_bundle_ ? &*ood_bundle_ : nullptr);
  const std::vector<ase::ScoredPrediction> scored =
      ase::open_score_pool(open, pool.features);

  const std::string dir = stage_dir("score", seed);
  fs::create_directories(dir);
  eval::write_score_csv((fs::path(dir) / "scores.csv").string(), scored, pool.truth);
  write_descriptor(dir, json{{"stage", "score"},
                             {"config_hash", score_hash()},
                             {"parent_hash", open_hash()},
                             {"master_seed", seed},
                             {"method", "ase"},
                             {"rows", scored.size()}});
  return dir;
}

std::string Pipeline::run_baseline(const baselines::BaselineSpec& spec,
                                   std::uint64_t seed) {
  spec.validate();
  const data::SplitView split = load_split(seed);
  const data::TestPool pool =
      data::test_pool(bundle_, split, ood_bundle_ ? &*ood_bundle_ : nullptr);

  gen::ClosedSetClassifier classifier;
  if (spec.kind == baselines::BaselineKind::LogitNorm) {
    // LogitNorm is training-time: its own classifier over the same
    // synthesized features.
    const gen::SyntheticDataset synth = load_synth(seed);
    const gen::SyntheticDataset train = known_training_set(synth, bundle_, split);
    classifier = baselines::train_logitnorm_classifier(
                     train, spec.logitnorm_tau, config_.closed,
                     derive_seed(seed, "logitnorm"))
                     .classifier;
  } else {
    classifier = load_closed(seed);
  }
  const std::vector<ase::ScoredPrediction> scored =
      baselines::run_baseline(spec, classifier, pool.features);

  const std::string name = baselines::baseline_name(spec.kind);
  const std::string dir = stage_dir("baseline/" + name, seed);
  fs::create_directories(dir);
  eval::write_score_csv((fs::path(dir) / "scores.csv").string(), scored, pool.truth);
  write_descriptor(dir, json{{"stage", "baseline"},
                             {"config_hash", baseline_hash(spec)},
                             {"parent_hash", closed_hash()},
                             {"master_seed", seed},
                             {"method", name},
                             {"rows", scored.size()}});
  return dir;
}

// --- eval ------------------------------------------------------------------------

namespace {

struct ParsedScores {
  std::vector<ase::ScoredPrediction> scored;
  std::vector<bool> unknown_group;
};

ParsedScores read_score_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("eval: cannot open " + path);
  ParsedScores out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, score, group, pred;
    std::getline(ss, id, ',');
    std::getline(ss, score, ',');
    std::getline(ss, group, ',');
    std::getline(ss, pred, ',');
    ase::ScoredPrediction sp;
    sp.open_score = std::stod(score);
    sp.predicted_class = static_cast<std::uint32_t>(std::stoul(pred));
    out.scored.push_back(sp);
    out.unknown_group.push_back(group == "unknown");
  }
  return out;
}

}  // namespace

eval::MetricsReport Pipeline::run_eval(const std::string& method, std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const data::TestPool pool =
      data::test_pool(bundle_, split, ood_bundle_ ? &*ood_bundle_ : nullptr);

  std::string score_dir, expected_hash, parent_stage;
  if (method == "ase") {
    score_dir = stage_dir("score", seed);
    expected_hash = score_hash();
    parent_stage = "score";
  } else {
    baselines::BaselineSpec spec;
    bool found = false;
    for (const auto& b : config_.baseline_specs) {
      if (baselines::baseline_name(b.kind) == method) {
        spec = b;
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("eval: unknown method '" + method + "'");
    score_dir = stage_dir("baseline/" + method, seed);
    expected_hash = baseline_hash(spec);
    parent_stage = "baseline";
  }
  json desc = read_descriptor(score_dir, parent_stage);
  require_fresh(desc, expected_hash, parent_stage);

  ParsedScores parsed = read_score_csv((fs::path(score_dir) / "scores.csv").string());
  if (parsed.scored.size() != pool.truth.size()) {
    throw std::runtime_error("eval: score file has " +
                             std::to_string(parsed.scored.size()) + " rows, pool has " +
                             std::to_string(pool.truth.size()));
  }
  for (std::size_t i = 0; i < pool.truth.size(); ++i) {
    const bool is_unknown = pool.truth[i] == data::kUnknownLabel;
    if (is_unknown != parsed.unknown_group[i]) {
      throw std::runtime_error("eval: group mismatch at row " + std::to_string(i) +
                               "; stale scores?");
    }
  }

  eval::ReportOptions opt;
  opt.histogram_bins = config_.histogram_bins;
  opt.n_unseen_classes = split.unseen_ids.size();
  opt.n_unknown_classes = split.unknown_ids.size();
  opt.seed = seed;
  opt.config_hash = expected_hash;
  opt.method = method;
  eval::MetricsReport report = eval::make_report(parsed.scored, pool.truth, opt);

  const std::string dir = stage_dir("eval/" + method, seed);
  fs::create_directories(dir);
  eval::write_report_json((fs::path(dir) / "report.json").string(), report);
  eval::write_histogram_json((fs::path(dir) / "histogram.json").string(), report);
  return report;
}

// --- variants ----------------------------------------------------------------------

eval::MetricsReport Pipeline::run_variant(ase::UnknownStrategy strategy,
                                          std::uint64_t seed) {
  const data::SplitView split = load_split(seed);
  const data::TrainingView view = data::training_view(bundle_, split);
  const gen::GeneratorModel generator = load_generator(seed);
  const gen::SyntheticDataset synth = load_synth(seed);
  const gen::ClosedSetClassifier closed = load_closed(seed);

  ase::VariantInputs inputs;
  inputs.unseen_features = &synth;
  inputs.unseen_embeddings = &view.unseen_attributes;
  inputs.unseen_ids = &view.unseen_ids;
  inputs.generator = &generator;
  inputs.classifier = &closed;
  gen::SyntheticDataset unknown = ase::variant_unknowns(
      strategy, inputs, config_.variant_cfg, derive_seed(seed, "variant"));

  ase::OpenClassifierConfig cfg;
  cfg.base = config_.open_base;
  cfg.unknown_weight = config_.open_unknown_weight;
  const gen::SyntheticDataset known = known_training_set(synth, bundle_, split);
  ase::OpenTrainResult r =
      ase::train_open_classifier(known, unknown, cfg, derive_seed(seed, "train-open"));

  const data::TestPool pool =
      data::test_pool(bundle_, split, ood_bundle_ ? &*ood_bundle_ : nullptr);
  const std::vector<ase::ScoredPrediction> scored =
      ase::open_score_pool(r.classifier, pool.features);

  const std::string method = "variant-" + ase::strategy_name(strategy);
  const std::string dir = stage_dir("eval/" + method, seed);
  fs::create_directories(dir);
  eval::write_score_csv((fs::path(dir) / "scores.csv").string(), scored, pool.truth);

  eval::ReportOptions opt;
  opt.histogram_bins = config_.histogram_bins;
  opt.n_unseen_classes = split.unseen_ids.size();
  opt.n_unknown_classes = split.unknown_ids.size();
  opt.seed = seed;
  opt.config_hash = ase_hash();
  opt.method = method;
  eval::MetricsReport report = eval::make_report(scored, pool.truth, opt);
  eval::write_report_json((fs::path(dir) / "report.json").string(), report);
  eval::write_histogram_json((fs::path(dir) / "histogram.json").string(), report);
  return report;
}

// --- suite / sweep -------------------------------------------------------------------

std::vector<eval::AggregateReport> Pipeline::run_suite() {
  std::vector<std::string> methods{"ase"};
  for (const auto& spec : config_.baseline_specs) {
    methods.push_back(baselines::baseline_name(spec.kind));
  }
  std::map<std::string, std::vector<eval::MetricsReport>> per_method;

  for (std::uint64_t seed : config_.seeds) {
    run_split(seed);
    run_train_gen(seed);
    run_synth_data(seed);
    run_train_closed(seed);
    run_learn_ase(seed);
    run_train_open(seed);
    run_score(seed);
    per_method["ase"].push_back(run_eval("ase", seed));
    for (const auto& spec : config_.baseline_specs) {
      run_baseline(spec, seed);
      const std::string name = baselines::baseline_name(spec.kind);
      per_method[name].push_back(run_eval(name, seed));
    }
  }

  std::vector<eval::AggregateReport> out;
  const fs::path agg_dir = fs::path(config_.outdir) / "aggregate";
  fs::create_directories(agg_dir);
  for (const std::string& method : methods) {
    eval::AggregateReport agg = eval::aggregate_reports(per_method.at(method));
    eval::write_aggregate_json((agg_dir / (method + ".json")).string(), agg);
    out.push_back(std::move(agg));
  }
  return out;
}

std::vector<Pipeline::OpennessPoint> Pipeline::run_openness_sweep() {
  if (config_.mode != "openness") {
    throw std::invalid_argument("openness-sweep requires mode 'openness'");
  }
  std::vector<OpennessPoint> points;
  for (std::size_t k_unknown : config_.openness_unknown_list) {
    RunConfig point_cfg = config_;
    point_cfg.openness_unknown_list = {k_unknown};
    point_cfg.outdir = (fs::path(config_.outdir) /
                        ("openness_" + std::to_string(k_unknown)))
                           .string();
    Pipeline p(point_cfg);
    OpennessPoint point;
    point.k_unknown = k_unknown;
    point.openness = eval::openness(config_.openness_unseen, k_unknown);
    point.methods = p.run_suite();
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace zsosr::cli
