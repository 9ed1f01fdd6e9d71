#include "zsosr/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "zsosr/matrix_io.hpp"
#include "zsosr/rng.hpp"

namespace zsosr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_hash(const json& value) {
  const std::string canonical = value.dump();  // nlohmann keeps keys sorted
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical);
  return out.str();
}

std::string chain_hash(const std::string& stage, const json& config_slice,
                       const std::string& parent_hash) {
  return config_hash(json{{"stage", stage},
                          {"config", config_slice},
                          {"parent", parent_hash}});
}

json save_mlp(const std::string& dir, const std::string& prefix,
              const nd::MlpModel& model) {
  json desc;
  desc["layers"] = json::array();
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const nd::Layer& l = model.layer(i);
    const std::string wname = prefix + "_w" + std::to_string(i) + ".zsmx";
    const std::string bname = prefix + "_b" + std::to_string(i) + ".zsmx";
    data::write_matrix((fs::path(dir) / wname).string(), l.weights);
    data::write_matrix((fs::path(dir) / bname).string(), l.bias);
    desc["layers"].push_back(json{{"weights", wname},
                                  {"bias", bname},
                                  {"activation", nd::activation_name(l.activation)}});
  }
  return desc;
}

nd::MlpModel load_mlp(const std::string& dir, const json& descriptor) {
  std::vector<nd::Layer> layers;
  for (const json& lj : descriptor.at("layers")) {
    nd::Layer l;
    l.weights = data::read_matrix((fs::path(dir) / lj.at("weights").get<std::string>()).string());
    l.bias = data::read_matrix((fs::path(dir) / lj.at("bias").get<std::string>()).string());
    l.activation = nd::activation_from_name(lj.at("activation").get<std::string>());
    layers.push_back(std::move(l));
  }
  if (layers.empty()) throw std::runtime_error("load_mlp: descriptor has no layers");
  return nd::MlpModel(std::move(layers));
}

void write_descriptor(const std::string& dir, const json& descriptor) {
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / "descriptor.json", std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write descriptor in " + dir);
  out << descriptor.dump(2) << '\n';
}

json read_descriptor(const std::string& dir, const std::string& expected_stage) {
  const fs::path path = fs::path(dir) / "descriptor.json";
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("missing prerequisite checkpoint: stage '" +
                             expected_stage + "' has not produced " + path.string() +
                             "; run that stage first");
  }
  json doc;
  in >> doc;
  const std::string stage = doc.value("stage", "");
  if (stage != expected_stage) {
    throw std::runtime_error("checkpoint in " + dir + " belongs to stage '" + stage +
                             "', expected '" + expected_stage + "'");
  }
  return doc;
}

void require_fresh(const json& descriptor, const std::string& expected_hash,
                   const std::string& stage) {
  const std::string actual = descriptor.value("config_hash", "");
  if (actual != expected_hash) {
    throw std::runtime_error("stale checkpoint for stage '" + stage +
                             "': descriptor hash " + actual +
                             " does not match current config hash " + expected_hash +
                             "; rerun the stage");
  }
}

}  // namespace zsosr::cli
