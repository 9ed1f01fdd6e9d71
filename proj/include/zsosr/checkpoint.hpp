#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "zsosr/mlp.hpp"

namespace zsosr::cli {

/// Stable 64-bit hash of a JSON value (canonical dump), hex-encoded.
/// Stage hashes chain: hash(stage name, config slice, parent hash).
std::string config_hash(const nlohmann::json& value);
std::string chain_hash(const std::string& stage, const nlohmann::json& config_slice,
                       const std::string& parent_hash);

/// Serializes an MLP as one MatrixFile per parameter tensor plus a JSON
/// fragment describing dims, activations and tensor file names.
nlohmann::json save_mlp(const std::string& dir, const std::string& prefix,
                        const nd::MlpModel& model);
nd::MlpModel load_mlp(const std::string& dir, const nlohmann::json& descriptor);

/// Stage descriptor bookkeeping. `write_descriptor` stores the stage name,
/// hashes and seed next to the tensors; `read_descriptor` validates the
/// stage name and returns the parsed JSON.
void write_descriptor(const std::string& dir, const nlohmann::json& descriptor);
nlohmann::json read_descriptor(const std::string& dir, const std::string& expected_stage);

/// Throws a stale-checkpoint error unless the descriptor's config_hash
/// equals `expected_hash`.
void require_fresh(const nlohmann::json& descriptor, const std::string& expected_hash,
                   const std::string& stage);

}  // namespace zsosr::cli
