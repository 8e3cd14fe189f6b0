#pragma once

#include "nglab/dynamics.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace nglab {

using Json = nlohmann::json;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t h);

/// Output root: $NGLAB_OUTPUT_ROOT, else "nglab-out".
std::filesystem::path output_root();
inline constexpr const char* kOutputRootEnv = "NGLAB_OUTPUT_ROOT";

/// Columns t,w_1..w_m,loss,grad_norm,dist_gamma[,arclength]; doubles are
/// written with 17 significant digits so reruns compare byte for byte.
/// The trajectory must be annotated.
std::string trajectory_csv(const Trajectory& traj);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Throws ConfigError when the file is missing or not valid JSON.
Json load_json(const std::filesystem::path& path);

/// Hash of the canonical dump of `config` (keys sorted).
std::string config_hash(const Json& config);

/// Manifest with the command, config, seed, config hash and per-output hashes.
Json make_manifest(const std::string& command, const Json& config, std::uint64_t seed,
                   const std::vector<std::pair<std::string, std::string>>& outputs);

}  // namespace nglab
