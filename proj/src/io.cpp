#include "nglab/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nglab {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return (env && *env) ? std::filesystem::path(env) : std::filesystem::path("nglab-out");
}

namespace {
void put(std::string& out, double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}
}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  if (traj.loss.size() != traj.size()) throw ConfigError("trajectory_csv: trajectory not annotated");
  const bool arc = !traj.arclength.empty();
  const int m = traj.points.empty() ? 0 : static_cast<int>(traj.points.front().size());
  std::string out = "t";
  for (int j = 1; j <= m; ++j) out += ",w_" + std::to_string(j);
  out += ",loss,grad_norm,dist_gamma";
  if (arc) out += ",arclength";
  out += '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    put(out, traj.times[i]);
    for (int j = 0; j < m; ++j) {
      out += ',';
      put(out, traj.points[i](j));
    }
    for (double v : {traj.loss[i], traj.grad_norm[i], traj.dist_gamma[i]}) {
      out += ',';
      put(out, v);
    }
    if (arc) {
      out += ',';
      put(out, traj.arclength[i]);
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Json load_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const Json& config) { return hex64(fnv1a64(config.dump())); }

Json make_manifest(const std::string& command, const Json& config, std::uint64_t seed,
                   const std::vector<std::pair<std::string, std::string>>& outputs) {
  Json files = Json::array();
  for (const auto& [name, content] : outputs)
    files.push_back({{"file", name}, {"hash", hex64(fnv1a64(content))}});
  return {{"command", command},
          {"config", config},
          {"seed", seed},
          {"content_hash", config_hash(config)},
          {"outputs", files}};
}

}  // namespace nglab
