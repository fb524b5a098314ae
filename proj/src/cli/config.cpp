#include "rsb/cli.hpp"

#include "rsb/common.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rsb::cli {

std::filesystem::path output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("RSB_OUT_DIR"); env && *env) return env;
  return "rsb_out";
}

std::string digest_config(const std::string& resolved_config) {
  std::istringstream in(resolved_config);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.rfind("out=", 0) == 0 || line.rfind("config=", 0) == 0 || line.rfind("threads=", 0) == 0) continue;
    kept += line;
    kept += '\n';
  }
  return digest_hex(kept);
}

nlohmann::json write_artifact(const std::filesystem::path& dir, const std::string& command,
                              const std::string& resolved_config, std::optional<std::uint64_t> seed,
                              nlohmann::json result) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["version"] = std::string(version_string());
  doc["config_digest"] = digest_config(resolved_config);
  doc["config"] = resolved_config;
  doc["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  doc["result"] = std::move(result);
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / (command + ".json"));
  if (!f) throw std::runtime_error("cannot write " + (dir / (command + ".json")).string());
  f << doc.dump(2) << '\n';
  return doc;
}

}  // namespace rsb::cli
