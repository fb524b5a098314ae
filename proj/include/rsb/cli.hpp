#pragma once

#include <json.hpp>

#include <filesystem>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rsb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitCheckFailed = 2;

/// Runs `rsb <command> [options]`. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// --out if given, else $RSB_OUT_DIR, else ./rsb_out.
std::filesystem::path output_dir(const std::string& flag_value);

/// Wraps a result with command, version, seed and config digest, writes
/// <dir>/<command>.json and returns the document.
nlohmann::json write_artifact(const std::filesystem::path& dir, const std::string& command,
                              const std::string& resolved_config, std::optional<std::uint64_t> seed,
                              nlohmann::json result);

/// Config text without the output-location line, so the digest depends
/// only on what was computed.
std::string digest_config(const std::string& resolved_config);

}  // namespace rsb::cli
