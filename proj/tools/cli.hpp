#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace seedlab::cli {

inline constexpr const char* kConfigFile = "run_config.json";
inline constexpr const char* kProvenanceFile = "provenance.json";

struct RunConfig {
  std::string command;
  std::map<std::string, std::filesystem::path> inputs;  // role -> file
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t rng_seed = 0;
  std::filesystem::path output_dir;
};

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& doc);

// Runs one command: writes its outputs, run_config.json and provenance.json
// into config.output_dir. Throws seedlab::Error.
void execute(const RunConfig& config);

// Full front end. args[0] is the program name. Returns the process exit code;
// errors are reported on `err` as a one-line JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace seedlab::cli
