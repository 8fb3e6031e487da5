#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace infsamp::cli {

/// Runs one invocation. `args` excludes the program name. Returns the exit
/// status: 0 on success, 2 for usage errors, 1 for everything else.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const std::string& bytes);

/// Everything needed to re-run a command bit-identically.
struct RunManifest {
  std::vector<std::string> argv;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> artifacts;

  /// Digests are taken at write time, so call after the artifacts exist.
  void write(const std::filesystem::path& path) const;
};

struct LoadedManifest {
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> inputs;     // path, sha256
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, sha256
};

LoadedManifest read_manifest(const std::filesystem::path& path);

const char* version();

}  // namespace infsamp::cli
