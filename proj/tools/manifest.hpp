#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eleatt/config.hpp"

namespace eleatt::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// manifest.txt: one per run directory. `config.*` lines hold the fully
/// resolved configuration, so `train --manifest` can replay the run.
struct RunManifest {
  std::string command;
  KeyValueConfig config;
  std::vector<std::pair<std::string, std::string>> fields;  // seed, hashes, ...
  std::vector<std::pair<std::string, std::string>> artifacts;
  std::string started;
  std::string finished;

  std::string to_text() const;
  void write(const std::filesystem::path& dir) const;
};

std::string utc_timestamp();

/// Reads the `config.*` lines of a manifest back into a configuration.
KeyValueConfig config_from_manifest(const std::filesystem::path& path);

}  // namespace eleatt::cli
