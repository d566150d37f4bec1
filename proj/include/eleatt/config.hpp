#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "eleatt/trainer.hpp"

namespace eleatt {

/// Flat `key=value` configuration with dotted keys, e.g.
///   model.layers=3
///   model.layer.1.gated=false
///   train.lr=0.005
/// Lines starting with '#' are comments. Later assignments win.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& origin = "config");
  static KeyValueConfig load(const std::filesystem::path& path);

  /// The defaults used by `train` when no config file is given.
  static KeyValueConfig defaults();

  /// Resolves short aliases (`gated`, `lr`, `epochs`, ...) to dotted keys.
  /// Throws ConfigError on unknown keys.
  void set(std::string key, std::string value);
  void merge(const KeyValueConfig& other);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  /// Sorted `key=value` lines; parse(to_text()) round-trips.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

bool parse_bool(std::string_view text);

/// Builds the trainer configuration for a dataset with the given shape.
TrainConfig resolve_train_config(const KeyValueConfig& config, std::size_t input_dim,
                                 std::size_t num_classes);

}  // namespace eleatt
