#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "eleatt/model.hpp"
#include "eleatt/optimizer.hpp"

namespace eleatt {

inline constexpr std::uint64_t kCheckpointVersion = 1;

/// Serialized model state. Optimizer and schedule are present for resumable
/// training checkpoints; `extra` carries trainer bookkeeping as text.
struct Checkpoint {
  Network model;
  std::uint64_t seed = 0;
  std::optional<AdamState> optimizer;
  std::optional<LrSchedule> schedule;
  std::map<std::string, std::string> extra;
};

/// Text manifest (config + tensor directory), raw little-endian float64
/// payload, CRC-32 trailer. Byte layout in docs/FORMATS.md.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws IntegrityError on checksum/truncation, FormatError on version or
/// structure mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const Network& model, const std::filesystem::path& path);

}  // namespace eleatt
