#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eleatt/rng.hpp"
#include "eleatt/tensor.hpp"

namespace eleatt {

/// A set of variable-length sequences (each D x T_i) with class labels.
struct SequenceBatch {
  std::size_t dims = 0;
  std::size_t classes = 0;
  std::vector<Tensor2> inputs;
  std::vector<std::uint32_t> labels;
  /// Indices of the class-carrying input elements, when known (synthetic data).
  std::vector<std::size_t> informative;

  std::size_t size() const noexcept { return inputs.size(); }
  bool empty() const noexcept { return inputs.empty(); }
  std::size_t length(std::size_t i) const { return inputs.at(i).cols(); }
  std::vector<std::size_t> lengths() const;
  std::size_t max_length() const;

  /// Throws ConfigError/ShapeError when labels, dims or lengths are invalid.
  void validate() const;
  SequenceBatch subset(std::span<const std::size_t> indices) const;
  /// Time-major padded view: one D x B tensor per step, zero beyond each length.
  std::vector<Tensor2> padded_steps() const;

  friend bool operator==(const SequenceBatch&, const SequenceBatch&) = default;
};

struct Dataset {
  SequenceBatch train;
  SequenceBatch val;
  SequenceBatch test;
};

/// How the non-informative elements are drawn. Both styles are independent of
/// the class and identically distributed across elements.
enum class DistractorStyle {
  white,  // noise * N(0,1), independent per frame
  decoy   // noise * (sinusoid or random walk with class-free parameters), like the informative elements
};

std::string_view to_string(DistractorStyle style);
DistractorStyle parse_distractor_style(std::string_view name);

/// Synthetic task where only `informative` of `dims` elements carry the class.
struct DistractorTaskSpec {
  std::size_t dims = 20;
  std::size_t informative = 4;
  std::size_t classes = 3;
  std::size_t min_length = 10;
  std::size_t max_length = 20;
  double noise = 8.0;         // scale of the distractor elements
  DistractorStyle style = DistractorStyle::white;
  double signal_noise = 0.3;  // per-frame jitter on informative elements
  std::size_t train_count = 300;
  std::size_t val_count = 60;
  std::size_t test_count = 300;
  std::uint64_t seed = 1;

  void validate() const;
};

Dataset gen_distractor(const DistractorTaskSpec& spec);

/// Reassigns labels with a seeded permutation of the sequences (control runs).
SequenceBatch permute_labels(const SequenceBatch& batch, std::uint64_t seed);

/// Skeleton view of a sequence: D = 3J rows ordered (x, y, z) per joint.
struct SkeletonSequence {
  Tensor2 frames;  // 3J x T

  std::size_t joints() const noexcept { return frames.rows() / 3; }
  std::size_t length() const noexcept { return frames.cols(); }
  std::array<double, 3> joint(std::size_t j, std::size_t t) const;

  static SkeletonSequence from_tensor(Tensor2 frames);
};

/// Body center used for first-frame centering.
struct CenterRule {
  std::optional<std::size_t> joint;  // nullopt = centroid of all joints
};

SkeletonSequence center_first_frame(const SkeletonSequence& seq, CenterRule rule = {});

using Rotation = std::array<std::array<double, 3>, 3>;

/// Rx(ax) * Ry(ay) * Rz(az), angles in radians.
Rotation rotation_xyz(double ax, double ay, double az);
SkeletonSequence apply_rotation(const SkeletonSequence& seq, const Rotation& r);
/// One rotation per call with each angle uniform in [-max_degrees, +max_degrees].
SkeletonSequence rotate_augment(const SkeletonSequence& seq, RngStream& stream,
                                double max_degrees = 35.0);
double determinant(const Rotation& r);

/// Dataset file: text manifest, binary payload of little-endian float32
/// frames, CRC-32 trailer. See docs/FORMATS.md.
void save_dataset(const SequenceBatch& batch, const std::filesystem::path& path);
SequenceBatch load_dataset(const std::filesystem::path& path);

void save_splits(const Dataset& data, const std::filesystem::path& dir);
Dataset load_splits(const std::filesystem::path& dir);

/// 64-bit FNV-1a over the serialized bytes of every split.
std::uint64_t dataset_hash(const Dataset& data);

}  // namespace eleatt
