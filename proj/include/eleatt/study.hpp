#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eleatt/data.hpp"
#include "eleatt/trainer.hpp"

namespace eleatt {

/// One arm of a paired comparison. Every layer of the base network is switched
/// to this gating choice; everything else (data, seeds, widths) is shared.
struct StudyVariant {
  std::string name;
  bool gated = true;
  GateActivation activation = GateActivation::sigmoid;
};

struct StudySpec {
  DistractorTaskSpec task;
  TrainConfig train;
  std::vector<StudyVariant> variants;
  std::size_t seeds = 5;
  std::uint64_t base_seed = 1;
  /// Parallel runs. Each run is single-threaded and seeded, so the results
  /// do not depend on this value.
  std::size_t threads = 1;
};

struct StudyRun {
  std::string variant;
  std::uint64_t seed = 0;
  RunLog log;
  double final_train_loss = 0.0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  /// Mean relative attention of the first gated layer on the test split.
  std::optional<double> informative_attention;
  std::optional<double> distractor_attention;
  /// Mean static modulation (energy ratio) over the same element groups.
  std::optional<double> informative_modulation;
  std::optional<double> distractor_modulation;
};

/// Seed s uses task.seed = train.seed = base_seed + s for every variant.
std::vector<StudyRun> run_study(const StudySpec& spec,
                                const std::function<void(const StudyRun&)>& on_run = {});

std::vector<StudyRun> runs_of(const std::vector<StudyRun>& runs, const std::string& variant);
double median(std::vector<double> values);

/// First 1-based epoch whose training loss is <= target, or nullopt.
std::optional<std::size_t> epochs_to_reach(const RunLog& log, double target);

std::string study_csv(const std::vector<StudyRun>& runs);

}  // namespace eleatt
