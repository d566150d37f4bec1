#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eleatt/checkpoint.hpp"
#include "eleatt/data.hpp"
#include "eleatt/model.hpp"
#include "eleatt/optimizer.hpp"

namespace eleatt {

struct TrainConfig {
  NetworkConfig network;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double initial_lr = 0.005;
  double clip = 1.0;
  ClipMode clip_mode = ClipMode::elementwise;
  std::uint64_t seed = 1;
  bool center = false;   // first-frame centering (skeleton inputs, D % 3 == 0)
  bool augment = false;  // per-epoch random rotation (skeleton inputs)
  double augment_degrees = 35.0;
  std::size_t eval_every = 1;
  std::size_t lr_patience = 1;
  double lr_floor = 1e-6;
  std::size_t early_stop_patience = 5;
  double val_fraction = 0.1;  // used only when the dataset has no val split

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct RunLog {
  std::vector<EpochRecord> epochs;

  /// Columns: epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds. Without
  /// `wall_time` the seconds column reads NA so the file is reproducible.
  std::string to_csv(bool wall_time = false) const;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t count = 0;
};

/// Eval mode (no dropout); argmax ties go to the lowest class index.
EvalResult evaluate(const Network& model, const SequenceBatch& data, std::size_t batch_size = 256);

struct TrainOptions {
  /// When set: runlog.csv, last.ckpt (resumable) and best.ckpt are written here.
  std::filesystem::path out_dir;
  /// Continue from a checkpoint written by a previous run's last.ckpt.
  std::optional<Checkpoint> resume;
  bool wall_time_in_log = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Network model;       // parameters after the last epoch
  Network best_model;  // parameters at the best validation accuracy
  RunLog log;
  std::size_t best_epoch = 0;
  double best_val_acc = -1.0;
  bool early_stopped = false;
};

/// Single-threaded and deterministic in (config, dataset). Throws
/// NonFiniteError on divergence; files from the last good epoch remain.
TrainResult train(const TrainConfig& config, const Dataset& data, const TrainOptions& options = {});

/// Applies first-frame centering to every sequence of every split.
Dataset center_dataset(const Dataset& data);

}  // namespace eleatt
