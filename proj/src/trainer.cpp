#include "eleatt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

#include "binary_io.hpp"
#include "eleatt/bptt.hpp"
#include "eleatt/error.hpp"

namespace eleatt {
namespace {

std::size_t argmax_column(const Tensor2& m, std::size_t col) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < m.rows(); ++k) {
    if (m(k, col) > m(best, col)) best = k;
  }
  return best;
}

std::size_t count_correct(const Tensor2& logits, std::span<const std::uint32_t> labels) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) n += argmax_column(logits, j) == labels[j];
  return n;
}

SequenceBatch augment_batch(const SequenceBatch& batch, RngStream& rng, double degrees) {
  SequenceBatch out = batch;
  for (Tensor2& seq : out.inputs) {
    seq = rotate_augment(SkeletonSequence::from_tensor(std::move(seq)), rng, degrees).frames;
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  io::write_file(path, io::Bytes(text.begin(), text.end()));
}

struct Progress {
  std::size_t epoch = 0;
  std::size_t plateau_epochs = 0;
  std::size_t best_epoch = 0;
  double best_val_acc = -1.0;
};

// Every setting that shapes the trajectory except `epochs`, which a resumed
// run may extend.
std::string trajectory_key(const TrainConfig& c) {
  std::string key = "batch=" + std::to_string(c.batch_size) + ";lr=" + io::format_double(c.initial_lr) +
                    ";clip=" + io::format_double(c.clip) +
                    ";clip_mode=" + (c.clip_mode == ClipMode::elementwise ? "elementwise" : "global_norm") +
                    ";seed=" + std::to_string(c.seed) + ";center=" + std::to_string(c.center) +
                    ";augment=" + std::to_string(c.augment) + ";degrees=" + io::format_double(c.augment_degrees) +
                    ";eval_every=" + std::to_string(c.eval_every) + ";patience=" + std::to_string(c.lr_patience) +
                    ";floor=" + io::format_double(c.lr_floor) +
                    ";early_stop=" + std::to_string(c.early_stop_patience) +
                    ";val_fraction=" + io::format_double(c.val_fraction);
  return key;
}

std::string log_key(std::size_t epoch) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "log.%06zu", epoch);
  return buf;
}

std::string encode_record(const EpochRecord& r) {
  std::string out = std::to_string(r.epoch);
  for (double v : {r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr, r.seconds}) {
    out += ',';
    out += io::format_double(v);
  }
  return out;
}

EpochRecord decode_record(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    parts.push_back(text.substr(pos, comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (parts.size() != 7) throw FormatError("checkpoint: malformed run-log entry '" + text + "'");
  EpochRecord r;
  r.epoch = io::parse_u64(parts[0]);
  r.train_loss = io::parse_double(parts[1]);
  r.train_acc = io::parse_double(parts[2]);
  r.val_loss = io::parse_double(parts[3]);
  r.val_acc = io::parse_double(parts[4]);
  r.lr = io::parse_double(parts[5]);
  r.seconds = io::parse_double(parts[6]);
  return r;
}

Checkpoint make_checkpoint(const Network& net, const TrainConfig& cfg, const AdamState& adam,
                           const LrSchedule& sched, const Progress& prog, const RunLog& log) {
  Checkpoint c;
  c.model = net;
  c.seed = cfg.seed;
  c.optimizer = adam;
  c.schedule = sched;
  c.extra["epoch"] = std::to_string(prog.epoch);
  c.extra["plateau_epochs"] = std::to_string(prog.plateau_epochs);
  c.extra["best_epoch"] = std::to_string(prog.best_epoch);
  c.extra["best_val_acc"] = io::format_double(prog.best_val_acc);
  c.extra["trajectory"] = trajectory_key(cfg);
  for (const EpochRecord& r : log.epochs) c.extra[log_key(r.epoch)] = encode_record(r);
  return c;
}

}  // namespace

void TrainConfig::validate() const {
  network.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(initial_lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (lr_patience == 0) throw ConfigError("lr_patience must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
  if ((augment || center) && network.input_dim % 3 != 0) {
    throw ConfigError("centering/augmentation need skeleton inputs (D divisible by 3)");
  }
}

std::string RunLog::to_csv(bool wall_time) const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds\n";
  for (const EpochRecord& r : epochs) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr}) {
      out += ',';
      out += io::format_double(v);
    }
    out += ',';
    if (wall_time) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
      out += buf;
    } else {
      out += "NA";
    }
    out += '\n';
  }
  return out;
}

EvalResult evaluate(const Network& model, const SequenceBatch& data, std::size_t batch_size) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  EvalResult r;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const SequenceBatch chunk = data.subset(idx);
    const ForwardPass pass = unroll_forward(model, chunk, Mode::eval);
    loss_sum += cross_entropy(pass.logits, chunk.labels) * static_cast<double>(chunk.size());
    correct += count_correct(pass.logits, chunk.labels);
  }
  r.count = data.size();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.loss = loss_sum / static_cast<double>(data.size());
  return r;
}

Dataset center_dataset(const Dataset& data) {
  Dataset out = data;
  for (SequenceBatch* split : {&out.train, &out.val, &out.test}) {
    for (Tensor2& seq : split->inputs) {
      seq = center_first_frame(SkeletonSequence::from_tensor(std::move(seq))).frames;
    }
  }
  return out;
}

TrainResult train(const TrainConfig& config, const Dataset& data_in, const TrainOptions& options) {
  config.validate();
  if (data_in.train.empty()) throw ConfigError("train: empty training split");
  if (data_in.train.dims != config.network.input_dim) {
    throw ShapeError("train: dataset D=" + std::to_string(data_in.train.dims) +
                     " but network input_dim=" + std::to_string(config.network.input_dim));
  }
  if (data_in.train.classes > config.network.num_classes) {
    throw ShapeError("train: dataset has more classes than the network outputs");
  }
  Dataset data = config.center ? center_dataset(data_in) : data_in;

  const RngStream root(config.seed);
  SequenceBatch train_set = data.train;
  SequenceBatch val_set = data.val;
  if (val_set.empty()) {
    // Fixed per seed: the same sequences are held out on every run.
    RngStream split_rng = root.derive("val_split");
    const auto perm = split_rng.permutation(train_set.size());
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(config.val_fraction * static_cast<double>(train_set.size()))));
    if (n_val >= train_set.size()) throw ConfigError("train: too few sequences to hold out validation");
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    val_set = data.train.subset(val_idx);
    train_set = data.train.subset(train_idx);
  }

  TrainResult result;
  Network net = build(config.network, root.derive("model").next_u64());
  AdamState adam = AdamState::for_params(std::as_const(net).params().tensors());
  LrSchedule sched;
  sched.current_lr = config.initial_lr;
  sched.floor = config.lr_floor;
  sched.patience = config.lr_patience;
  Progress prog;

  if (options.resume) {
    const Checkpoint& ck = *options.resume;
    if (!(ck.model.config() == config.network)) {
      throw ConfigError("train: resume checkpoint was written for a different network config");
    }
    if (!ck.optimizer || !ck.schedule || !ck.extra.count("epoch")) {
      throw ConfigError("train: resume checkpoint lacks optimizer/schedule state");
    }
    net = ck.model;
    adam = *ck.optimizer;
    sched = *ck.schedule;
    prog.epoch = io::parse_u64(ck.extra.at("epoch"));
    prog.plateau_epochs = io::parse_u64(ck.extra.at("plateau_epochs"));
    prog.best_epoch = io::parse_u64(ck.extra.at("best_epoch"));
    prog.best_val_acc = io::parse_double(ck.extra.at("best_val_acc"));
    const auto key = ck.extra.find("trajectory");
    if (key == ck.extra.end() || key->second != trajectory_key(config)) {
      throw ConfigError("train: resume checkpoint was written with different training settings");
    }
    for (std::size_t e = 1; e <= prog.epoch; ++e) {
      const auto row = ck.extra.find(log_key(e));
      if (row == ck.extra.end()) throw FormatError("train: resume checkpoint is missing run-log epoch " + std::to_string(e));
      result.log.epochs.push_back(decode_record(row->second));
    }
  }
  result.best_model = net;
  result.best_epoch = prog.best_epoch;
  result.best_val_acc = prog.best_val_acc;
  const bool write_files = !options.out_dir.empty();
  if (options.resume && write_files && std::filesystem::exists(options.out_dir / "best.ckpt")) {
    result.best_model = load_checkpoint(options.out_dir / "best.ckpt").model;
  }

  if (write_files) std::filesystem::create_directories(options.out_dir);

  EvalResult last_val{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), 0};
  while (prog.epoch < config.epochs) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t epoch = prog.epoch + 1;
    const RngStream epoch_rng = root.derive("epoch", epoch);
    RngStream shuffle_rng = epoch_rng.derive("shuffle");
    RngStream dropout_rng = epoch_rng.derive("dropout");
    RngStream augment_rng = epoch_rng.derive("augment");
    const auto order = shuffle_rng.permutation(train_set.size());

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      SequenceBatch batch = train_set.subset(idx);
      if (config.augment) batch = augment_batch(batch, augment_rng, config.augment_degrees);

      const ForwardPass pass = unroll_forward(net, batch, Mode::train, &dropout_rng);
      LossAndGrad lg = backward(net, pass, batch.labels);
      if (!std::isfinite(lg.loss)) {
        throw NonFiniteError("train: non-finite loss in epoch " + std::to_string(epoch), epoch);
      }
      loss_sum += lg.loss * static_cast<double>(batch.size());
      correct += count_correct(pass.logits, batch.labels);
      clip_gradients(lg.grads, config.clip, config.clip_mode);
      adam_step(net.params(), lg.grads, adam, sched.current_lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    rec.lr = sched.current_lr;
    if (epoch % config.eval_every == 0 || epoch == config.epochs) last_val = evaluate(net, val_set);
    rec.val_loss = last_val.loss;
    rec.val_acc = last_val.accuracy;

    if (rec.train_acc > sched.best_train_acc) {
      prog.plateau_epochs = 0;
    } else {
      ++prog.plateau_epochs;
    }
    sched = schedule_update(sched, rec.train_acc);
    prog.epoch = epoch;

    const bool improved = rec.val_acc > prog.best_val_acc;
    if (improved) {
      prog.best_val_acc = rec.val_acc;
      prog.best_epoch = epoch;
      result.best_model = net;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);

    if (write_files) {
      if (improved) save_checkpoint(make_checkpoint(net, config, adam, sched, prog, result.log), options.out_dir / "best.ckpt");
      save_checkpoint(make_checkpoint(net, config, adam, sched, prog, result.log), options.out_dir / "last.ckpt");
      write_text(options.out_dir / "runlog.csv", result.log.to_csv(options.wall_time_in_log));
    }
    if (options.on_epoch) options.on_epoch(rec);

    if (sched.at_floor() && prog.plateau_epochs >= config.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.model = std::move(net);
  result.best_epoch = prog.best_epoch;
  result.best_val_acc = prog.best_val_acc;
  return result;
}

}  // namespace eleatt
