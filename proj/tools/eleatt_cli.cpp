// eleatt: dataset generation, training, evaluation and analysis of
// element-wise-attention-gated recurrent networks.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eleatt/analysis.hpp"
#include "eleatt/bptt.hpp"
#include "eleatt/checkpoint.hpp"
#include "eleatt/config.hpp"
#include "eleatt/data.hpp"
#include "eleatt/error.hpp"
#include "eleatt/kernels.hpp"
#include "eleatt/study.hpp"
#include "eleatt/trainer.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace eleatt;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

const SequenceBatch& pick_split(const Dataset& data, const std::string& split) {
  if (split == "train") return data.train;
  if (split == "val") return data.val;
  if (split == "test") return data.test;
  throw UsageError("--split must be train, val or test");
}

/// `--key value` / `--key=value` pairs left over after CLI11 parsing.
KeyValueConfig overrides_from(const std::vector<std::string>& extras) {
  KeyValueConfig cfg;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) throw UsageError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("option '" + arg + "' needs a value");
      value = extras[++i];
    }
    cfg.set(key, value);
  }
  return cfg;
}

struct GlobalOptions {
  std::string isa = "auto";
  std::size_t threads = 1;
};

void apply_globals(const GlobalOptions& g) {
  if (g.isa != "auto") kernels::select(kernels::parse_isa(g.isa));
  if (g.threads == 0) throw UsageError("--threads must be positive");
}

void add_common_fields(cli::RunManifest& m, const GlobalOptions& g) {
  m.fields.emplace_back("isa", std::string(kernels::active().name));
  m.fields.emplace_back("threads", std::to_string(g.threads));
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  DistractorTaskSpec spec;
  std::string out = "data";
};

int cmd_gen(const GenOptions& o, const GlobalOptions& g) {
  cli::RunManifest manifest;
  manifest.started = cli::utc_timestamp();
  const Dataset data = gen_distractor(o.spec);
  save_splits(data, o.out);
  const std::uint64_t hash = dataset_hash(data);

  manifest.command = "gen";
  const DistractorTaskSpec& s = o.spec;
  manifest.fields = {{"seed", std::to_string(s.seed)},
                     {"gen.dims", std::to_string(s.dims)},
                     {"gen.informative", std::to_string(s.informative)},
                     {"gen.classes", std::to_string(s.classes)},
                     {"gen.min_length", std::to_string(s.min_length)},
                     {"gen.max_length", std::to_string(s.max_length)},
                     {"gen.noise", std::to_string(s.noise)},
                     {"gen.style", std::string(to_string(s.style))},
                     {"gen.signal_noise", std::to_string(s.signal_noise)},
                     {"gen.train", std::to_string(s.train_count)},
                     {"gen.val", std::to_string(s.val_count)},
                     {"gen.test", std::to_string(s.test_count)},
                     {"dataset_hash", hex64(hash)}};
  add_common_fields(manifest, g);
  manifest.artifacts = {{"train", "train.eds"}, {"val", "val.eds"}, {"test", "test.eds"}};
  manifest.finished = cli::utc_timestamp();
  manifest.write(o.out);

  std::cout << "wrote " << data.train.size() << "/" << data.val.size() << "/" << data.test.size()
            << " sequences to " << o.out << "\n";
  std::cout << "informative elements:";
  for (std::size_t i : data.train.informative) std::cout << ' ' << i;
  std::cout << "\ndataset hash " << hex64(hash) << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainOptionsCli {
  std::string config_path;
  std::string manifest_path;
  std::string data_dir;
  std::string out = "run";
  std::string resume;
};

int cmd_train(const TrainOptionsCli& o, const std::vector<std::string>& extras, const GlobalOptions& g) {
  cli::RunManifest manifest;
  manifest.started = cli::utc_timestamp();

  KeyValueConfig cfg = KeyValueConfig::defaults();
  if (!o.manifest_path.empty()) cfg.merge(cli::config_from_manifest(o.manifest_path));
  if (!o.config_path.empty()) cfg.merge(KeyValueConfig::load(o.config_path));
  cfg.merge(overrides_from(extras));
  if (!o.data_dir.empty()) cfg.set("data.dir", o.data_dir);
  if (!cfg.has("data.dir")) throw UsageError("no dataset: pass --data DIR or set data.dir");
  const fs::path data_dir = fs::absolute(cfg.get("data.dir"));
  cfg.set("data.dir", data_dir.string());

  const Dataset data = load_splits(data_dir);
  const std::size_t classes = std::max<std::size_t>(2, data.train.classes);
  const TrainConfig tc = resolve_train_config(cfg, data.train.dims, classes);

  TrainOptions opts;
  opts.out_dir = o.out;
  opts.wall_time_in_log = cfg.get_bool("log.wall_time");
  if (!o.resume.empty()) opts.resume = load_checkpoint(o.resume);
  opts.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %3zu  loss %.5f  acc %.4f  val_loss %.5f  val_acc %.4f  lr %g  (%.1fs)\n", r.epoch,
                r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr, r.seconds);
    std::fflush(stdout);
  };

  fs::create_directories(o.out);
  const TrainResult result = train(tc, data, opts);
  save_checkpoint(result.model, fs::path(o.out) / "final.ckpt");
  write_text(fs::path(o.out) / "runlog.csv", result.log.to_csv(opts.wall_time_in_log));
  std::string timing = "epoch,seconds\n";
  for (const EpochRecord& r : result.log.epochs) {
    timing += std::to_string(r.epoch) + "," + std::to_string(r.seconds) + "\n";
  }
  write_text(fs::path(o.out) / "timing.csv", timing);

  std::optional<EvalResult> test;
  if (!data.test.empty()) {
    test = evaluate(result.model, data.test);
    std::printf("test accuracy %.4f  loss %.5f  (%zu sequences)\n", test->accuracy, test->loss, test->count);
  }
  if (result.early_stopped) std::printf("stopped early: learning rate at floor and accuracy flat\n");

  manifest.command = "train";
  manifest.config = cfg;
  manifest.fields = {{"seed", std::to_string(tc.seed)},
                     {"dataset_hash", hex64(dataset_hash(data))},
                     {"epochs_run", std::to_string(result.log.epochs.size())},
                     {"best_epoch", std::to_string(result.best_epoch)}};
  if (!o.resume.empty()) manifest.fields.emplace_back("resumed_from", fs::absolute(o.resume).string());
  if (test) manifest.fields.emplace_back("test_accuracy", std::to_string(test->accuracy));
  add_common_fields(manifest, g);
  manifest.artifacts = {{"runlog", "runlog.csv"},
                        {"timing", "timing.csv"},
                        {"final_checkpoint", "final.ckpt"},
                        {"last_checkpoint", "last.ckpt"}};
  if (result.best_epoch > 0) manifest.artifacts.emplace_back("best_checkpoint", "best.ckpt");
  manifest.finished = cli::utc_timestamp();
  manifest.write(o.out);
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string checkpoint;
  std::string data_dir;
  std::string split = "test";
  std::string out;
};

int cmd_eval(const EvalOptions& o, const GlobalOptions& g) {
  const std::string started = cli::utc_timestamp();
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Dataset data = load_splits(o.data_dir);
  const SequenceBatch& split = pick_split(data, o.split);
  const EvalResult r = evaluate(ck.model, split);
  std::printf("%s accuracy %.4f  loss %.5f  (%zu sequences)\n", o.split.c_str(), r.accuracy, r.loss, r.count);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "eval.txt", "split=" + o.split + "\naccuracy=" + std::to_string(r.accuracy) +
                                                 "\nloss=" + std::to_string(r.loss) + "\n");
    cli::RunManifest m;
    m.command = "eval";
    m.started = started;
    m.fields = {{"seed", std::to_string(ck.seed)},
                {"checkpoint", fs::absolute(o.checkpoint).string()},
                {"data.dir", fs::absolute(o.data_dir).string()},
                {"split", o.split},
                {"dataset_hash", hex64(dataset_hash(data))}};
    add_common_fields(m, g);
    m.artifacts = {{"result", "eval.txt"}};
    m.finished = cli::utc_timestamp();
    m.write(o.out);
  }
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  std::string kind = "all";
  std::string gated = "all";
  std::size_t seeds = 20;
  std::uint64_t base_seed = 1;
  std::size_t dims = 5;
  std::size_t hidden = 6;
  std::size_t length = 4;
  std::size_t batch = 3;
  double tolerance = 1e-5;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckOptions& o) {
  std::vector<CellKind> kinds;
  if (o.kind == "all") {
    kinds = {CellKind::srnn, CellKind::lstm, CellKind::gru};
  } else {
    kinds = {parse_cell_kind(o.kind)};
  }
  std::vector<bool> gating;
  if (o.gated == "all") {
    gating = {false, true};
  } else {
    gating = {parse_bool(o.gated)};
  }

  bool all_passed = true;
  for (CellKind kind : kinds) {
    for (bool gated : gating) {
      GradCheckSpec spec;
      spec.kind = kind;
      spec.gated = gated;
      spec.seeds = o.seeds;
      spec.base_seed = o.base_seed;
      spec.max_input_dim = o.dims;
      spec.max_hidden = o.hidden;
      spec.max_length = o.length;
      spec.max_batch = o.batch;
      spec.tolerance = o.tolerance;
      spec.corrupt = o.corrupt;
      const GradCheckReport rep = gradient_check(spec);
      all_passed = all_passed && rep.passed;
      std::printf("%-5s %-8s %s  configs %zu  worst %.3e  (%s)\n", std::string(to_string(kind)).c_str(),
                  gated ? "gated" : "ungated", rep.passed ? "PASS" : "FAIL", rep.configs, rep.worst,
                  rep.worst_config.c_str());
      std::printf("    64-bit fd: worst relative %.3e, worst absolute %.3e\n", rep.worst_double_fd,
                  rep.worst_abs_double_fd);
      for (const TensorError& t : rep.per_tensor) std::printf("    %-12s %.3e\n", t.name.c_str(), t.worst);
    }
  }
  return all_passed ? 0 : 1;
}

// ---------------------------------------------------------------- cost

struct CostOptions {
  std::string kind = "gru";
  std::size_t dims = 75;
  std::size_t hidden = 100;
  std::size_t layers = 1;
  std::size_t classes = 60;
  bool gated = false;
  std::string gated_layers;
  std::string config_path;
  bool json = false;
};

int cmd_cost(const CostOptions& o) {
  NetworkConfig net;
  if (!o.config_path.empty()) {
    KeyValueConfig cfg = KeyValueConfig::load(o.config_path);
    net = resolve_train_config(cfg, o.dims, o.classes).network;
  } else {
    net = NetworkConfig::stack(o.dims, o.classes, parse_cell_kind(o.kind), o.layers, o.hidden, o.gated);
    if (!o.gated_layers.empty()) {
      // Comma-separated layer indices that carry a gate; others are plain.
      for (LayerSpec& l : net.layers) l.gated = false;
      std::stringstream ss(o.gated_layers);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const std::size_t idx = std::stoul(item);
        if (idx >= net.layers.size()) throw UsageError("--gated-layers index out of range");
        net.layers[idx].gated = true;
      }
    }
  }
  const CostReport rep = count_flops(net);
  std::cout << (o.json ? rep.to_json() + "\n" : rep.to_table());
  return rep.total_params() == rep.enumerated_total_params() ? 0 : 1;
}

// ---------------------------------------------------------------- attn

struct AttnOptions {
  std::string checkpoint;
  std::string data_dir;
  std::string split = "test";
  std::string out = "attention";
  std::size_t layer = 0;
  std::string mode = "energy_ratio";
  std::size_t limit = 0;
};

int cmd_attn(const AttnOptions& o, const GlobalOptions& g) {
  const std::string started = cli::utc_timestamp();
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  if (!ck.model.has_gated_layer()) {
    throw std::runtime_error("attn: checkpoint has no EleAttG layer; attention is undefined for ungated models");
  }
  if (o.layer >= ck.model.num_layers() || !ck.model.config().layers[o.layer].gated) {
    throw UsageError("attn: --layer " + std::to_string(o.layer) + " is not a gated layer");
  }
  const Dataset data = load_splits(o.data_dir);
  SequenceBatch split = pick_split(data, o.split);
  if (o.limit > 0 && o.limit < split.size()) {
    std::vector<std::size_t> idx(o.limit);
    for (std::size_t i = 0; i < o.limit; ++i) idx[i] = i;
    split = split.subset(idx);
  }
  StaticModulation mode;
  if (o.mode == "energy_ratio") {
    mode = StaticModulation::energy_ratio;
  } else if (o.mode == "rms_ratio") {
    mode = StaticModulation::rms_ratio;
  } else if (o.mode == "mean_response") {
    mode = StaticModulation::mean_response;
  } else {
    throw UsageError("--mode must be energy_ratio, rms_ratio or mean_response");
  }

  const AttentionTrace trace = extract_attention(ck.model, split, {o.layer});
  const RelativeAttention rel = relative_attention(trace, 0, mode);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "attention.csv", attention_csv(trace, rel, 0));
  write_text(fs::path(o.out) / "attention.json", attention_json(rel));

  std::printf("element  static_mod  mean_relative\n");
  for (std::size_t d = 0; d < rel.element_mean.size(); ++d) {
    std::printf("%7zu  %10.4f  %13.4f\n", d, rel.static_modulation[d], rel.element_mean[d]);
  }
  if (!split.informative.empty()) {
    std::vector<std::size_t> distractors;
    for (std::size_t d = 0; d < split.dims; ++d) {
      if (std::find(split.informative.begin(), split.informative.end(), d) == split.informative.end()) {
        distractors.push_back(d);
      }
    }
    std::printf("informative mean %.4f  distractor mean %.4f\n", mean_over(rel, split.informative),
                mean_over(rel, distractors));
  }

  cli::RunManifest m;
  m.command = "attn";
  m.started = started;
  m.fields = {{"seed", std::to_string(ck.seed)},
              {"checkpoint", fs::absolute(o.checkpoint).string()},
              {"data.dir", fs::absolute(o.data_dir).string()},
              {"split", o.split},
              {"layer", std::to_string(o.layer)},
              {"mode", o.mode}};
  add_common_fields(m, g);
  m.artifacts = {{"csv", "attention.csv"}, {"json", "attention.json"}};
  m.finished = cli::utc_timestamp();
  m.write(o.out);
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  DistractorTaskSpec task;
  std::string variants = "eleatt,baseline";
  std::size_t seeds = 5;
  std::uint64_t base_seed = 1;
  std::string config_path;
  std::string out = "bench";
};

int cmd_bench(const BenchOptions& o, const std::vector<std::string>& extras, const GlobalOptions& g) {
  const std::string started = cli::utc_timestamp();
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.set("model.layers", "2");
  if (!o.config_path.empty()) cfg.merge(KeyValueConfig::load(o.config_path));
  cfg.merge(overrides_from(extras));

  StudySpec spec;
  spec.task = o.task;
  spec.task.validate();
  spec.train = resolve_train_config(cfg, o.task.dims, o.task.classes);
  spec.seeds = o.seeds;
  spec.base_seed = o.base_seed;
  spec.threads = g.threads;
  std::stringstream ss(o.variants);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "eleatt") {
      spec.variants.push_back({"eleatt", true, GateActivation::sigmoid});
    } else if (name == "baseline") {
      spec.variants.push_back({"baseline", false, GateActivation::sigmoid});
    } else if (name == "softmax") {
      spec.variants.push_back({"softmax", true, GateActivation::softmax});
    } else {
      throw UsageError("unknown variant '" + name + "' (eleatt, baseline, softmax)");
    }
  }

  const auto runs = run_study(spec, [](const StudyRun& r) {
    std::printf("%-8s seed %llu  epochs %zu  final loss %.5f  test acc %.4f", r.variant.c_str(),
                static_cast<unsigned long long>(r.seed), r.log.epochs.size(), r.final_train_loss,
                r.test_accuracy);
    if (r.informative_attention) {
      std::printf("  attn informative %.3f distractor %.3f", *r.informative_attention, *r.distractor_attention);
    }
    std::printf("\n");
    std::fflush(stdout);
  });

  std::printf("\nvariant   median final loss   median test acc\n");
  for (const StudyVariant& v : spec.variants) {
    std::vector<double> loss, acc;
    for (const StudyRun& r : runs_of(runs, v.name)) {
      loss.push_back(r.final_train_loss);
      acc.push_back(r.test_accuracy);
    }
    std::printf("%-8s  %17.5f   %15.4f\n", v.name.c_str(), median(loss), median(acc));
  }

  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "study.csv", study_csv(runs));
  for (const StudyRun& r : runs) {
    write_text(fs::path(o.out) / (r.variant + "_seed" + std::to_string(r.seed) + ".csv"), r.log.to_csv());
  }
  cli::RunManifest m;
  m.command = "bench";
  m.started = started;
  m.config = cfg;
  m.fields = {{"seed", std::to_string(o.base_seed)},
              {"seeds", std::to_string(o.seeds)},
              {"variants", o.variants},
              {"gen.dims", std::to_string(o.task.dims)},
              {"gen.informative", std::to_string(o.task.informative)},
              {"gen.classes", std::to_string(o.task.classes)},
              {"gen.noise", std::to_string(o.task.noise)}};
  add_common_fields(m, g);
  m.artifacts = {{"summary", "study.csv"}};
  m.finished = cli::utc_timestamp();
  m.write(o.out);
  return 0;
}

void add_task_flags(CLI::App* cmd, DistractorTaskSpec& s) {
  cmd->add_option_function<std::string>(
         "--style", [&s](const std::string& v) { s.style = parse_distractor_style(v); },
         "distractor style: white or decoy")
      ->default_str("white");
  cmd->add_option("--dims", s.dims, "input dimension D")->capture_default_str();
  cmd->add_option("--informative", s.informative, "class-carrying elements S")->capture_default_str();
  cmd->add_option("--classes", s.classes, "number of classes K")->capture_default_str();
  cmd->add_option("--min-length", s.min_length)->capture_default_str();
  cmd->add_option("--max-length", s.max_length)->capture_default_str();
  cmd->add_option("--noise", s.noise, "std of distractor elements")->capture_default_str();
  cmd->add_option("--signal-noise", s.signal_noise, "jitter on informative elements")->capture_default_str();
  cmd->add_option("--train", s.train_count)->capture_default_str();
  cmd->add_option("--val", s.val_count)->capture_default_str();
  cmd->add_option("--test", s.test_count)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Element-wise attention gates for recurrent networks"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--isa", g.isa, "kernel ISA: auto, scalar or avx2")->capture_default_str();
  app.add_option("--threads", g.threads,
                 "parallel workers for bench runs; every run stays single-threaded and seeded")
      ->capture_default_str();

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate the distractor task");
  add_task_flags(gen_cmd, gen.spec);
  gen_cmd->add_option("--seed", gen.spec.seed)->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->capture_default_str();

  TrainOptionsCli tr;
  auto* train_cmd = app.add_subcommand("train", "train a network; extra --key value pairs override the config");
  train_cmd->add_option("--config", tr.config_path, "key=value config file");
  train_cmd->add_option("--manifest", tr.manifest_path, "replay the configuration of an earlier run");
  train_cmd->add_option("--data", tr.data_dir, "dataset directory");
  train_cmd->add_option("--out", tr.out, "run directory")->capture_default_str();
  train_cmd->add_option("--resume", tr.resume, "continue from a last.ckpt");
  train_cmd->allow_extras();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--data", ev.data_dir)->required();
  eval_cmd->add_option("--split", ev.split)->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "optional run directory");

  GradcheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "compare BPTT gradients with finite differences");
  gc_cmd->add_option("--kind", gc.kind, "srnn, lstm, gru or all")->capture_default_str();
  gc_cmd->add_option("--gated", gc.gated, "true, false or all")->capture_default_str();
  gc_cmd->add_option("--seeds", gc.seeds)->capture_default_str();
  gc_cmd->add_option("--base-seed", gc.base_seed)->capture_default_str();
  gc_cmd->add_option("--dims", gc.dims, "max input dimension")->capture_default_str();
  gc_cmd->add_option("--hidden", gc.hidden, "max hidden width")->capture_default_str();
  gc_cmd->add_option("--length", gc.length, "max sequence length")->capture_default_str();
  gc_cmd->add_option("--batch", gc.batch, "max batch size")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
  gc_cmd->add_flag("--corrupt", gc.corrupt, "perturb one analytic gradient (harness self-test)");

  CostOptions co;
  auto* cost_cmd = app.add_subcommand("cost", "parameter and FLOP counts");
  cost_cmd->add_option("--kind", co.kind)->capture_default_str();
  cost_cmd->add_option("--dims", co.dims)->capture_default_str();
  cost_cmd->add_option("--hidden", co.hidden)->capture_default_str();
  cost_cmd->add_option("--layers", co.layers)->capture_default_str();
  cost_cmd->add_option("--classes", co.classes)->capture_default_str();
  cost_cmd->add_flag("--gated", co.gated, "EleAttG in every layer");
  cost_cmd->add_option("--gated-layers", co.gated_layers, "comma-separated gated layer indices");
  cost_cmd->add_option("--config", co.config_path, "key=value config file (model.* keys)");
  cost_cmd->add_flag("--json", co.json);

  AttnOptions at;
  auto* attn_cmd = app.add_subcommand("attn", "dump gate responses and relative attention");
  attn_cmd->add_option("--checkpoint", at.checkpoint)->required();
  attn_cmd->add_option("--data", at.data_dir)->required();
  attn_cmd->add_option("--split", at.split)->capture_default_str();
  attn_cmd->add_option("--out", at.out)->capture_default_str();
  attn_cmd->add_option("--layer", at.layer)->capture_default_str();
  attn_cmd->add_option("--mode", at.mode, "energy_ratio, rms_ratio or mean_response")->capture_default_str();
  attn_cmd->add_option("--limit", at.limit, "only the first N sequences (0 = all)");

  BenchOptions be;
  auto* bench_cmd = app.add_subcommand("bench", "paired seeded comparison of gate variants");
  add_task_flags(bench_cmd, be.task);
  bench_cmd->add_option("--variants", be.variants, "comma list of eleatt, baseline, softmax")->capture_default_str();
  bench_cmd->add_option("--seeds", be.seeds)->capture_default_str();
  bench_cmd->add_option("--base-seed", be.base_seed)->capture_default_str();
  bench_cmd->add_option("--config", be.config_path);
  bench_cmd->add_option("--out", be.out)->capture_default_str();
  bench_cmd->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    apply_globals(g);
    if (*gen_cmd) return cmd_gen(gen, g);
    if (*train_cmd) return cmd_train(tr, train_cmd->remaining(), g);
    if (*eval_cmd) return cmd_eval(ev, g);
    if (*gc_cmd) return cmd_gradcheck(gc);
    if (*cost_cmd) return cmd_cost(co);
    if (*attn_cmd) return cmd_attn(at, g);
    if (*bench_cmd) return cmd_bench(be, bench_cmd->remaining(), g);
  } catch (const std::invalid_argument& e) {
    // UsageError, ConfigError and ShapeError: the request itself is invalid.
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}
