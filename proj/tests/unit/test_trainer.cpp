#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "eleatt/checkpoint.hpp"
#include "eleatt/config.hpp"
#include "eleatt/error.hpp"
#include "eleatt/trainer.hpp"

using namespace eleatt;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eleatt_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Dataset small_task(std::uint64_t seed = 1) {
  DistractorTaskSpec s;
  s.dims = 6;
  s.informative = 2;
  s.min_length = 4;
  s.max_length = 8;
  s.noise = 1.0;
  s.train_count = 60;
  s.val_count = 12;
  s.test_count = 30;
  s.seed = seed;
  return gen_distractor(s);
}

TrainConfig small_config(std::size_t epochs) {
  TrainConfig c;
  c.network = NetworkConfig::stack(6, 3, CellKind::gru, 2, 6, true);
  c.epochs = epochs;
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("zero epochs returns the initialized model and an empty log") {
  const TrainConfig c = small_config(0);
  const TrainResult r = train(c, small_task());
  CHECK(r.log.epochs.empty());
  CHECK(r.log.to_csv() == "epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds\n");
  CHECK(r.model.params().fc_w.size() == 18);
}

TEST_CASE("training is deterministic and the log is consistent") {
  const Dataset d = small_task();
  const TrainConfig c = small_config(6);
  const TrainResult a = train(c, d);
  const TrainResult b = train(c, d);
  CHECK(a.log.to_csv() == b.log.to_csv());
  CHECK(a.model.params().fc_w == b.model.params().fc_w);
  REQUIRE(a.log.epochs.size() == 6);
  double last_lr = c.initial_lr;
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    const EpochRecord& e = a.log.epochs[i];
    CHECK(e.epoch == i + 1);
    CHECK(std::isfinite(e.train_loss));
    CHECK(std::isfinite(e.val_loss));
    CHECK(e.lr <= last_lr);
    if (e.lr != last_lr) CHECK(e.lr == doctest::Approx(last_lr / 10));
    last_lr = e.lr;
  }
  // The lr only drops after an epoch whose training accuracy did not improve.
  double best = -1.0;
  for (std::size_t i = 0; i + 1 < a.log.epochs.size(); ++i) {
    const bool improved = a.log.epochs[i].train_acc > best;
    best = std::max(best, a.log.epochs[i].train_acc);
    if (improved) CHECK(a.log.epochs[i + 1].lr == a.log.epochs[i].lr);
  }
  CHECK(a.log.to_csv().find(",NA\n") != std::string::npos);

  TrainConfig other = c;
  other.seed = 2;
  CHECK_FALSE(train(other, d).log.to_csv() == a.log.to_csv());
}

TEST_CASE("evaluate") {
  const Dataset d = small_task();
  const Network zero(small_config(1).network);
  const EvalResult r = evaluate(zero, d.test);
  // Uniform predictions: every tie goes to class 0, a third of a balanced split.
  CHECK(r.accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(r.loss == doctest::Approx(std::log(3.0)));
  CHECK(r.count == 30);
  CHECK_THROWS_AS(evaluate(zero, SequenceBatch{}), ConfigError);

  const TrainResult t = train(small_config(3), d);
  const EvalResult e1 = evaluate(t.model, d.test, 7);
  const EvalResult e2 = evaluate(t.model, d.test, 256);
  CHECK(e1.accuracy == e2.accuracy);
  CHECK(std::abs(e1.loss - e2.loss) < 1e-12);
}

TEST_CASE("noise-free task: a one-layer GRU fits the training set") {
  DistractorTaskSpec s;
  s.dims = 4;
  s.informative = 3;
  s.noise = 0.0;
  s.signal_noise = 0.0;
  s.train_count = 60;
  s.val_count = 12;
  s.test_count = 12;
  const Dataset d = gen_distractor(s);
  TrainConfig c;
  c.network = NetworkConfig::stack(4, 3, CellKind::gru, 1, 16, false);
  c.network.dropout_p = 0.0;
  c.epochs = 150;
  c.batch_size = 16;
  c.initial_lr = 0.01;
  c.lr_patience = 10;
  const TrainResult r = train(c, d);
  CHECK(evaluate(r.model, d.train).accuracy == 1.0);
}

TEST_CASE("permuted labels give chance accuracy") {
  DistractorTaskSpec s;
  s.dims = 8;
  s.informative = 3;
  s.noise = 1.0;
  s.min_length = 5;
  s.max_length = 10;
  s.train_count = 900;
  s.val_count = 30;
  s.test_count = 900;
  Dataset d = gen_distractor(s);
  d.train = permute_labels(d.train, 5);
  d.val = permute_labels(d.val, 6);
  TrainConfig c;
  c.network = NetworkConfig::stack(8, 3, CellKind::gru, 1, 8, true);
  c.epochs = 10;
  const TrainResult r = train(c, d);
  CHECK(std::abs(evaluate(r.model, d.test).accuracy - 1.0 / 3.0) < 0.05);
}

TEST_CASE("mixed stacks and other kinds train through the same path") {
  const Dataset d = small_task();
  TrainConfig c = small_config(2);
  c.network.layers[0].gated = false;
  c.network.layers[1].kind = CellKind::lstm;
  c.network.readout = Readout::mean_over_time;
  c.clip_mode = ClipMode::global_norm;
  const TrainResult r = train(c, d);
  CHECK(r.log.epochs.size() == 2);
}

TEST_CASE("skeleton options require D divisible by 3") {
  TrainConfig c = small_config(1);
  c.network.input_dim = 6;
  c.augment = true;
  c.center = true;
  CHECK_NOTHROW(train(c, small_task()));
  TrainConfig bad = c;
  bad.network = NetworkConfig::stack(4, 3, CellKind::gru, 1, 4, true);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  TrainConfig zero_batch = small_config(1);
  zero_batch.batch_size = 0;
  CHECK_THROWS_AS(zero_batch.validate(), ConfigError);
}

TEST_CASE("center_dataset centers the first frame of every sequence") {
  const Dataset c = center_dataset(small_task());
  for (const Tensor2& x : c.train.inputs)
    for (std::size_t k = 0; k < 3; ++k) {
      double mean = 0.0;
      for (std::size_t j = 0; j < 2; ++j) mean += x(3 * j + k, 0) / 2.0;
      CHECK(std::abs(mean) < 1e-12);
    }
}

TEST_CASE("checkpoints and resume reproduce the uninterrupted run") {
  const Dataset d = small_task();
  const fs::path full = temp_dir("resume_full"), part = temp_dir("resume_part");
  TrainConfig c = small_config(8);
  c.lr_patience = 1;

  TrainOptions o;
  o.out_dir = full;
  const TrainResult whole = train(c, d, o);
  CHECK(fs::exists(full / "best.ckpt"));
  CHECK(fs::exists(full / "last.ckpt"));
  CHECK(fs::exists(full / "runlog.csv"));
  const Checkpoint best = load_checkpoint(full / "best.ckpt");
  CHECK(best.model.params().fc_w == whole.best_model.params().fc_w);

  TrainConfig first = c;
  first.epochs = 3;
  TrainOptions po;
  po.out_dir = part;
  train(first, d, po);
  TrainOptions ro;
  ro.out_dir = part;
  ro.resume = load_checkpoint(part / "last.ckpt");
  CHECK(ro.resume->schedule.has_value());
  const TrainResult resumed = train(c, d, ro);
  CHECK(resumed.log.to_csv() == whole.log.to_csv());
  CHECK(resumed.model.params().fc_w == whole.model.params().fc_w);

  TrainConfig changed = c;
  changed.batch_size = 8;
  CHECK_THROWS(train(changed, d, ro));
}

TEST_CASE("key=value configuration") {
  const KeyValueConfig k = KeyValueConfig::parse(
      "# comment\nmodel.kind=lstm\nmodel.layers=2\nmodel.hidden=7\nmodel.layer.1.gated=false\n"
      "train.lr=0.001\ntrain.epochs=4\nmodel.layers=3\n");
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.merge(k);
  cfg.set("gated", "false");
  cfg.set("batch", "8");
  const TrainConfig tc = resolve_train_config(cfg, 5, 4);
  CHECK(tc.network.layers.size() == 3);
  CHECK(tc.network.layers[0].kind == CellKind::lstm);
  CHECK(tc.network.layers[0].hidden == 7);
  CHECK_FALSE(tc.network.layers[0].gated);
  CHECK(tc.initial_lr == 0.001);
  CHECK(tc.epochs == 4);
  CHECK(tc.batch_size == 8);
  CHECK(tc.network.input_dim == 5);
  CHECK(tc.network.num_classes == 4);

  const TrainConfig def = resolve_train_config(KeyValueConfig::defaults(), 20, 3);
  CHECK(def.network.layers.size() == 3);
  CHECK(def.network.layers[2].hidden == 16);
  CHECK(def.network.layers[2].gated);
  CHECK(def.network.layers[2].kind == CellKind::gru);
  CHECK(def.initial_lr == 0.005);
  CHECK(def.clip == 1.0);
  CHECK(def.network.dropout_p == 0.5);

  CHECK(KeyValueConfig::parse(cfg.to_text()).values() == cfg.values());
  CHECK_THROWS_AS(cfg.set("model.colour", "red"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign"), ConfigError);
  CHECK(parse_bool("yes"));
  CHECK_FALSE(parse_bool("0"));
  CHECK_THROWS_AS(parse_bool("maybe"), ConfigError);
}
