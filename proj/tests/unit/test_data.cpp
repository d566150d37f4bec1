#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "binary_io.hpp"
#include "eleatt/data.hpp"
#include "eleatt/error.hpp"

using namespace eleatt;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eleatt_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DistractorTaskSpec small_spec() {
  DistractorTaskSpec s;
  s.train_count = 30;
  s.val_count = 6;
  s.test_count = 12;
  return s;
}

SkeletonSequence random_skeleton(RngStream& rng, std::size_t joints, std::size_t frames) {
  return SkeletonSequence::from_tensor(rng_uniform(rng, -3, 3, 3 * joints, frames));
}

double distance(const SkeletonSequence& s, std::size_t a, std::size_t b, std::size_t t) {
  const auto p = s.joint(a, t), q = s.joint(b, t);
  return std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
}

}  // namespace

TEST_CASE("gen_distractor") {
  const DistractorTaskSpec spec = small_spec();
  const Dataset a = gen_distractor(spec);
  const Dataset b = gen_distractor(spec);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(dataset_hash(a) == dataset_hash(b));
  DistractorTaskSpec other = spec;
  other.seed = 2;
  CHECK(dataset_hash(gen_distractor(other)) != dataset_hash(a));

  CHECK(a.train.size() == 30);
  CHECK(a.val.size() == 6);
  CHECK(a.test.size() == 12);
  CHECK(a.train.informative.size() == 4);
  for (const auto* split : {&a.train, &a.val, &a.test}) {
    split->validate();
    for (const Tensor2& x : split->inputs) {
      CHECK(x.rows() == 20);
      CHECK(x.cols() >= 10);
      CHECK(x.cols() <= 20);
    }
  }
  // Splits are disjoint: no sequence appears twice.
  for (const Tensor2& x : a.train.inputs)
    for (const Tensor2& y : a.test.inputs) CHECK_FALSE(x == y);

  DistractorTaskSpec bad = spec;
  bad.informative = 20;
  CHECK_THROWS_AS(gen_distractor(bad), ConfigError);
  bad.informative = 21;
  CHECK_THROWS_AS(gen_distractor(bad), ConfigError);

  DistractorTaskSpec decoy = spec;
  decoy.style = DistractorStyle::decoy;
  CHECK(gen_distractor(decoy).train.size() == 30);
  CHECK(parse_distractor_style("decoy") == DistractorStyle::decoy);
}

TEST_CASE("distractor elements carry no class signal") {
  DistractorTaskSpec spec;
  spec.train_count = 600;
  const Dataset d = gen_distractor(spec);
  std::vector<bool> informative(spec.dims, false);
  for (std::size_t i : d.train.informative) informative[i] = true;
  // Per-class mean of each distractor element is near zero relative to its scale.
  for (std::size_t e = 0; e < spec.dims; ++e) {
    if (informative[e]) continue;
    for (std::uint32_t k = 0; k < spec.classes; ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < d.train.size(); ++i) {
        if (d.train.labels[i] != k) continue;
        for (double v : d.train.inputs[i].row(e)) sum += v;
        n += d.train.inputs[i].cols();
      }
      CHECK(std::abs(sum / static_cast<double>(n)) < 0.1 * spec.noise);
    }
  }
}

TEST_CASE("permute_labels keeps the label multiset") {
  const Dataset d = gen_distractor(small_spec());
  const SequenceBatch p = permute_labels(d.train, 3);
  CHECK(p.inputs == d.train.inputs);
  auto l1 = p.labels, l2 = d.train.labels;
  std::sort(l1.begin(), l1.end());
  std::sort(l2.begin(), l2.end());
  CHECK(l1 == l2);
  CHECK_FALSE(p.labels == d.train.labels);
}

TEST_CASE("first-frame centering") {
  RngStream rng(1);
  const SkeletonSequence s = random_skeleton(rng, 5, 7);
  const SkeletonSequence c = center_first_frame(s);
  std::array<double, 3> mean{0, 0, 0};
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t k = 0; k < 3; ++k) mean[k] += c.joint(j, 0)[k] / 5.0;
  for (double m : mean) CHECK(std::abs(m) < 1e-12);
  CHECK(max_abs_diff(center_first_frame(c).frames, c.frames) < 1e-12);

  SkeletonSequence shifted = s;
  for (std::size_t r = 0; r < 15; ++r)
    for (std::size_t t = 0; t < 7; ++t) shifted.frames(r, t) += (r % 3 == 0 ? 4.0 : r % 3 == 1 ? -1.5 : 10.0);
  CHECK(max_abs_diff(center_first_frame(shifted).frames, c.frames) < 1e-12);

  const SkeletonSequence by_joint = center_first_frame(s, CenterRule{2});
  for (double v : by_joint.joint(2, 0)) CHECK(v == 0.0);
  CHECK_THROWS_AS(center_first_frame(s, CenterRule{9}), ConfigError);
  CHECK_THROWS_AS(SkeletonSequence::from_tensor(Tensor2(4, 2)), ShapeError);
}

TEST_CASE("rotation augmentation") {
  RngStream rng(2);
  const Rotation id = rotation_xyz(0, 0, 0);
  const SkeletonSequence s = random_skeleton(rng, 6, 5);
  CHECK(max_abs_diff(apply_rotation(s, id).frames, s.frames) == 0.0);

  for (int draw = 0; draw < 100; ++draw) {
    const double lim = 35.0 * std::numbers::pi / 180.0;
    const Rotation r = rotation_xyz(rng.uniform(-lim, lim), rng.uniform(-lim, lim), rng.uniform(-lim, lim));
    CHECK(std::abs(determinant(r) - 1.0) < 1e-12);
  }

  RngStream aug(4);
  for (int rep = 0; rep < 20; ++rep) {
    const SkeletonSequence r = rotate_augment(s, aug);
    for (std::size_t t = 0; t < s.length(); ++t)
      for (std::size_t a = 0; a < s.joints(); ++a)
        for (std::size_t b = a + 1; b < s.joints(); ++b)
          CHECK(std::abs(distance(r, a, b, t) - distance(s, a, b, t)) < 1e-9);
  }

  // A single-axis rotation: (1,0,0) about z by 90 degrees goes to (0,1,0).
  const Rotation rz = rotation_xyz(0, 0, std::numbers::pi / 2);
  const SkeletonSequence unit = SkeletonSequence::from_tensor(Tensor2::column({1, 0, 0}));
  const auto p = apply_rotation(unit, rz).joint(0, 0);
  CHECK(std::abs(p[0]) < 1e-15);
  CHECK(std::abs(p[1] - 1.0) < 1e-15);
}

TEST_CASE("dataset files") {
  const fs::path dir = temp_dir("data");
  const Dataset d = gen_distractor(small_spec());
  save_dataset(d.train, dir / "train.eds");
  const SequenceBatch back = load_dataset(dir / "train.eds");
  CHECK(back.labels == d.train.labels);
  CHECK(back.informative == d.train.informative);
  // Payload is float32: round trip is exact for float-representable values.
  for (std::size_t i = 0; i < back.size(); ++i)
    for (std::size_t k = 0; k < back.inputs[i].size(); ++k)
      CHECK(back.inputs[i][k] == static_cast<double>(static_cast<float>(d.train.inputs[i][k])));
  save_dataset(back, dir / "again.eds");
  CHECK(io::read_file(dir / "train.eds") == io::read_file(dir / "again.eds"));
  CHECK(load_dataset(dir / "again.eds") == back);

  save_splits(d, dir / "splits");
  const Dataset loaded = load_splits(dir / "splits");
  CHECK(loaded.test.size() == d.test.size());

  const io::Bytes good = io::read_file(dir / "train.eds");
  io::Bytes flipped = good;
  flipped[flipped.size() / 2] ^= 1;
  io::write_file(dir / "flip.eds", flipped);
  CHECK_THROWS_AS(load_dataset(dir / "flip.eds"), IntegrityError);
  io::write_file(dir / "cut.eds", io::Bytes(good.begin(), good.begin() + good.size() / 2));
  CHECK_THROWS_AS(load_dataset(dir / "cut.eds"), IntegrityError);

  std::string text(good.begin(), good.end() - 4);
  const auto pos = text.find("version=1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 9, "version=7");
  io::Bytes bumped(text.begin(), text.end());
  io::seal(bumped);
  io::write_file(dir / "ver.eds", bumped);
  CHECK_THROWS_AS(load_dataset(dir / "ver.eds"), FormatError);

  SequenceBatch empty;
  empty.dims = 3;
  empty.classes = 2;
  CHECK_THROWS(save_dataset(empty, dir / "empty.eds"));
}
