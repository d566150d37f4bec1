#include "eleatt/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binary_io.hpp"
#include "eleatt/error.hpp"

namespace eleatt {

namespace {

constexpr std::string_view kDatasetMagic = "ELEATT-DATASET";
constexpr std::string_view kHeaderEnd = "end";
constexpr std::uint64_t kDatasetVersion = 1;

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

// Evenly spaced levels in [lo, hi] for `k` classes, shuffled per element so
// no single element orders the classes the same way as another.
std::vector<double> class_levels(RngStream& rng, std::size_t k, double lo, double hi) {
  std::vector<double> levels(k);
  for (std::size_t c = 0; c < k; ++c) {
    levels[c] = k == 1 ? lo : lo + (hi - lo) * static_cast<double>(c) / static_cast<double>(k - 1);
  }
  const auto perm = rng.permutation(k);
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) out[c] = levels[perm[c]];
  return out;
}

struct ClassTemplates {
  // [element][class]
  std::vector<std::vector<double>> frequency;
  std::vector<std::vector<double>> drift;
};

SequenceBatch make_split(const DistractorTaskSpec& spec, const std::vector<std::size_t>& informative,
                         const ClassTemplates& tpl, std::size_t count, RngStream rng) {
  SequenceBatch out;
  out.dims = spec.dims;
  out.classes = spec.classes;
  out.informative = informative;
  std::vector<std::uint32_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<std::uint32_t>(i % spec.classes);
  const auto order = rng.permutation(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t label = labels[order[i]];
    const std::size_t len =
        spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
    Tensor2 seq(spec.dims, len);
    for (std::size_t d = 0; d < spec.dims; ++d) {
      if (spec.style == DistractorStyle::white) {
        for (std::size_t t = 0; t < len; ++t) seq(d, t) = spec.noise * rng.normal();
      } else if (d % 2 == 0) {
        const double omega = rng.uniform(0.25, 1.25);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double amp = spec.noise * rng.uniform(0.8, 1.2);
        for (std::size_t t = 0; t < len; ++t) {
          seq(d, t) = amp * std::sin(omega * static_cast<double>(t) + phase) +
                      spec.signal_noise * rng.normal();
        }
      } else {
        const double drift = rng.uniform(-0.12, 0.12);
        double level = rng.uniform(-0.5, 0.5);
        for (std::size_t t = 0; t < len; ++t) {
          level += drift + 0.5 * spec.signal_noise * rng.normal();
          seq(d, t) = spec.noise * level;
        }
      }
    }
    for (std::size_t s = 0; s < informative.size(); ++s) {
      const std::size_t d = informative[s];
      if (s % 2 == 0) {
        // Class-specific frequency, random phase and amplitude per sequence.
        const double omega = tpl.frequency[s][label];
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double amp = rng.uniform(0.8, 1.2);
        for (std::size_t t = 0; t < len; ++t) {
          seq(d, t) = amp * std::sin(omega * static_cast<double>(t) + phase) +
                      spec.signal_noise * rng.normal();
        }
      } else {
        // Random walk with class-specific drift.
        double level = rng.uniform(-0.5, 0.5);
        for (std::size_t t = 0; t < len; ++t) {
          level += tpl.drift[s][label] + 0.5 * spec.signal_noise * rng.normal();
          seq(d, t) = level;
        }
      }
    }
    for (double& v : seq.values()) v = to_float_precision(v);
    out.inputs.push_back(std::move(seq));
    out.labels.push_back(label);
  }
  return out;
}

io::Bytes serialize(const SequenceBatch& batch) {
  if (batch.empty()) throw ConfigError("save_dataset: empty dataset");
  batch.validate();
  io::Bytes out;
  std::string header(kDatasetMagic);
  header += "\nversion=" + std::to_string(kDatasetVersion);
  header += "\ndims=" + std::to_string(batch.dims);
  header += "\nclasses=" + std::to_string(batch.classes);
  header += "\ncount=" + std::to_string(batch.size());
  header += "\ninformative=";
  for (std::size_t i = 0; i < batch.informative.size(); ++i) {
    if (i) header += ',';
    header += std::to_string(batch.informative[i]);
  }
  header += "\n";
  header += kHeaderEnd;
  header += "\n";
  io::put_text(out, header);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor2& seq = batch.inputs[i];
    io::put_u32(out, batch.labels[i]);
    io::put_u32(out, static_cast<std::uint32_t>(seq.cols()));
    for (std::size_t t = 0; t < seq.cols(); ++t) {
      for (std::size_t d = 0; d < seq.rows(); ++d) io::put_f32(out, static_cast<float>(seq(d, t)));
    }
  }
  io::seal(out);
  return out;
}

}  // namespace

std::vector<std::size_t> SequenceBatch::lengths() const {
  std::vector<std::size_t> out;
  out.reserve(inputs.size());
  for (const auto& s : inputs) out.push_back(s.cols());
  return out;
}

std::size_t SequenceBatch::max_length() const {
  std::size_t m = 0;
  for (const auto& s : inputs) m = std::max(m, s.cols());
  return m;
}

void SequenceBatch::validate() const {
  if (labels.size() != inputs.size()) {
    throw ShapeError("SequenceBatch: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(inputs.size()) + " sequences");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].rows() != dims) {
      throw ShapeError("SequenceBatch: sequence " + std::to_string(i) + " is " +
                       inputs[i].shape_string() + " but D=" + std::to_string(dims));
    }
    if (inputs[i].cols() == 0) throw ConfigError("SequenceBatch: empty sequence " + std::to_string(i));
    if (labels[i] >= classes) throw ConfigError("SequenceBatch: label out of range");
  }
}

SequenceBatch SequenceBatch::subset(std::span<const std::size_t> indices) const {
  SequenceBatch out;
  out.dims = dims;
  out.classes = classes;
  out.informative = informative;
  for (std::size_t i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

std::vector<Tensor2> SequenceBatch::padded_steps() const {
  const std::size_t T = max_length();
  std::vector<Tensor2> steps(T, Tensor2(dims, inputs.size()));
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const Tensor2& seq = inputs[j];
    for (std::size_t t = 0; t < seq.cols(); ++t) {
      for (std::size_t d = 0; d < dims; ++d) steps[t](d, j) = seq(d, t);
    }
  }
  return steps;
}

std::string_view to_string(DistractorStyle style) {
  return style == DistractorStyle::white ? "white" : "decoy";
}

DistractorStyle parse_distractor_style(std::string_view name) {
  if (name == "white") return DistractorStyle::white;
  if (name == "decoy") return DistractorStyle::decoy;
  throw ConfigError("unknown distractor style '" + std::string(name) + "' (white, decoy)");
}

void DistractorTaskSpec::validate() const {
  if (dims == 0) throw ConfigError("distractor task: dims must be positive");
  if (informative == 0 || informative >= dims) {
    throw ConfigError("distractor task: need 0 < informative < dims (got informative=" +
                      std::to_string(informative) + ", dims=" + std::to_string(dims) + ")");
  }
  if (classes < 2) throw ConfigError("distractor task: need at least 2 classes");
  if (min_length == 0 || min_length > max_length) throw ConfigError("distractor task: bad length range");
  if (!(noise >= 0.0) || !(signal_noise >= 0.0)) throw ConfigError("distractor task: negative noise");
  if (train_count == 0 || test_count == 0) throw ConfigError("distractor task: empty split");
}

Dataset gen_distractor(const DistractorTaskSpec& spec) {
  spec.validate();
  RngStream root(spec.seed);
  RngStream layout = root.derive("layout");
  auto perm = layout.permutation(spec.dims);
  std::vector<std::size_t> informative(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(spec.informative));
  std::sort(informative.begin(), informative.end());

  ClassTemplates tpl;
  for (std::size_t s = 0; s < spec.informative; ++s) {
    tpl.frequency.push_back(class_levels(layout, spec.classes, 0.25, 1.25));
    tpl.drift.push_back(class_levels(layout, spec.classes, -0.12, 0.12));
  }

  Dataset data;
  data.train = make_split(spec, informative, tpl, spec.train_count, root.derive("split.train"));
  if (spec.val_count > 0) {
    data.val = make_split(spec, informative, tpl, spec.val_count, root.derive("split.val"));
  } else {
    data.val.dims = spec.dims;
    data.val.classes = spec.classes;
  }
  data.test = make_split(spec, informative, tpl, spec.test_count, root.derive("split.test"));
  return data;
}

SequenceBatch permute_labels(const SequenceBatch& batch, std::uint64_t seed) {
  RngStream rng = RngStream(seed).derive("permute_labels");
  const auto perm = rng.permutation(batch.size());
  SequenceBatch out = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) out.labels[i] = batch.labels[perm[i]];
  return out;
}

std::array<double, 3> SkeletonSequence::joint(std::size_t j, std::size_t t) const {
  return {frames(3 * j, t), frames(3 * j + 1, t), frames(3 * j + 2, t)};
}

SkeletonSequence SkeletonSequence::from_tensor(Tensor2 frames) {
  if (frames.rows() == 0 || frames.rows() % 3 != 0) {
    throw ShapeError("skeleton input dimension " + std::to_string(frames.rows()) +
                     " is not a positive multiple of 3");
  }
  return SkeletonSequence{std::move(frames)};
}

SkeletonSequence center_first_frame(const SkeletonSequence& seq, CenterRule rule) {
  if (seq.length() == 0) throw ConfigError("center_first_frame: empty sequence");
  std::array<double, 3> center{0.0, 0.0, 0.0};
  if (rule.joint) {
    if (*rule.joint >= seq.joints()) throw ConfigError("center_first_frame: joint index out of range");
    center = seq.joint(*rule.joint, 0);
  } else {
    for (std::size_t j = 0; j < seq.joints(); ++j) {
      for (std::size_t k = 0; k < 3; ++k) center[k] += seq.frames(3 * j + k, 0);
    }
    for (double& c : center) c /= static_cast<double>(seq.joints());
  }
  SkeletonSequence out = seq;
  for (std::size_t r = 0; r < out.frames.rows(); ++r) {
    for (std::size_t t = 0; t < out.length(); ++t) out.frames(r, t) -= center[r % 3];
  }
  return out;
}

Rotation rotation_xyz(double ax, double ay, double az) {
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  const Rotation rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Rotation ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Rotation rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  auto mul = [](const Rotation& a, const Rotation& b) {
    Rotation c{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
      }
    }
    return c;
  };
  return mul(mul(rx, ry), rz);
}

SkeletonSequence apply_rotation(const SkeletonSequence& seq, const Rotation& r) {
  SkeletonSequence out = seq;
  for (std::size_t j = 0; j < seq.joints(); ++j) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const auto p = seq.joint(j, t);
      for (std::size_t i = 0; i < 3; ++i) {
        out.frames(3 * j + i, t) = r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2];
      }
    }
  }
  return out;
}

SkeletonSequence rotate_augment(const SkeletonSequence& seq, RngStream& stream, double max_degrees) {
  const double limit = max_degrees * std::numbers::pi / 180.0;
  const double ax = stream.uniform(-limit, limit);
  const double ay = stream.uniform(-limit, limit);
  const double az = stream.uniform(-limit, limit);
  return apply_rotation(seq, rotation_xyz(ax, ay, az));
}

double determinant(const Rotation& r) {
  return r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
         r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
         r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
}

void save_dataset(const SequenceBatch& batch, const std::filesystem::path& path) {
  io::write_file(path, serialize(batch));
}

SequenceBatch load_dataset(const std::filesystem::path& path) {
  const std::string what = "dataset '" + path.string() + "'";
  const io::Bytes bytes = io::read_file(path);
  std::vector<io::HeaderLine> header;
  const std::size_t body = io::parse_header(bytes, bytes.size(), kDatasetMagic, kHeaderEnd, header, what);

  SequenceBatch out;
  std::size_t count = 0;
  bool have_version = false;
  for (const auto& [key, value] : header) {
    if (key == "version") {
      if (io::parse_u64(value) != kDatasetVersion) {
        throw FormatError(what + ": unsupported version " + value);
      }
      have_version = true;
    } else if (key == "dims") {
      out.dims = io::parse_u64(value);
    } else if (key == "classes") {
      out.classes = io::parse_u64(value);
    } else if (key == "count") {
      count = io::parse_u64(value);
    } else if (key == "informative") {
      std::size_t start = 0;
      while (start < value.size()) {
        const auto comma = value.find(',', start);
        const auto end = comma == std::string::npos ? value.size() : comma;
        out.informative.push_back(io::parse_u64(std::string_view(value).substr(start, end - start)));
        start = end + 1;
      }
    }
  }
  if (!have_version) throw FormatError(what + ": missing version");
  if (count == 0) throw FormatError(what + ": empty dataset");
  if (out.dims == 0 || out.classes == 0) throw FormatError(what + ": missing dims/classes");

  const std::size_t payload = io::unseal(bytes, what);
  std::size_t pos = body;
  for (std::size_t i = 0; i < count; ++i) {
    if (pos + 8 > payload) throw IntegrityError(what + ": truncated payload");
    const std::uint32_t label = io::get_u32(bytes.data() + pos);
    const std::uint32_t len = io::get_u32(bytes.data() + pos + 4);
    pos += 8;
    const std::size_t n = static_cast<std::size_t>(len) * out.dims;
    if (pos + 4 * n > payload) throw IntegrityError(what + ": truncated payload");
    Tensor2 seq(out.dims, len);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t d = 0; d < out.dims; ++d, pos += 4) seq(d, t) = io::get_f32(bytes.data() + pos);
    }
    out.inputs.push_back(std::move(seq));
    out.labels.push_back(label);
  }
  if (pos != payload) throw FormatError(what + ": trailing bytes after the last sequence");
  out.validate();
  return out;
}

void save_splits(const Dataset& data, const std::filesystem::path& dir) {
  save_dataset(data.train, dir / "train.eds");
  if (!data.val.empty()) save_dataset(data.val, dir / "val.eds");
  save_dataset(data.test, dir / "test.eds");
}

Dataset load_splits(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "train.eds")) {
    throw std::runtime_error("missing dataset: '" + (dir / "train.eds").string() + "' not found");
  }
  Dataset data;
  data.train = load_dataset(dir / "train.eds");
  if (std::filesystem::exists(dir / "val.eds")) {
    data.val = load_dataset(dir / "val.eds");
  } else {
    data.val.dims = data.train.dims;
    data.val.classes = data.train.classes;
  }
  if (std::filesystem::exists(dir / "test.eds")) data.test = load_dataset(dir / "test.eds");
  return data;
}

std::uint64_t dataset_hash(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const SequenceBatch* split : {&data.train, &data.val, &data.test}) {
    if (split->empty()) continue;
    const io::Bytes bytes = serialize(*split);
    h = io::fnv1a64(bytes.data(), bytes.size(), h);
  }
  return h;
}

}  // namespace eleatt
