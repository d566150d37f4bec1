#include "eleatt/checkpoint.hpp"

#include <unordered_map>
#include <utility>

#include "binary_io.hpp"
#include "eleatt/error.hpp"

namespace eleatt {
namespace {

constexpr std::string_view kMagic = "ELEATT-CHECKPOINT";
constexpr std::string_view kHeaderEnd = "header_end";

struct DirectoryEntry {
  std::size_t rows;
  std::size_t cols;
  std::size_t offset;  // in doubles from the payload start
};

void line(std::string& out, const std::string& key, const std::string& value) {
  out += key;
  out += '=';
  out += value;
  out += '\n';
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const NetworkConfig& cfg = ckpt.model.config();
  std::string header(kMagic);
  header += '\n';
  line(header, "format_version", std::to_string(kCheckpointVersion));
  line(header, "seed", std::to_string(ckpt.seed));
  line(header, "config.input_dim", std::to_string(cfg.input_dim));
  line(header, "config.num_classes", std::to_string(cfg.num_classes));
  line(header, "config.dropout", io::format_double(cfg.dropout_p));
  line(header, "config.readout", std::string(to_string(cfg.readout)));
  line(header, "config.layer_count", std::to_string(cfg.layers.size()));
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    const std::string p = "config.layer." + std::to_string(l) + ".";
    line(header, p + "kind", std::string(to_string(cfg.layers[l].kind)));
    line(header, p + "hidden", std::to_string(cfg.layers[l].hidden));
    line(header, p + "gated", cfg.layers[l].gated ? "true" : "false");
    line(header, p + "gate_activation", std::string(to_string(cfg.layers[l].gate_activation)));
  }
  if (ckpt.optimizer) {
    line(header, "optimizer", "adam");
    line(header, "optimizer.step", std::to_string(ckpt.optimizer->step));
    line(header, "optimizer.beta1", io::format_double(ckpt.optimizer->beta1));
    line(header, "optimizer.beta2", io::format_double(ckpt.optimizer->beta2));
    line(header, "optimizer.epsilon", io::format_double(ckpt.optimizer->epsilon));
  }
  if (ckpt.schedule) {
    const LrSchedule& s = *ckpt.schedule;
    line(header, "schedule.lr", io::format_double(s.current_lr));
    line(header, "schedule.decay_factor", io::format_double(s.decay_factor));
    line(header, "schedule.floor", io::format_double(s.floor));
    line(header, "schedule.patience", std::to_string(s.patience));
    line(header, "schedule.best_train_acc", io::format_double(s.best_train_acc));
    line(header, "schedule.stale_epochs", std::to_string(s.stale_epochs));
  }
  for (const auto& [k, v] : ckpt.extra) {
    if (v.find('\n') != std::string::npos) throw ConfigError("checkpoint extra value contains newline");
    line(header, "extra." + k, v);
  }

  std::vector<std::pair<std::string, const Tensor2*>> tensors;
  const auto names = ckpt.model.params().names();
  const auto params = ckpt.model.params().tensors();
  for (std::size_t k = 0; k < names.size(); ++k) tensors.emplace_back(names[k], params[k]);
  if (ckpt.optimizer) {
    if (ckpt.optimizer->m.size() != names.size() || ckpt.optimizer->v.size() != names.size()) {
      throw ShapeError("save_checkpoint: optimizer state does not match the model");
    }
    for (std::size_t k = 0; k < names.size(); ++k) tensors.emplace_back("adam.m." + names[k], &ckpt.optimizer->m[k]);
    for (std::size_t k = 0; k < names.size(); ++k) tensors.emplace_back("adam.v." + names[k], &ckpt.optimizer->v[k]);
  }
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    line(header, "tensor", name + "," + std::to_string(t->rows()) + "," + std::to_string(t->cols()) +
                               "," + std::to_string(offset));
    offset += t->size();
  }
  header += kHeaderEnd;
  header += '\n';

  io::Bytes out;
  out.reserve(header.size() + offset * 8 + 4);
  io::put_text(out, header);
  for (const auto& [name, t] : tensors) {
    for (double v : t->values()) io::put_f64(out, v);
  }
  io::seal(out);
  io::write_file(path, out);
}

void save_checkpoint(const Network& model, const std::filesystem::path& path) {
  Checkpoint c;
  c.model = model;
  save_checkpoint(c, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string what = "checkpoint '" + path.string() + "'";
  const io::Bytes bytes = io::read_file(path);
  std::vector<io::HeaderLine> header;
  const std::size_t body = io::parse_header(bytes, bytes.size(), kMagic, kHeaderEnd, header, what);

  std::unordered_map<std::string, std::string> kv;
  std::unordered_map<std::string, DirectoryEntry> directory;
  Checkpoint ckpt;
  for (const auto& [key, value] : header) {
    if (key == "tensor") {
      const auto c1 = value.find(',');
      const auto c2 = value.find(',', c1 + 1);
      const auto c3 = value.find(',', c2 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos) {
        throw FormatError(what + ": malformed tensor entry");
      }
      const std::string_view v(value);
      directory[value.substr(0, c1)] = {io::parse_u64(v.substr(c1 + 1, c2 - c1 - 1)),
                                        io::parse_u64(v.substr(c2 + 1, c3 - c2 - 1)),
                                        io::parse_u64(v.substr(c3 + 1))};
    } else if (key.rfind("extra.", 0) == 0) {
      ckpt.extra[key.substr(6)] = value;
    } else {
      kv[key] = value;
    }
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(what + ": missing header key '" + key + "'");
    return it->second;
  };

  const std::uint64_t version = io::parse_u64(get("format_version"));
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t payload_end = io::unseal(bytes, what);

  NetworkConfig cfg;
  cfg.input_dim = io::parse_u64(get("config.input_dim"));
  cfg.num_classes = io::parse_u64(get("config.num_classes"));
  cfg.dropout_p = io::parse_double(get("config.dropout"));
  cfg.readout = parse_readout(get("config.readout"));
  const std::size_t layer_count = io::parse_u64(get("config.layer_count"));
  for (std::size_t l = 0; l < layer_count; ++l) {
    const std::string p = "config.layer." + std::to_string(l) + ".";
    LayerSpec s;
    s.kind = parse_cell_kind(get(p + "kind"));
    s.hidden = io::parse_u64(get(p + "hidden"));
    s.gated = get(p + "gated") == "true";
    s.gate_activation = parse_gate_activation(get(p + "gate_activation"));
    cfg.layers.push_back(s);
  }
  ckpt.model = Network(cfg);
  ckpt.seed = io::parse_u64(get("seed"));

  const std::size_t payload_doubles = (payload_end - body) / 8;
  if ((payload_end - body) % 8 != 0) throw FormatError(what + ": payload is not a whole number of doubles");
  auto fill = [&](const std::string& name, Tensor2& t) {
    auto it = directory.find(name);
    if (it == directory.end()) throw FormatError(what + ": missing tensor '" + name + "'");
    const DirectoryEntry& e = it->second;
    if (e.rows != t.rows() || e.cols != t.cols()) {
      throw FormatError(what + ": tensor '" + name + "' has shape [" + std::to_string(e.rows) + "x" +
                        std::to_string(e.cols) + "], config implies " + t.shape_string());
    }
    if (e.offset + t.size() > payload_doubles) throw IntegrityError(what + ": tensor '" + name + "' past end");
    const unsigned char* p = bytes.data() + body + 8 * e.offset;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = io::get_f64(p + 8 * i);
  };

  const auto names = ckpt.model.params().names();
  const auto params = ckpt.model.params().tensors();
  for (std::size_t k = 0; k < names.size(); ++k) fill(names[k], *params[k]);

  if (kv.count("optimizer")) {
    if (kv["optimizer"] != "adam") throw FormatError(what + ": unknown optimizer '" + kv["optimizer"] + "'");
    const auto cparams = std::as_const(ckpt.model).params().tensors();
    AdamState adam = AdamState::for_params(cparams);
    adam.step = io::parse_u64(get("optimizer.step"));
    adam.beta1 = io::parse_double(get("optimizer.beta1"));
    adam.beta2 = io::parse_double(get("optimizer.beta2"));
    adam.epsilon = io::parse_double(get("optimizer.epsilon"));
    for (std::size_t k = 0; k < names.size(); ++k) {
      fill("adam.m." + names[k], adam.m[k]);
      fill("adam.v." + names[k], adam.v[k]);
    }
    ckpt.optimizer = std::move(adam);
  }
  if (kv.count("schedule.lr")) {
    LrSchedule s;
    s.current_lr = io::parse_double(get("schedule.lr"));
    s.decay_factor = io::parse_double(get("schedule.decay_factor"));
    s.floor = io::parse_double(get("schedule.floor"));
    s.patience = io::parse_u64(get("schedule.patience"));
    s.best_train_acc = io::parse_double(get("schedule.best_train_acc"));
    s.stale_epochs = io::parse_u64(get("schedule.stale_epochs"));
    ckpt.schedule = s;
  }
  return ckpt;
}

}  // namespace eleatt
