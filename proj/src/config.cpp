#include "eleatt/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "eleatt/error.hpp"

namespace eleatt {
namespace {

const std::map<std::string, std::string, std::less<>>& aliases() {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"kind", "model.kind"},
      {"hidden", "model.hidden"},
      {"layers", "model.layers"},
      {"gated", "model.gated"},
      {"gate", "model.gate_activation"},
      {"dropout", "model.dropout"},
      {"readout", "model.readout"},
      {"epochs", "train.epochs"},
      {"batch", "train.batch_size"},
      {"batch-size", "train.batch_size"},
      {"lr", "train.lr"},
      {"clip", "train.clip"},
      {"seed", "train.seed"},
      {"augment", "train.augment"},
      {"center", "train.center"},
  };
  return table;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "data.dir",           "model.kind",         "model.hidden",          "model.layers",
      "model.gated",        "model.gate_activation", "model.dropout",     "model.readout",
      "train.epochs",       "train.batch_size",   "train.lr",              "train.clip",
      "train.clip_mode",    "train.seed",         "train.augment",         "train.augment_degrees",
      "train.center",       "train.eval_every",   "train.lr_patience",     "train.lr_floor",
      "train.early_stop_patience", "train.val_fraction", "log.wall_time",
  };
  return keys;
}

bool is_layer_key(const std::string& key) {
  // model.layer.<index>.<field>
  constexpr std::string_view prefix = "model.layer.";
  if (key.rfind(prefix, 0) != 0) return false;
  const std::string rest = key.substr(prefix.size());
  const auto dot = rest.find('.');
  if (dot == std::string::npos || dot == 0) return false;
  for (std::size_t i = 0; i < dot; ++i) {
    if (rest[i] < '0' || rest[i] > '9') return false;
  }
  const std::string field = rest.substr(dot + 1);
  return field == "kind" || field == "hidden" || field == "gated" || field == "gate_activation";
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

bool parse_bool(std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("expected a boolean, got '" + std::string(text) + "'");
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& origin) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

KeyValueConfig KeyValueConfig::defaults() {
  return parse(
      "model.kind=gru\n"
      "model.hidden=16\n"
      "model.layers=3\n"
      "model.gated=true\n"
      "model.gate_activation=sigmoid\n"
      "model.dropout=0.5\n"
      "model.readout=final_step\n"
      "train.epochs=30\n"
      "train.batch_size=32\n"
      "train.lr=0.005\n"
      "train.clip=1\n"
      "train.clip_mode=elementwise\n"
      "train.seed=1\n"
      "train.augment=false\n"
      "train.augment_degrees=35\n"
      "train.center=false\n"
      "train.eval_every=1\n"
      "train.lr_patience=1\n"
      "train.lr_floor=1e-6\n"
      "train.early_stop_patience=5\n"
      "train.val_fraction=0.1\n"
      "log.wall_time=false\n",
      "defaults");
}

void KeyValueConfig::set(std::string key, std::string value) {
  if (auto it = aliases().find(key); it != aliases().end()) key = it->second;
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end() && !is_layer_key(key)) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  values_[std::move(key)] = std::move(value);
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const {
  try {
    return io::parse_u64(get(key));
  } catch (const FormatError&) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + get(key) + "'");
  }
}

double KeyValueConfig::get_double(const std::string& key) const {
  try {
    return io::parse_double(get(key));
  } catch (const FormatError&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + get(key) + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  try {
    return parse_bool(get(key));
  } catch (const ConfigError&) {
    throw ConfigError("config key '" + key + "' expects true/false, got '" + get(key) + "'");
  }
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

TrainConfig resolve_train_config(const KeyValueConfig& config, std::size_t input_dim,
                                 std::size_t num_classes) {
  KeyValueConfig cfg = KeyValueConfig::defaults();
  cfg.merge(config);

  TrainConfig tc;
  const std::size_t count = cfg.get_u64("model.layers");
  if (count == 0) throw ConfigError("model.layers must be positive");
  const CellKind kind = parse_cell_kind(cfg.get("model.kind"));
  const std::size_t hidden = cfg.get_u64("model.hidden");
  const bool gated = cfg.get_bool("model.gated");
  const GateActivation activation = parse_gate_activation(cfg.get("model.gate_activation"));
  tc.network = NetworkConfig::stack(input_dim, num_classes, kind, count, hidden, gated, activation);
  for (std::size_t l = 0; l < count; ++l) {
    const std::string p = "model.layer." + std::to_string(l) + ".";
    LayerSpec& spec = tc.network.layers[l];
    if (cfg.has(p + "kind")) spec.kind = parse_cell_kind(cfg.get(p + "kind"));
    if (cfg.has(p + "hidden")) spec.hidden = cfg.get_u64(p + "hidden");
    if (cfg.has(p + "gated")) spec.gated = cfg.get_bool(p + "gated");
    if (cfg.has(p + "gate_activation")) {
      spec.gate_activation = parse_gate_activation(cfg.get(p + "gate_activation"));
    }
  }
  for (const auto& [k, v] : cfg.values()) {
    if (is_layer_key(k)) {
      const std::size_t index = io::parse_u64(k.substr(12, k.find('.', 12) - 12));
      if (index >= count) throw ConfigError("config key '" + k + "' refers to a layer past model.layers");
    }
  }
  tc.network.dropout_p = cfg.get_double("model.dropout");
  tc.network.readout = parse_readout(cfg.get("model.readout"));

  tc.epochs = cfg.get_u64("train.epochs");
  tc.batch_size = cfg.get_u64("train.batch_size");
  tc.initial_lr = cfg.get_double("train.lr");
  tc.clip = cfg.get_double("train.clip");
  const std::string& mode = cfg.get("train.clip_mode");
  if (mode == "elementwise") {
    tc.clip_mode = ClipMode::elementwise;
  } else if (mode == "global_norm") {
    tc.clip_mode = ClipMode::global_norm;
  } else {
    throw ConfigError("train.clip_mode must be elementwise or global_norm");
  }
  tc.seed = cfg.get_u64("train.seed");
  tc.augment = cfg.get_bool("train.augment");
  tc.augment_degrees = cfg.get_double("train.augment_degrees");
  tc.center = cfg.get_bool("train.center");
  tc.eval_every = cfg.get_u64("train.eval_every");
  tc.lr_patience = cfg.get_u64("train.lr_patience");
  tc.lr_floor = cfg.get_double("train.lr_floor");
  tc.early_stop_patience = cfg.get_u64("train.early_stop_patience");
  tc.val_fraction = cfg.get_double("train.val_fraction");
  tc.validate();
  return tc;
}

}  // namespace eleatt
