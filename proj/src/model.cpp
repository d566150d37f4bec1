#include "eleatt/model.hpp"

#include <cmath>

#include "eleatt/error.hpp"
#include "eleatt/rng.hpp"

namespace eleatt {

std::string_view to_string(Readout r) {
  return r == Readout::final_step ? "final_step" : "mean_over_time";
}

Readout parse_readout(std::string_view name) {
  if (name == "final_step") return Readout::final_step;
  if (name == "mean_over_time") return Readout::mean_over_time;
  throw ConfigError("unknown readout '" + std::string(name) + "'");
}

NetworkConfig NetworkConfig::stack(std::size_t input_dim, std::size_t num_classes, CellKind kind,
                                   std::size_t count, std::size_t hidden, bool gated,
                                   GateActivation mode) {
  NetworkConfig c;
  c.input_dim = input_dim;
  c.num_classes = num_classes;
  c.layers.assign(count, LayerSpec{kind, hidden, gated, mode});
  return c;
}

void NetworkConfig::validate() const {
  if (layers.empty()) throw ConfigError("network needs at least one recurrent layer");
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].hidden == 0) {
      throw ConfigError("layer " + std::to_string(l) + " has zero hidden units");
    }
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

std::size_t NetworkConfig::layer_input_dim(std::size_t l) const {
  return l == 0 ? input_dim : layers.at(l - 1).hidden;
}

std::vector<Tensor2*> ParameterSet::tensors() {
  std::vector<Tensor2*> out;
  for (auto& layer : layers) {
    auto t = layer.tensors();
    out.insert(out.end(), t.begin(), t.end());
  }
  out.push_back(&fc_w);
  out.push_back(&fc_b);
  return out;
}

std::vector<const Tensor2*> ParameterSet::tensors() const {
  auto mutable_view = const_cast<ParameterSet*>(this)->tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (auto& n : layers[l].tensor_names()) out.push_back("layer" + std::to_string(l) + "." + n);
  }
  out.emplace_back("fc.W");
  out.emplace_back("fc.b");
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor2* t : tensors()) n += t->size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out = *this;
  for (Tensor2* t : out.tensors()) t->fill(0.0);
  return out;
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t l = 0; l < config_.layers.size(); ++l) {
    const LayerSpec& s = config_.layers[l];
    params_.layers.push_back(CellParams::zeros(s.kind, config_.layer_input_dim(l), s.hidden,
                                               s.gated, s.gate_activation));
  }
  params_.fc_w = Tensor2(config_.num_classes, config_.layers.back().hidden);
  params_.fc_b = Tensor2(config_.num_classes, 1);
}

bool Network::has_gated_layer() const {
  for (const auto& l : params_.layers) {
    if (l.gated()) return true;
  }
  return false;
}

Network build(const NetworkConfig& config, std::uint64_t seed) {
  Network net(config);
  RngStream root(seed);
  for (std::size_t l = 0; l < config.layers.size(); ++l) {
    RngStream rng = root.derive("init.layer", l);
    const LayerSpec& s = config.layers[l];
    net.params().layers[l] = CellParams::init(s.kind, config.layer_input_dim(l), s.hidden,
                                              s.gated, s.gate_activation, rng);
  }
  RngStream fc_rng = root.derive("init.fc");
  const double bound = 1.0 / std::sqrt(static_cast<double>(net.params().fc_w.cols()));
  net.params().fc_w = rng_uniform(fc_rng, -bound, bound, net.params().fc_w.rows(),
                                  net.params().fc_w.cols());
  return net;
}

}  // namespace eleatt
