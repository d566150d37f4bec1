#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "eleatt/cells.hpp"
#include "eleatt/tensor.hpp"

namespace eleatt {

struct LayerSpec {
  CellKind kind = CellKind::gru;
  std::size_t hidden = 100;
  bool gated = true;
  GateActivation gate_activation = GateActivation::sigmoid;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class Readout { final_step, mean_over_time };

std::string_view to_string(Readout r);
Readout parse_readout(std::string_view name);

struct NetworkConfig {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::vector<LayerSpec> layers;
  double dropout_p = 0.5;
  Readout readout = Readout::final_step;

  /// `count` identical layers of one kind.
  static NetworkConfig stack(std::size_t input_dim, std::size_t num_classes, CellKind kind,
                             std::size_t count, std::size_t hidden, bool gated,
                             GateActivation mode = GateActivation::sigmoid);

  /// Throws ConfigError on zero layers, zero dims or a dropout outside [0, 1).
  void validate() const;
  /// Input dimension of layer l (the previous layer's width, or input_dim).
  std::size_t layer_input_dim(std::size_t l) const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Every trainable tensor of a network: recurrent layers then the FC head.
/// Gradients use the same type, so parameters and gradients share layout.
struct ParameterSet {
  std::vector<CellParams> layers;
  Tensor2 fc_w;  // K x N_last
  Tensor2 fc_b;  // K x 1

  std::vector<Tensor2*> tensors();
  std::vector<const Tensor2*> tensors() const;
  /// "layer0.W_xr", ..., "fc.W", "fc.b"
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;

  ParameterSet zeros_like() const;
};

using GradientSet = ParameterSet;

class Network {
 public:
  Network() = default;
  /// All-zero parameters with the configured shapes.
  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  const CellParams& layer(std::size_t l) const { return params_.layers.at(l); }
  std::size_t num_layers() const noexcept { return params_.layers.size(); }
  bool has_gated_layer() const;

 private:
  NetworkConfig config_;
  ParameterSet params_;
};

/// Parameters initialized per the cell policy; deterministic in seed.
Network build(const NetworkConfig& config, std::uint64_t seed);

}  // namespace eleatt
