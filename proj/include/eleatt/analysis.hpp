#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eleatt/data.hpp"
#include "eleatt/model.hpp"

namespace eleatt {

// Closed forms, per block of N neurons fed a D-dimensional input. FLOPs are
// per timestep and per sequence: one multiply or one add is one FLOP and
// activation functions are not counted.
std::size_t block_param_count(CellKind kind, std::size_t input_dim, std::size_t hidden);
std::size_t gate_param_count(std::size_t input_dim, std::size_t hidden);
std::size_t fc_param_count(std::size_t hidden, std::size_t classes);
std::size_t block_flops(CellKind kind, std::size_t input_dim, std::size_t hidden);
std::size_t gate_multiplies(std::size_t input_dim, std::size_t hidden);
std::size_t gate_additions(std::size_t input_dim, std::size_t hidden);
std::size_t fc_flops(std::size_t hidden, std::size_t classes);

struct LayerCost {
  CellKind kind = CellKind::gru;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  bool gated = false;
  std::size_t block_params = 0;       // formula, without gate
  std::size_t gate_params = 0;        // formula, 0 when ungated
  std::size_t enumerated_params = 0;  // sum of actual tensor sizes
  std::size_t block_flops = 0;
  std::size_t gate_multiplies = 0;
  std::size_t gate_additions = 0;

  std::size_t params() const noexcept { return block_params + gate_params; }
  std::size_t flops() const noexcept { return block_flops + gate_multiplies + gate_additions; }
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::size_t fc_params = 0;
  std::size_t enumerated_fc_params = 0;
  std::size_t fc_flops = 0;

  std::size_t total_params() const;
  std::size_t enumerated_total_params() const;
  /// Recurrent FLOPs for one timestep of one sequence (FC excluded).
  std::size_t flops_per_step() const;

  /// Aligned table; formula and enumeration side by side.
  std::string to_table() const;
  std::string to_json() const;
};

CostReport count_params(const NetworkConfig& config);
CostReport count_flops(const NetworkConfig& config);

/// Gate responses recorded in eval mode. `responses[k][t]` and `inputs[k][t]`
/// are D x batch for gated layer `layers[k]`; steps at or past a sequence's
/// length are padding.
struct AttentionTrace {
  std::vector<std::size_t> layers;
  std::vector<std::vector<Tensor2>> responses;
  std::vector<std::vector<Tensor2>> inputs;
  std::vector<std::size_t> lengths;
};

/// Records a_t for each requested layer (all gated layers when empty).
/// Throws ConfigError if the model has no gated layer or a requested layer is ungated.
AttentionTrace extract_attention(const Network& model, const SequenceBatch& batch,
                                 std::vector<std::size_t> layers = {});

enum class StaticModulation {
  energy_ratio,  // mean |a x| / mean |x|
  rms_ratio,     // sqrt(mean (a x)^2 / mean x^2)
  mean_response  // mean a
};

struct RelativeAttention {
  std::size_t layer = 0;
  std::vector<double> static_modulation;  // per element; NaN when undefined
  std::vector<std::size_t> undefined;     // elements with zero input energy
  std::vector<Tensor2> relative;          // [t] D x batch, NaN at padding/undefined
  std::vector<double> element_mean;       // mean relative response per element
  std::vector<double> joint_score;        // sum of x/y/z element means; empty unless D % 3 == 0
};

RelativeAttention relative_attention(const AttentionTrace& trace, std::size_t trace_layer = 0,
                                     StaticModulation mode = StaticModulation::energy_ratio);

/// Mean of `element_mean` over `elements` (undefined elements skipped).
double mean_over(const RelativeAttention& rel, const std::vector<std::size_t>& elements);

/// Per-element rows (sequence, t, element, a, relative) for valid steps.
std::string attention_csv(const AttentionTrace& trace, const RelativeAttention& rel,
                          std::size_t trace_layer = 0);
std::string attention_json(const RelativeAttention& rel);

}  // namespace eleatt
