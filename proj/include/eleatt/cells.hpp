#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eleatt/rng.hpp"
#include "eleatt/tensor.hpp"

namespace eleatt {

enum class CellKind { srnn, lstm, gru };
enum class GateActivation { sigmoid, softmax };

std::string_view to_string(CellKind kind);
std::string_view to_string(GateActivation mode);
CellKind parse_cell_kind(std::string_view name);
GateActivation parse_gate_activation(std::string_view name);

/// Number of x/h weight pairs a cell of this kind owns (srnn 1, gru 3, lstm 4).
std::size_t gate_count(CellKind kind);

/// Element-wise attention gate shared by all neurons of one block:
/// a = phi(W_xa x + W_ha h_prev + b_a), with a of the input's dimension.
struct GateParams {
  Tensor2 w_xa;  // D x D
  Tensor2 w_ha;  // D x N
  Tensor2 b_a;   // D x 1
  GateActivation activation = GateActivation::sigmoid;
};

/// Weights of one recurrent block. `w_x`, `w_h` and `b` are indexed by the
/// kind's gate order: srnn {h}; lstm {i, f, c, o}; gru {r, z, h}.
struct CellParams {
  CellKind kind = CellKind::gru;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<Tensor2> w_x;  // N x D each
  std::vector<Tensor2> w_h;  // N x N each
  std::vector<Tensor2> b;    // N x 1 each
  std::optional<GateParams> gate;

  bool gated() const noexcept { return gate.has_value(); }

  /// All zeros with the shapes implied by (kind, D, N, gated).
  static CellParams zeros(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                          bool gated, GateActivation mode = GateActivation::sigmoid);
  /// Matrices uniform on +-1/sqrt(fan_in), biases zero.
  static CellParams init(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                         bool gated, GateActivation mode, RngStream& rng);

  /// Canonical tensor order shared by gradients, optimizers and checkpoints.
  std::vector<Tensor2*> tensors();
  std::vector<const Tensor2*> tensors() const;
  /// Names matching tensors(), e.g. "W_xr", "b_z", "gate.W_xa".
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;
};

struct StepState {
  Tensor2 h;  // N x batch
  Tensor2 c;  // N x batch for LSTM, empty otherwise

  static StepState zeros(const CellParams& p, std::size_t batch);
};

/// Intermediates of one timestep, kept for backpropagation.
struct StepTrace {
  Tensor2 x;      // raw block input
  Tensor2 a;      // gate response (empty when ungated)
  Tensor2 x_eff;  // a (.) x, or x when ungated
  Tensor2 h_prev;
  Tensor2 c_prev;
  // srnn: {h}; lstm: {i, f, g, o}; gru: {r, z, h'}
  std::array<Tensor2, 4> acts;
  Tensor2 tanh_c;  // LSTM only
};

Tensor2 gate_forward(const Tensor2& x, const Tensor2& h_prev, const GateParams& g);
Tensor2 modulate(const Tensor2& x, const Tensor2& a);

StepState srnn_step(const Tensor2& x_eff, const StepState& s, const CellParams& p,
                    StepTrace* trace = nullptr);
StepState lstm_step(const Tensor2& x_eff, const StepState& s, const CellParams& p,
                    StepTrace* trace = nullptr);
StepState gru_step(const Tensor2& x_eff, const StepState& s, const CellParams& p,
                   StepTrace* trace = nullptr);

struct BlockOutput {
  StepState state;
  std::optional<Tensor2> attention;
};

/// Gate, modulation, then the kind-specific recurrence.
BlockOutput block_step(const Tensor2& x, const StepState& s, const CellParams& p,
                       StepTrace* trace = nullptr);

}  // namespace eleatt
