#include "eleatt/cells.hpp"

#include <cmath>

#include "eleatt/error.hpp"

namespace eleatt {
namespace {

constexpr std::array<const char*, 1> kSrnnNames{"h"};
constexpr std::array<const char*, 4> kLstmNames{"i", "f", "c", "o"};
constexpr std::array<const char*, 3> kGruNames{"r", "z", "h"};

const char* gate_suffix(CellKind kind, std::size_t g) {
  switch (kind) {
    case CellKind::srnn: return kSrnnNames[g];
    case CellKind::lstm: return kLstmNames[g];
    case CellKind::gru: return kGruNames[g];
  }
  return "?";
}

void require_kind(const CellParams& p, CellKind kind, const char* op) {
  if (p.kind != kind) {
    throw ConfigError(std::string(op) + ": cell is " + std::string(to_string(p.kind)));
  }
}

void check_inputs(const char* op, const Tensor2& x, const StepState& s, const CellParams& p) {
  if (x.rows() != p.input_dim) {
    throw ShapeError(std::string(op) + ": input " + x.shape_string() + " but D=" +
                     std::to_string(p.input_dim));
  }
  if (s.h.rows() != p.hidden_dim || s.h.cols() != x.cols()) {
    throw ShapeError(std::string(op) + ": state " + s.h.shape_string() + " vs input " +
                     x.shape_string() + " and N=" + std::to_string(p.hidden_dim));
  }
}

// W_x x + W_h h + b for gate index g.
Tensor2 preactivation(const CellParams& p, std::size_t g, const Tensor2& x, const Tensor2& h) {
  return add_bias(add(matmul(p.w_x[g], x), matmul(p.w_h[g], h)), p.b[g]);
}

Tensor2 uniform_fan_in(RngStream& rng, std::size_t rows, std::size_t cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  return rng_uniform(rng, -bound, bound, rows, cols);
}

}  // namespace

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::srnn: return "srnn";
    case CellKind::lstm: return "lstm";
    case CellKind::gru: return "gru";
  }
  return "?";
}

std::string_view to_string(GateActivation mode) {
  return mode == GateActivation::sigmoid ? "sigmoid" : "softmax";
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "srnn" || name == "rnn") return CellKind::srnn;
  if (name == "lstm") return CellKind::lstm;
  if (name == "gru") return CellKind::gru;
  throw ConfigError("unknown cell kind '" + std::string(name) + "'");
}

GateActivation parse_gate_activation(std::string_view name) {
  if (name == "sigmoid") return GateActivation::sigmoid;
  if (name == "softmax") return GateActivation::softmax;
  throw ConfigError("unknown gate activation '" + std::string(name) + "'");
}

std::size_t gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::srnn: return 1;
    case CellKind::lstm: return 4;
    case CellKind::gru: return 3;
  }
  return 0;
}

CellParams CellParams::zeros(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                             bool gated, GateActivation mode) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("cell dimensions must be positive");
  CellParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  for (std::size_t g = 0; g < gate_count(kind); ++g) {
    p.w_x.emplace_back(hidden_dim, input_dim);
    p.w_h.emplace_back(hidden_dim, hidden_dim);
    p.b.emplace_back(hidden_dim, 1);
  }
  if (gated) {
    p.gate = GateParams{Tensor2(input_dim, input_dim), Tensor2(input_dim, hidden_dim),
                        Tensor2(input_dim, 1), mode};
  }
  return p;
}

CellParams CellParams::init(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                            bool gated, GateActivation mode, RngStream& rng) {
  CellParams p = zeros(kind, input_dim, hidden_dim, gated, mode);
  for (std::size_t g = 0; g < p.w_x.size(); ++g) {
    p.w_x[g] = uniform_fan_in(rng, hidden_dim, input_dim);
    p.w_h[g] = uniform_fan_in(rng, hidden_dim, hidden_dim);
  }
  if (p.gate) {
    p.gate->w_xa = uniform_fan_in(rng, input_dim, input_dim);
    p.gate->w_ha = uniform_fan_in(rng, input_dim, hidden_dim);
  }
  return p;
}

std::vector<Tensor2*> CellParams::tensors() {
  std::vector<Tensor2*> out;
  for (auto& w : w_x) out.push_back(&w);
  for (auto& w : w_h) out.push_back(&w);
  for (auto& v : b) out.push_back(&v);
  if (gate) {
    out.push_back(&gate->w_xa);
    out.push_back(&gate->w_ha);
    out.push_back(&gate->b_a);
  }
  return out;
}

std::vector<const Tensor2*> CellParams::tensors() const {
  auto mutable_view = const_cast<CellParams*>(this)->tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

std::vector<std::string> CellParams::tensor_names() const {
  std::vector<std::string> out;
  for (std::size_t g = 0; g < w_x.size(); ++g) out.push_back(std::string("W_x") + gate_suffix(kind, g));
  for (std::size_t g = 0; g < w_h.size(); ++g) out.push_back(std::string("W_h") + gate_suffix(kind, g));
  for (std::size_t g = 0; g < b.size(); ++g) out.push_back(std::string("b_") + gate_suffix(kind, g));
  if (gate) {
    out.emplace_back("gate.W_xa");
    out.emplace_back("gate.W_ha");
    out.emplace_back("gate.b_a");
  }
  return out;
}

std::size_t CellParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor2* t : tensors()) n += t->size();
  return n;
}

StepState StepState::zeros(const CellParams& p, std::size_t batch) {
  StepState s;
  s.h = Tensor2(p.hidden_dim, batch);
  if (p.kind == CellKind::lstm) s.c = Tensor2(p.hidden_dim, batch);
  return s;
}

Tensor2 gate_forward(const Tensor2& x, const Tensor2& h_prev, const GateParams& g) {
  if (x.rows() != g.w_xa.cols() || h_prev.rows() != g.w_ha.cols() || x.cols() != h_prev.cols()) {
    throw ShapeError("gate_forward: x " + x.shape_string() + ", h " + h_prev.shape_string() +
                     " do not match W_xa " + g.w_xa.shape_string() + ", W_ha " +
                     g.w_ha.shape_string());
  }
  const Tensor2 pre = add_bias(add(matmul(g.w_xa, x), matmul(g.w_ha, h_prev)), g.b_a);
  return activation(pre, g.activation == GateActivation::sigmoid ? Activation::sigmoid
                                                                  : Activation::softmax_cols);
}

Tensor2 modulate(const Tensor2& x, const Tensor2& a) { return hadamard(a, x); }

StepState srnn_step(const Tensor2& x_eff, const StepState& s, const CellParams& p,
                    StepTrace* trace) {
  require_kind(p, CellKind::srnn, "srnn_step");
  check_inputs("srnn_step", x_eff, s, p);
  StepState out;
  out.h = activation(preactivation(p, 0, x_eff, s.h), Activation::tanh);
  if (trace) trace->acts[0] = out.h;
  return out;
}

StepState lstm_step(const Tensor2& x_eff, const StepState& s, const CellParams& p,
                    StepTrace* trace) {
  require_kind(p, CellKind::lstm, "lstm_step");
  check_inputs("lstm_step", x_eff, s, p);
  if (!s.c.same_shape(s.h)) throw ShapeError("lstm_step: cell state " + s.c.shape_string());
  const Tensor2 i = activation(preactivation(p, 0, x_eff, s.h), Activation::sigmoid);
  const Tensor2 f = activation(preactivation(p, 1, x_eff, s.h), Activation::sigmoid);
  const Tensor2 g = activation(preactivation(p, 2, x_eff, s.h), Activation::tanh);
  const Tensor2 o = activation(preactivation(p, 3, x_eff, s.h), Activation::sigmoid);
  StepState out;
  out.c = add(hadamard(f, s.c), hadamard(i, g));
  Tensor2 tanh_c = activation(out.c, Activation::tanh);
  out.h = hadamard(o, tanh_c);
  if (trace) {
    trace->acts = {i, f, g, o};
    trace->tanh_c = std::move(tanh_c);
  }
  return out;
}

StepState gru_step(const Tensor2& x_eff, const StepState& s, const CellParams& p,
                   StepTrace* trace) {
  require_kind(p, CellKind::gru, "gru_step");
  check_inputs("gru_step", x_eff, s, p);
  const Tensor2 r = activation(preactivation(p, 0, x_eff, s.h), Activation::sigmoid);
  const Tensor2 z = activation(preactivation(p, 1, x_eff, s.h), Activation::sigmoid);
  const Tensor2 candidate = activation(preactivation(p, 2, x_eff, hadamard(r, s.h)),
                                       Activation::tanh);
  StepState out;
  out.h = add(hadamard(z, s.h), hadamard(one_minus(z), candidate));
  if (trace) trace->acts = {r, z, candidate, Tensor2{}};
  return out;
}

BlockOutput block_step(const Tensor2& x, const StepState& s, const CellParams& p,
                       StepTrace* trace) {
  BlockOutput out;
  Tensor2 x_eff;
  if (p.gate) {
    out.attention = gate_forward(x, s.h, *p.gate);
    x_eff = modulate(x, *out.attention);
  } else {
    x_eff = x;
  }
  switch (p.kind) {
    case CellKind::srnn: out.state = srnn_step(x_eff, s, p, trace); break;
    case CellKind::lstm: out.state = lstm_step(x_eff, s, p, trace); break;
    case CellKind::gru: out.state = gru_step(x_eff, s, p, trace); break;
  }
  if (trace) {
    trace->x = x;
    trace->a = out.attention ? *out.attention : Tensor2{};
    trace->x_eff = std::move(x_eff);
    trace->h_prev = s.h;
    trace->c_prev = s.c;
  }
  return out;
}

}  // namespace eleatt
