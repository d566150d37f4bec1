#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eleatt/cells.hpp"
#include "eleatt/data.hpp"
#include "eleatt/model.hpp"
#include "eleatt/rng.hpp"

namespace eleatt {

enum class Mode { train, eval };

struct LayerCache {
  std::vector<StepTrace> steps;  // one per padded timestep
  std::vector<Tensor2> outputs;  // h_t after dropout: the next layer's inputs
  Tensor2 dropout_mask;          // N x B, inverted-dropout scale; empty when unused
};

struct ForwardPass {
  std::vector<LayerCache> layers;
  std::vector<std::size_t> lengths;
  Tensor2 features;  // readout input, N_last x B
  Tensor2 logits;    // K x B
  Mode mode = Mode::eval;
};

/// Runs every layer over the padded batch. In train mode with dropout > 0,
/// `dropout_rng` supplies one mask per layer shared across timesteps.
ForwardPass unroll_forward(const Network& net, const SequenceBatch& batch, Mode mode,
                           RngStream* dropout_rng = nullptr);

/// Eval-mode class probabilities, K x B; columns sum to 1.
Tensor2 predict(const Network& net, const SequenceBatch& batch);

struct LossAndGrad {
  double loss = 0.0;
  GradientSet grads;
};

/// Mean-batch cross-entropy and its exact gradient by backpropagation through time.
LossAndGrad backward(const Network& net, const ForwardPass& pass,
                     std::span<const std::uint32_t> labels);

/// Mean-batch cross-entropy of K x B logits.
double cross_entropy(const Tensor2& logits, std::span<const std::uint32_t> labels);
Tensor2 softmax_columns(const Tensor2& logits);

/// Central differences (L(theta+eps) - L(theta-eps)) / (2 eps), one scalar at a
/// time. Throws NonFiniteError with the flat parameter index on a bad loss.
std::vector<Tensor2> finite_diff_grad(const std::function<double()>& loss,
                                      std::span<Tensor2* const> params, double eps);

/// |g1 - g2| / max(1e-8, |g1| + |g2|)
double relative_error(double g1, double g2);

struct GradCheckSpec {
  CellKind kind = CellKind::gru;
  bool gated = true;
  std::size_t seeds = 20;
  std::uint64_t base_seed = 1;
  std::size_t max_input_dim = 5;
  std::size_t max_hidden = 6;
  std::size_t max_length = 4;
  std::size_t max_batch = 3;
  double eps = 1e-5;
  double tolerance = 1e-5;
  /// Test hook: perturbs one analytic gradient entry so the harness must fail.
  bool corrupt = false;
};

struct TensorError {
  std::string name;
  double worst = 0.0;
};

struct GradCheckReport {
  CellKind kind = CellKind::gru;
  bool gated = false;
  std::size_t configs = 0;
  double worst = 0.0;
  std::string worst_config;
  std::vector<TensorError> per_tensor;  // worst error per parameter tensor name
  bool passed = false;
  // The same comparison against 64-bit central differences of the production
  // forward pass. Its roundoff floor (about 1e-11 absolute for a loss near 1)
  // exceeds 1e-5 relative for gradient entries below about 1e-6.
  double worst_double_fd = 0.0;
  double worst_abs_double_fd = 0.0;
};

/// BPTT gradients (64-bit) against central differences of the independent
/// reference forward pass evaluated in long double.
GradCheckReport gradient_check(const GradCheckSpec& spec);

}  // namespace eleatt
