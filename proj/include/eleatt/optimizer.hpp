#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eleatt/model.hpp"
#include "eleatt/tensor.hpp"

namespace eleatt {

enum class ClipMode { elementwise, global_norm };

/// Clamps every gradient entry to [-max_amp, max_amp] (elementwise), or
/// rescales all gradients together so their L2 norm is at most max_amp.
void clip_gradients(std::span<Tensor2* const> grads, double max_amp = 1.0,
                    ClipMode mode = ClipMode::elementwise);
void clip_gradients(GradientSet& grads, double max_amp = 1.0,
                    ClipMode mode = ClipMode::elementwise);

struct AdamState {
  std::vector<Tensor2> m;
  std::vector<Tensor2> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(std::span<const Tensor2* const> params);
};

/// One bias-corrected Adam update. Throws NonFiniteError (flat index) if any
/// gradient entry is NaN/Inf; parameters are untouched in that case.
void adam_step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads,
               AdamState& state, double lr);
void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state, double lr);

/// Learning rate divided by `decay_factor` after `patience` consecutive
/// epochs without a training-accuracy improvement, never below `floor`.
struct LrSchedule {
  double current_lr = 0.005;
  double decay_factor = 10.0;
  double floor = 1e-6;
  std::size_t patience = 1;
  double best_train_acc = -1.0;
  std::size_t stale_epochs = 0;

  /// True when another decay would cross the floor.
  bool at_floor() const noexcept { return current_lr / decay_factor < floor; }
};

LrSchedule schedule_update(LrSchedule sched, double epoch_train_acc);

}  // namespace eleatt
