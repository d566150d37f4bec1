#include "eleatt/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "eleatt/error.hpp"
#include "eleatt/kernels.hpp"

namespace eleatt {

void clip_gradients(std::span<Tensor2* const> grads, double max_amp, ClipMode mode) {
  if (!(max_amp > 0.0)) throw ConfigError("clip_gradients: max_amp must be positive");
  if (mode == ClipMode::elementwise) {
    for (Tensor2* g : grads) {
      for (double& v : g->values()) v = std::clamp(v, -max_amp, max_amp);
    }
    return;
  }
  double sq = 0.0;
  for (const Tensor2* g : grads) {
    for (double v : g->values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_amp) return;
  const double s = max_amp / norm;
  for (Tensor2* g : grads) {
    for (double& v : g->values()) v *= s;
  }
}

void clip_gradients(GradientSet& grads, double max_amp, ClipMode mode) {
  const auto t = grads.tensors();
  clip_gradients(std::span<Tensor2* const>(t), max_amp, mode);
}

AdamState AdamState::for_params(std::span<const Tensor2* const> params) {
  AdamState s;
  for (const Tensor2* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adam_step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter/gradient/state count mismatch");
  }
  std::size_t flat = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(*grads[k]) || !params[k]->same_shape(state.m[k])) {
      throw ShapeError("adam_step: tensor " + std::to_string(k) + " shape mismatch " +
                       params[k]->shape_string() + " vs " + grads[k]->shape_string());
    }
    for (std::size_t i = 0; i < grads[k]->size(); ++i, ++flat) {
      if (!std::isfinite((*grads[k])[i])) {
        throw NonFiniteError("adam_step: non-finite gradient at index " + std::to_string(flat), flat);
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  kernels::AdamCoefficients coeff{};
  coeff.beta1 = state.beta1;
  coeff.beta2 = state.beta2;
  coeff.epsilon = state.epsilon;
  coeff.step_size = lr / (1.0 - std::pow(state.beta1, t));
  coeff.v_correction = 1.0 / (1.0 - std::pow(state.beta2, t));
  const auto& kt = kernels::active();
  for (std::size_t k = 0; k < params.size(); ++k) {
    kt.adam(params[k]->size(), coeff, grads[k]->data(), params[k]->data(), state.m[k].data(),
            state.v[k].data());
  }
}

void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state, double lr) {
  const auto p = params.tensors();
  const auto g = grads.tensors();
  adam_step(std::span<Tensor2* const>(p), std::span<const Tensor2* const>(g), state, lr);
}

LrSchedule schedule_update(LrSchedule sched, double epoch_train_acc) {
  if (epoch_train_acc > sched.best_train_acc) {
    sched.best_train_acc = epoch_train_acc;
    sched.stale_epochs = 0;
    return sched;
  }
  if (++sched.stale_epochs >= sched.patience) {
    sched.stale_epochs = 0;
    if (!sched.at_floor()) sched.current_lr /= sched.decay_factor;
  }
  return sched;
}

}  // namespace eleatt
