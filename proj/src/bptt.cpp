#include "eleatt/bptt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eleatt/error.hpp"
#include "eleatt/reference.hpp"

namespace eleatt {
namespace {

template <typename F>
Tensor2 zip(const Tensor2& a, const Tensor2& b, F f) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

Tensor2 sigmoid_backward(const Tensor2& upstream, const Tensor2& s) {
  return zip(upstream, s, [](double d, double y) { return d * y * (1.0 - y); });
}

Tensor2 tanh_backward(const Tensor2& upstream, const Tensor2& t) {
  return zip(upstream, t, [](double d, double y) { return d * (1.0 - y * y); });
}

// Column-wise softmax Jacobian-vector product: a (.) (d - <d, a>).
Tensor2 softmax_backward(const Tensor2& upstream, const Tensor2& a) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t c = 0; c < a.cols(); ++c) {
    double dot = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) dot += upstream(r, c) * a(r, c);
    for (std::size_t r = 0; r < a.rows(); ++r) out(r, c) = a(r, c) * (upstream(r, c) - dot);
  }
  return out;
}

// Gradient bookkeeping for one affine map pre = W_x x + W_h h + b.
void accumulate_affine(const CellParams& p, CellParams& g, std::size_t gi, const Tensor2& dpre,
                       const Tensor2& x, const Tensor2& h, Tensor2& dx, Tensor2* dh) {
  matmul_nt_acc(g.w_x[gi], dpre, x);
  matmul_nt_acc(g.w_h[gi], dpre, h);
  row_sum_acc(g.b[gi], dpre);
  matmul_tn_acc(dx, p.w_x[gi], dpre);
  if (dh) matmul_tn_acc(*dh, p.w_h[gi], dpre);
}

struct StepGrads {
  Tensor2 dx_eff;
  Tensor2 dh_prev;
  Tensor2 dc_prev;
};

StepGrads srnn_backward(const CellParams& p, const StepTrace& tr, const Tensor2& dh,
                        CellParams& g) {
  StepGrads out{Tensor2(p.input_dim, dh.cols()), Tensor2(p.hidden_dim, dh.cols()), {}};
  const Tensor2 dpre = tanh_backward(dh, tr.acts[0]);
  accumulate_affine(p, g, 0, dpre, tr.x_eff, tr.h_prev, out.dx_eff, &out.dh_prev);
  return out;
}

StepGrads lstm_backward(const CellParams& p, const StepTrace& tr, const Tensor2& dh,
                        const Tensor2& dc, CellParams& g) {
  const std::size_t batch = dh.cols();
  StepGrads out{Tensor2(p.input_dim, batch), Tensor2(p.hidden_dim, batch), {}};
  const Tensor2& i = tr.acts[0];
  const Tensor2& f = tr.acts[1];
  const Tensor2& cand = tr.acts[2];
  const Tensor2& o = tr.acts[3];

  const Tensor2 d_o = hadamard(dh, tr.tanh_c);
  Tensor2 dc_total = dc;
  for (std::size_t k = 0; k < dc_total.size(); ++k) {
    dc_total[k] += dh[k] * o[k] * (1.0 - tr.tanh_c[k] * tr.tanh_c[k]);
  }
  const Tensor2 d_f = hadamard(dc_total, tr.c_prev);
  const Tensor2 d_i = hadamard(dc_total, cand);
  const Tensor2 d_g = hadamard(dc_total, i);
  out.dc_prev = hadamard(dc_total, f);

  const std::array<Tensor2, 4> dpre{sigmoid_backward(d_i, i), sigmoid_backward(d_f, f),
                                    tanh_backward(d_g, cand), sigmoid_backward(d_o, o)};
  for (std::size_t gi = 0; gi < 4; ++gi) {
    accumulate_affine(p, g, gi, dpre[gi], tr.x_eff, tr.h_prev, out.dx_eff, &out.dh_prev);
  }
  return out;
}

StepGrads gru_backward(const CellParams& p, const StepTrace& tr, const Tensor2& dh,
                       CellParams& g) {
  const std::size_t batch = dh.cols();
  StepGrads out{Tensor2(p.input_dim, batch), hadamard(dh, tr.acts[1]), {}};
  const Tensor2& r = tr.acts[0];
  const Tensor2& z = tr.acts[1];
  const Tensor2& cand = tr.acts[2];
  const Tensor2& h_prev = tr.h_prev;

  Tensor2 d_z(z.rows(), batch);
  Tensor2 d_cand(z.rows(), batch);
  for (std::size_t k = 0; k < z.size(); ++k) {
    d_z[k] = dh[k] * (h_prev[k] - cand[k]);
    d_cand[k] = dh[k] * (1.0 - z[k]);
  }

  // Candidate: pre = W_xh x + W_hh (r (.) h_prev) + b_h
  const Tensor2 dpre_h = tanh_backward(d_cand, cand);
  const Tensor2 rh = hadamard(r, h_prev);
  matmul_nt_acc(g.w_x[2], dpre_h, tr.x_eff);
  matmul_nt_acc(g.w_h[2], dpre_h, rh);
  row_sum_acc(g.b[2], dpre_h);
  matmul_tn_acc(out.dx_eff, p.w_x[2], dpre_h);
  const Tensor2 d_rh = matmul_tn(p.w_h[2], dpre_h);
  const Tensor2 d_r = hadamard(d_rh, h_prev);
  add_inplace(out.dh_prev, hadamard(d_rh, r));

  accumulate_affine(p, g, 0, sigmoid_backward(d_r, r), tr.x_eff, h_prev, out.dx_eff,
                    &out.dh_prev);
  accumulate_affine(p, g, 1, sigmoid_backward(d_z, z), tr.x_eff, h_prev, out.dx_eff,
                    &out.dh_prev);
  return out;
}

// x_eff = a (.) x with a = phi(W_xa x + W_ha h_prev + b_a): gradient reaches x
// directly through the product and again through the gate.
Tensor2 gate_backward(const GateParams& gate, const StepTrace& tr, const Tensor2& dx_eff,
                      GateParams& g, Tensor2& dh_prev) {
  Tensor2 dx = hadamard(dx_eff, tr.a);
  const Tensor2 da = hadamard(dx_eff, tr.x);
  const Tensor2 dpre = gate.activation == GateActivation::sigmoid ? sigmoid_backward(da, tr.a)
                                                                  : softmax_backward(da, tr.a);
  matmul_nt_acc(g.w_xa, dpre, tr.x);
  matmul_nt_acc(g.w_ha, dpre, tr.h_prev);
  row_sum_acc(g.b_a, dpre);
  matmul_tn_acc(dx, gate.w_xa, dpre);
  matmul_tn_acc(dh_prev, gate.w_ha, dpre);
  return dx;
}

// Moves columns of `grad` whose sequence has ended into `pass` and zeroes them.
void split_frozen(Tensor2& grad, Tensor2& pass, std::span<const std::size_t> lengths,
                  std::size_t t) {
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    if (t < lengths[j]) continue;
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      pass(r, j) = grad(r, j);
      grad(r, j) = 0.0;
    }
  }
}

void copy_frozen(Tensor2& next, const Tensor2& prev, std::span<const std::size_t> lengths,
                 std::size_t t) {
  if (next.empty()) return;
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    if (t < lengths[j]) continue;
    for (std::size_t r = 0; r < next.rows(); ++r) next(r, j) = prev(r, j);
  }
}

}  // namespace

Tensor2 softmax_columns(const Tensor2& logits) { return activation(logits, Activation::softmax_cols); }

double cross_entropy(const Tensor2& logits, std::span<const std::uint32_t> labels) {
  if (labels.size() != logits.cols()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     logits.shape_string() + " logits");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    if (labels[j] >= logits.rows()) throw ConfigError("cross_entropy: label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < logits.rows(); ++k) mx = std::max(mx, logits(k, j));
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.rows(); ++k) sum += std::exp(logits(k, j) - mx);
    total += std::log(sum) + mx - logits(labels[j], j);
  }
  return total / static_cast<double>(logits.cols());
}

ForwardPass unroll_forward(const Network& net, const SequenceBatch& batch, Mode mode,
                           RngStream* dropout_rng) {
  if (batch.empty()) throw ConfigError("unroll_forward: empty batch");
  batch.validate();
  if (batch.dims != net.config().input_dim) {
    throw ShapeError("unroll_forward: batch has D=" + std::to_string(batch.dims) +
                     " but the network expects D=" + std::to_string(net.config().input_dim));
  }
  const double p_drop = net.config().dropout_p;
  const bool use_dropout = mode == Mode::train && p_drop > 0.0;
  if (use_dropout && dropout_rng == nullptr) {
    throw ConfigError("unroll_forward: train mode with dropout needs an RNG stream");
  }

  ForwardPass pass;
  pass.mode = mode;
  pass.lengths = batch.lengths();
  const std::size_t batch_size = batch.size();
  const std::vector<Tensor2> steps = batch.padded_steps();
  const std::size_t T = steps.size();

  pass.layers.resize(net.num_layers());
  const std::vector<Tensor2>* inputs = &steps;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const CellParams& p = net.layer(l);
    LayerCache& cache = pass.layers[l];
    cache.steps.resize(T);
    cache.outputs.resize(T);
    StepState state = StepState::zeros(p, batch_size);
    for (std::size_t t = 0; t < T; ++t) {
      BlockOutput out = block_step((*inputs)[t], state, p, &cache.steps[t]);
      copy_frozen(out.state.h, state.h, pass.lengths, t);
      copy_frozen(out.state.c, state.c, pass.lengths, t);
      state = std::move(out.state);
      cache.outputs[t] = state.h;
    }
    if (use_dropout) {
      const double keep_scale = 1.0 / (1.0 - p_drop);
      cache.dropout_mask = Tensor2(p.hidden_dim, batch_size);
      for (double& m : cache.dropout_mask.values()) {
        m = dropout_rng->uniform01() < p_drop ? 0.0 : keep_scale;
      }
      for (Tensor2& h : cache.outputs) h = hadamard(h, cache.dropout_mask);
    }
    inputs = &cache.outputs;
  }

  const std::vector<Tensor2>& top = pass.layers.back().outputs;
  if (net.config().readout == Readout::final_step) {
    // Frozen columns carry each sequence's last valid state to step T-1.
    pass.features = top[T - 1];
  } else {
    pass.features = Tensor2(top[0].rows(), batch_size);
    for (std::size_t j = 0; j < batch_size; ++j) {
      const double inv = 1.0 / static_cast<double>(pass.lengths[j]);
      for (std::size_t t = 0; t < pass.lengths[j]; ++t) {
        for (std::size_t r = 0; r < top[t].rows(); ++r) pass.features(r, j) += top[t](r, j);
      }
      for (std::size_t r = 0; r < pass.features.rows(); ++r) pass.features(r, j) *= inv;
    }
  }
  pass.logits = add_bias(matmul(net.params().fc_w, pass.features), net.params().fc_b);
  return pass;
}

Tensor2 predict(const Network& net, const SequenceBatch& batch) {
  return softmax_columns(unroll_forward(net, batch, Mode::eval).logits);
}

LossAndGrad backward(const Network& net, const ForwardPass& pass,
                     std::span<const std::uint32_t> labels) {
  if (pass.layers.size() != net.num_layers()) {
    throw ShapeError("backward: cache has " + std::to_string(pass.layers.size()) +
                     " layers, network has " + std::to_string(net.num_layers()));
  }
  const std::size_t batch_size = pass.logits.cols();
  LossAndGrad result;
  result.loss = cross_entropy(pass.logits, labels);
  result.grads = net.params().zeros_like();
  GradientSet& grads = result.grads;

  Tensor2 dlogits = softmax_columns(pass.logits);
  const double inv_batch = 1.0 / static_cast<double>(batch_size);
  for (std::size_t j = 0; j < batch_size; ++j) dlogits(labels[j], j) -= 1.0;
  for (double& v : dlogits.values()) v *= inv_batch;

  matmul_nt_acc(grads.fc_w, dlogits, pass.features);
  row_sum_acc(grads.fc_b, dlogits);
  const Tensor2 dfeatures = matmul_tn(net.params().fc_w, dlogits);

  const std::size_t T = pass.layers.back().outputs.size();
  std::vector<Tensor2> d_out(T, Tensor2(dfeatures.rows(), batch_size));
  if (net.config().readout == Readout::final_step) {
    d_out[T - 1] = dfeatures;
  } else {
    for (std::size_t j = 0; j < batch_size; ++j) {
      const double inv = 1.0 / static_cast<double>(pass.lengths[j]);
      for (std::size_t t = 0; t < pass.lengths[j]; ++t) {
        for (std::size_t r = 0; r < dfeatures.rows(); ++r) d_out[t](r, j) = dfeatures(r, j) * inv;
      }
    }
  }

  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const CellParams& p = net.layer(l);
    const LayerCache& cache = pass.layers[l];
    CellParams& g = grads.layers[l];
    const bool lstm = p.kind == CellKind::lstm;

    Tensor2 dh_carry(p.hidden_dim, batch_size);
    Tensor2 dc_carry = lstm ? Tensor2(p.hidden_dim, batch_size) : Tensor2{};
    std::vector<Tensor2> d_in(T);
    for (std::size_t t = T; t-- > 0;) {
      const StepTrace& tr = cache.steps[t];
      Tensor2 dh = cache.dropout_mask.empty() ? d_out[t] : hadamard(d_out[t], cache.dropout_mask);
      add_inplace(dh, dh_carry);
      Tensor2 dc = dc_carry;

      Tensor2 pass_h(p.hidden_dim, batch_size);
      split_frozen(dh, pass_h, pass.lengths, t);
      Tensor2 pass_c;
      if (lstm) {
        pass_c = Tensor2(p.hidden_dim, batch_size);
        split_frozen(dc, pass_c, pass.lengths, t);
      }

      StepGrads sg;
      switch (p.kind) {
        case CellKind::srnn: sg = srnn_backward(p, tr, dh, g); break;
        case CellKind::lstm: sg = lstm_backward(p, tr, dh, dc, g); break;
        case CellKind::gru: sg = gru_backward(p, tr, dh, g); break;
      }
      d_in[t] = p.gate ? gate_backward(*p.gate, tr, sg.dx_eff, *g.gate, sg.dh_prev)
                       : std::move(sg.dx_eff);
      dh_carry = add(sg.dh_prev, pass_h);
      if (lstm) dc_carry = add(sg.dc_prev, pass_c);
    }
    d_out = std::move(d_in);
  }
  return result;
}

std::vector<Tensor2> finite_diff_grad(const std::function<double()>& loss,
                                      std::span<Tensor2* const> params, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
  std::vector<Tensor2> out;
  std::size_t flat = 0;
  for (Tensor2* t : params) {
    Tensor2 g(t->rows(), t->cols());
    for (std::size_t i = 0; i < t->size(); ++i, ++flat) {
      const double saved = (*t)[i];
      (*t)[i] = saved + eps;
      const double plus = loss();
      (*t)[i] = saved - eps;
      const double minus = loss();
      (*t)[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NonFiniteError("finite_diff_grad: non-finite loss at parameter " +
                                 std::to_string(flat),
                             flat);
      }
      g[i] = (plus - minus) / (2.0 * eps);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double relative_error(double g1, double g2) {
  return std::abs(g1 - g2) / std::max(1e-8, std::abs(g1) + std::abs(g2));
}

GradCheckReport gradient_check(const GradCheckSpec& spec) {
  GradCheckReport report;
  report.kind = spec.kind;
  report.gated = spec.gated;
  std::vector<std::string> tensor_order;
  std::vector<double> tensor_worst;

  for (std::size_t s = 0; s < spec.seeds; ++s) {
    RngStream rng = RngStream(spec.base_seed).derive("gradcheck", s);
    NetworkConfig cfg;
    cfg.input_dim = 1 + rng.below(spec.max_input_dim);
    cfg.num_classes = 2 + rng.below(3);
    const std::size_t layers = 1 + rng.below(2);
    for (std::size_t l = 0; l < layers; ++l) {
      cfg.layers.push_back(LayerSpec{spec.kind, 1 + rng.below(spec.max_hidden), spec.gated,
                                     rng.below(4) == 0 ? GateActivation::softmax
                                                       : GateActivation::sigmoid});
    }
    cfg.dropout_p = rng.below(2) == 0 ? 0.0 : 0.3;
    cfg.readout = rng.below(3) == 0 ? Readout::mean_over_time : Readout::final_step;
    Network net = build(cfg, rng.next_u64());
    // Larger-than-default weights keep gradients well away from zero.
    for (Tensor2* t : net.params().tensors()) {
      for (double& v : t->values()) v = rng.uniform(-1.0, 1.0);
    }

    SequenceBatch batch;
    batch.dims = cfg.input_dim;
    batch.classes = cfg.num_classes;
    const std::size_t batch_size = 1 + rng.below(spec.max_batch);
    for (std::size_t j = 0; j < batch_size; ++j) {
      const std::size_t len = 1 + rng.below(spec.max_length);
      batch.inputs.push_back(rng_uniform(rng, -1.0, 1.0, cfg.input_dim, len));
      batch.labels.push_back(static_cast<std::uint32_t>(rng.below(cfg.num_classes)));
    }

    const std::uint64_t mask_seed = rng.next_u64();
    auto run_forward = [&] {
      RngStream drop(mask_seed);
      return unroll_forward(net, batch, Mode::train, &drop);
    };
    const ForwardPass pass = run_forward();
    LossAndGrad analytic = backward(net, pass, batch.labels);
    if (spec.corrupt) analytic.grads.fc_b[0] += 1e-3;

    std::vector<Tensor2> masks;
    for (const LayerCache& layer : pass.layers) masks.push_back(layer.dropout_mask);
    const auto numeric = reference::extended_fd_grad(net, batch, masks, spec.eps);
    auto params = net.params().tensors();
    const auto numeric64 = finite_diff_grad(
        [&] { return cross_entropy(run_forward().logits, batch.labels); }, params, spec.eps);

    const auto names = net.params().names();
    const auto analytic_tensors = analytic.grads.tensors();
    for (std::size_t k = 0; k < names.size(); ++k) {
      // Per-tensor rows aggregate over layers: "layer1.W_xr" -> "W_xr".
      const std::string key = names[k].rfind("layer", 0) == 0
                                  ? names[k].substr(names[k].find('.') + 1)
                                  : names[k];
      auto it = std::find(tensor_order.begin(), tensor_order.end(), key);
      if (it == tensor_order.end()) {
        tensor_order.push_back(key);
        tensor_worst.push_back(0.0);
        it = tensor_order.end() - 1;
      }
      double& slot = tensor_worst[static_cast<std::size_t>(it - tensor_order.begin())];
      for (std::size_t i = 0; i < numeric[k].size(); ++i) {
        const double g = (*analytic_tensors[k])[i];
        report.worst_double_fd = std::max(report.worst_double_fd, relative_error(g, numeric64[k][i]));
        report.worst_abs_double_fd = std::max(report.worst_abs_double_fd, std::abs(g - numeric64[k][i]));
        const double err = relative_error(g, numeric[k][i]);
        slot = std::max(slot, err);
        if (err > report.worst || !std::isfinite(err)) {
          report.worst = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
          report.worst_config = "seed=" + std::to_string(s) + " D=" + std::to_string(cfg.input_dim) +
                                " layers=" + std::to_string(layers) +
                                " B=" + std::to_string(batch_size) + " tensor=" + names[k];
        }
      }
    }
    ++report.configs;
  }
  for (std::size_t k = 0; k < tensor_order.size(); ++k) {
    report.per_tensor.push_back({tensor_order[k], tensor_worst[k]});
  }
  report.passed = report.worst < spec.tolerance;
  return report;
}

}  // namespace eleatt
