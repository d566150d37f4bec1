#include "eleatt/reference.hpp"

#include <cmath>
#include <limits>

#include "eleatt/error.hpp"

namespace eleatt::reference {
namespace {

template <typename Real>
Real sigm(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

template <typename Real>
using Vec = std::vector<Real>;

// y = W_x x + W_h h + b for one column.
template <typename Real>
Vec<Real> affine(const Matrix<Real>& wx, const Vec<Real>& x, const Matrix<Real>& wh,
                 const Vec<Real>& h, const Matrix<Real>& b) {
  Vec<Real> y(wx.rows);
  for (std::size_t r = 0; r < wx.rows; ++r) {
    Real acc = b.v[r];
    for (std::size_t c = 0; c < wx.cols; ++c) acc += wx(r, c) * x[c];
    for (std::size_t c = 0; c < wh.cols; ++c) acc += wh(r, c) * h[c];
    y[r] = acc;
  }
  return y;
}

template <typename Real>
Matrix<Real> convert(const Tensor2& t) {
  Matrix<Real> m{t.rows(), t.cols(), Vec<Real>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) m.v[i] = static_cast<Real>(t[i]);
  return m;
}

}  // namespace

template <typename Real>
ReferenceNetwork<Real>::ReferenceNetwork(const Network& net) : config_(net.config()) {
  for (const CellParams& layer : net.params().layers) {
    layer_base_.push_back(tensors_.size());
    for (const Tensor2* t : layer.tensors()) tensors_.push_back(convert<Real>(*t));
  }
  tensors_.push_back(convert<Real>(net.params().fc_w));
  tensors_.push_back(convert<Real>(net.params().fc_b));
}

template <typename Real>
Matrix<Real> ReferenceNetwork<Real>::logits(const SequenceBatch& batch,
                                            std::span<const Tensor2> dropout_masks) const {
  const std::size_t L = config_.layers.size();
  if (!dropout_masks.empty() && dropout_masks.size() != L) {
    throw ShapeError("reference: one dropout mask per layer expected");
  }
  const Matrix<Real>& fc_w = tensors_[tensors_.size() - 2];
  const Matrix<Real>& fc_b = tensors_.back();
  Matrix<Real> out{fc_w.rows, batch.size(), Vec<Real>(fc_w.rows * batch.size())};

  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Tensor2& seq = batch.inputs[j];
    const std::size_t T = seq.cols();
    std::vector<Vec<Real>> xs(T, Vec<Real>(seq.rows()));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < seq.rows(); ++d) xs[t][d] = static_cast<Real>(seq(d, t));
    }

    for (std::size_t l = 0; l < L; ++l) {
      const LayerSpec& spec = config_.layers[l];
      const std::size_t N = spec.hidden;
      const std::size_t G = gate_count(spec.kind);
      const std::size_t base = layer_base_[l];
      auto wx = [&](std::size_t g) -> const Matrix<Real>& { return tensors_[base + g]; };
      auto wh = [&](std::size_t g) -> const Matrix<Real>& { return tensors_[base + G + g]; };
      auto bias = [&](std::size_t g) -> const Matrix<Real>& { return tensors_[base + 2 * G + g]; };

      Vec<Real> h(N, Real(0));
      Vec<Real> c(N, Real(0));
      std::vector<Vec<Real>> ys(T);
      for (std::size_t t = 0; t < T; ++t) {
        Vec<Real> x = xs[t];
        if (spec.gated) {
          const Matrix<Real>& w_xa = tensors_[base + 3 * G];
          const Matrix<Real>& w_ha = tensors_[base + 3 * G + 1];
          const Matrix<Real>& b_a = tensors_[base + 3 * G + 2];
          Vec<Real> a = affine(w_xa, x, w_ha, h, b_a);
          if (spec.gate_activation == GateActivation::sigmoid) {
            for (Real& v : a) v = sigm(v);
          } else {
            Real mx = -std::numeric_limits<Real>::infinity();
            for (Real v : a) mx = std::max(mx, v);
            Real total = 0;
            for (Real& v : a) total += (v = std::exp(v - mx));
            for (Real& v : a) v /= total;
          }
          for (std::size_t d = 0; d < x.size(); ++d) x[d] *= a[d];
        }

        switch (spec.kind) {
          case CellKind::srnn: {
            Vec<Real> pre = affine(wx(0), x, wh(0), h, bias(0));
            for (std::size_t n = 0; n < N; ++n) h[n] = std::tanh(pre[n]);
            break;
          }
          case CellKind::lstm: {
            Vec<Real> i = affine(wx(0), x, wh(0), h, bias(0));
            Vec<Real> f = affine(wx(1), x, wh(1), h, bias(1));
            Vec<Real> g = affine(wx(2), x, wh(2), h, bias(2));
            Vec<Real> o = affine(wx(3), x, wh(3), h, bias(3));
            for (std::size_t n = 0; n < N; ++n) {
              c[n] = sigm(f[n]) * c[n] + sigm(i[n]) * std::tanh(g[n]);
              h[n] = sigm(o[n]) * std::tanh(c[n]);
            }
            break;
          }
          case CellKind::gru: {
            Vec<Real> r = affine(wx(0), x, wh(0), h, bias(0));
            Vec<Real> z = affine(wx(1), x, wh(1), h, bias(1));
            Vec<Real> rh(N);
            for (std::size_t n = 0; n < N; ++n) rh[n] = sigm(r[n]) * h[n];
            Vec<Real> cand = affine(wx(2), x, wh(2), rh, bias(2));
            for (std::size_t n = 0; n < N; ++n) {
              const Real zn = sigm(z[n]);
              h[n] = zn * h[n] + (Real(1) - zn) * std::tanh(cand[n]);
            }
            break;
          }
        }
        ys[t] = h;
        if (!dropout_masks.empty() && !dropout_masks[l].empty()) {
          for (std::size_t n = 0; n < N; ++n) ys[t][n] *= static_cast<Real>(dropout_masks[l](n, j));
        }
      }
      xs = std::move(ys);
    }

    Vec<Real> feat(xs[0].size(), Real(0));
    if (config_.readout == Readout::final_step) {
      feat = xs[T - 1];
    } else {
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t n = 0; n < feat.size(); ++n) feat[n] += xs[t][n];
      }
      for (Real& v : feat) v /= static_cast<Real>(T);
    }
    for (std::size_t k = 0; k < fc_w.rows; ++k) {
      Real acc = fc_b.v[k];
      for (std::size_t n = 0; n < fc_w.cols; ++n) acc += fc_w(k, n) * feat[n];
      out(k, j) = acc;
    }
  }
  return out;
}

template <typename Real>
Real ReferenceNetwork<Real>::loss(const SequenceBatch& batch, std::span<const Tensor2> dropout_masks) const {
  const Matrix<Real> z = logits(batch, dropout_masks);
  Real total = 0;
  for (std::size_t j = 0; j < z.cols; ++j) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < z.rows; ++k) mx = std::max(mx, z(k, j));
    Real sum = 0;
    for (std::size_t k = 0; k < z.rows; ++k) sum += std::exp(z(k, j) - mx);
    total += std::log(sum) + mx - z(batch.labels[j], j);
  }
  return total / static_cast<Real>(z.cols);
}

template class ReferenceNetwork<double>;
template class ReferenceNetwork<long double>;

std::vector<Tensor2> extended_fd_grad(const Network& net, const SequenceBatch& batch,
                                      std::span<const Tensor2> dropout_masks, double eps) {
  if (!(eps > 0.0)) throw ConfigError("extended_fd_grad: eps must be positive");
  ReferenceNetwork<long double> ref(net);
  const long double step = eps;
  std::vector<Tensor2> out;
  std::size_t flat = 0;
  for (Matrix<long double>& m : ref.tensors()) {
    Tensor2 g(m.rows, m.cols);
    for (std::size_t i = 0; i < m.v.size(); ++i, ++flat) {
      const long double saved = m.v[i];
      m.v[i] = saved + step;
      const long double plus = ref.loss(batch, dropout_masks);
      m.v[i] = saved - step;
      const long double minus = ref.loss(batch, dropout_masks);
      m.v[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NonFiniteError("extended_fd_grad: non-finite loss at parameter " + std::to_string(flat), flat);
      }
      g[i] = static_cast<double>((plus - minus) / (2 * step));
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace eleatt::reference
