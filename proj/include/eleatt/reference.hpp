#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eleatt/data.hpp"
#include "eleatt/model.hpp"

namespace eleatt::reference {

// A second, deliberately naive implementation of the forward pass and loss:
// plain loops, one sequence at a time at its true length (no padding), no
// Tensor2 arithmetic and no SIMD kernels. It is templated on the scalar type
// so the finite-difference oracle can run in extended precision.

template <typename Real>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> v;
  Real& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

template <typename Real>
class ReferenceNetwork {
 public:
  explicit ReferenceNetwork(const Network& net);

  /// Parameters in ParameterSet::tensors() order.
  std::vector<Matrix<Real>>& tensors() noexcept { return tensors_; }

  /// K x B logits. `dropout_masks[l]` is N_l x B (or empty for no dropout).
  Matrix<Real> logits(const SequenceBatch& batch, std::span<const Tensor2> dropout_masks) const;
  Real loss(const SequenceBatch& batch, std::span<const Tensor2> dropout_masks) const;

 private:
  NetworkConfig config_;
  std::vector<std::size_t> layer_base_;  // index of each layer's first tensor
  std::vector<Matrix<Real>> tensors_;
};

extern template class ReferenceNetwork<double>;
extern template class ReferenceNetwork<long double>;

/// Central differences of the reference loss, (L(t+eps) - L(t-eps)) / (2 eps),
/// evaluated in long double and rounded to double. Same layout as
/// ParameterSet::tensors().
std::vector<Tensor2> extended_fd_grad(const Network& net, const SequenceBatch& batch,
                                      std::span<const Tensor2> dropout_masks, double eps);

}  // namespace eleatt::reference
