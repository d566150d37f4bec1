#include "eleatt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eleatt/error.hpp"
#include "eleatt/kernels.hpp"

namespace eleatt {
namespace {

thread_local OpCounter* current_counter = nullptr;

[[noreturn]] void shape_mismatch(const char* op, const Tensor2& a, const Tensor2& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

void require_same(const char* op, const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) shape_mismatch(op, a, b);
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor2::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::column(std::initializer_list<double> values) {
  return Tensor2(values.size(), 1, std::vector<double>(values));
}

std::string Tensor2::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor2 c(a.rows(), b.cols());
  kernels::active().gemm_nn(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data(), false);
  if (a.cols() > 0) {
    OpCounter::record(a.rows() * a.cols() * b.cols(), a.rows() * (a.cols() - 1) * b.cols());
  }
  return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.cols(), b.cols());
  matmul_tn_acc(c, a, b);
  return c;
}

void matmul_tn_acc(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  if (c.rows() != a.cols() || c.cols() != b.cols()) shape_mismatch("matmul_tn (output)", c, b);
  kernels::active().gemm_tn_acc(a.cols(), b.cols(), a.rows(), a.data(), b.data(), c.data());
  OpCounter::record(a.cols() * a.rows() * b.cols(), a.cols() * a.rows() * b.cols());
}

void matmul_nt_acc(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  if (c.rows() != a.rows() || c.cols() != b.rows()) shape_mismatch("matmul_nt (output)", c, a);
  kernels::active().gemm_nt_acc(a.rows(), b.rows(), a.cols(), a.data(), b.data(), c.data());
  OpCounter::record(a.rows() * a.cols() * b.rows(), a.rows() * a.cols() * b.rows());
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
  require_same("add", a, b);
  Tensor2 out(a.rows(), a.cols());
  kernels::active().add(a.size(), a.data(), b.data(), out.data());
  OpCounter::record(0, a.size());
  return out;
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
  require_same("sub", a, b);
  Tensor2 out(a.rows(), a.cols());
  kernels::active().sub(a.size(), a.data(), b.data(), out.data());
  OpCounter::record(0, a.size());
  return out;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  require_same("hadamard", a, b);
  Tensor2 out(a.rows(), a.cols());
  kernels::active().mul(a.size(), a.data(), b.data(), out.data());
  OpCounter::record(a.size(), 0);
  return out;
}

Tensor2 one_minus(const Tensor2& a) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 - a[i];
  OpCounter::record(0, a.size());
  return out;
}

Tensor2 scale(const Tensor2& a, double s) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  OpCounter::record(a.size(), 0);
  return out;
}

void add_inplace(Tensor2& acc, const Tensor2& b) {
  require_same("add_inplace", acc, b);
  kernels::active().add(acc.size(), acc.data(), b.data(), acc.data());
  OpCounter::record(0, acc.size());
}

void axpy_inplace(Tensor2& acc, double alpha, const Tensor2& b) {
  require_same("axpy_inplace", acc, b);
  kernels::active().axpy(acc.size(), alpha, b.data(), acc.data());
  OpCounter::record(acc.size(), acc.size());
}

Tensor2 add_bias(const Tensor2& a, const Tensor2& bias) {
  if (bias.cols() != 1 || bias.rows() != a.rows()) shape_mismatch("add_bias", a, bias);
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double br = bias[r];
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) + br;
  }
  OpCounter::record(0, a.size());
  return out;
}

void row_sum_acc(Tensor2& acc, const Tensor2& a) {
  if (acc.cols() != 1 || acc.rows() != a.rows()) shape_mismatch("row_sum_acc", acc, a);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (double v : a.row(r)) s += v;
    acc[r] += s;
  }
  OpCounter::record(0, a.size());
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

double sigmoid(double s) {
  // Split by sign so exp never overflows. Beyond |s| ~ 37 (above) or ~ 708
  // (below) the exact value is not representable and would round onto 0 or 1;
  // the clamp keeps the result inside the open interval.
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1p-53;
  if (s >= 0.0) return std::min(hi, 1.0 / (1.0 + std::exp(-s)));
  const double e = std::exp(s);
  return std::max(lo, e / (1.0 + e));
}

Tensor2 activation(const Tensor2& v, Activation kind) {
  Tensor2 out(v.rows(), v.cols());
  switch (kind) {
    case Activation::sigmoid:
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
      break;
    case Activation::softmax_rows:
      for (std::size_t r = 0; r < v.rows(); ++r) {
        const auto in = v.row(r);
        auto o = out.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) total += (o[c] = std::exp(in[c] - mx));
        for (double& x : o) x /= total;
      }
      break;
    case Activation::softmax_cols:
      for (std::size_t c = 0; c < v.cols(); ++c) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < v.rows(); ++r) mx = std::max(mx, v(r, c));
        double total = 0.0;
        for (std::size_t r = 0; r < v.rows(); ++r) total += (out(r, c) = std::exp(v(r, c) - mx));
        for (std::size_t r = 0; r < v.rows(); ++r) out(r, c) /= total;
      }
      break;
  }
  return out;
}

double max_abs(const Tensor2& a) {
  double m = 0.0;
  for (double x : a.values()) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  require_same("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

OpCounter::OpCounter() : previous_(current_counter) { current_counter = this; }
OpCounter::~OpCounter() {
  current_counter = previous_;
  if (previous_ != nullptr) {
    previous_->mul_ += mul_;
    previous_->add_ += add_;
  }
}

void OpCounter::record(std::size_t mul, std::size_t add) noexcept {
  if (OpCounter* c = current_counter) {
    c->mul_ += mul;
    c->add_ += add;
  }
}

}  // namespace eleatt
