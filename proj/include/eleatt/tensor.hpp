#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace eleatt {

/// Dense row-major matrix of doubles. Column vectors are N x 1; batched
/// activations carry the batch along the column dimension.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 column(std::initializer_list<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Tensor2& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const;

  void fill(double v);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation { sigmoid, tanh, softmax_rows, softmax_cols };

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
/// a^T * b without materializing the transpose.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
/// c += a * b^T
void matmul_nt_acc(Tensor2& c, const Tensor2& a, const Tensor2& b);
/// c += a^T * b
void matmul_tn_acc(Tensor2& c, const Tensor2& a, const Tensor2& b);

Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
Tensor2 one_minus(const Tensor2& a);
Tensor2 scale(const Tensor2& a, double s);
void add_inplace(Tensor2& acc, const Tensor2& b);
void axpy_inplace(Tensor2& acc, double alpha, const Tensor2& b);
/// Adds column vector `bias` (rows x 1) to every column of `a`.
Tensor2 add_bias(const Tensor2& a, const Tensor2& bias);
/// Sum over columns: rows x cols -> rows x 1, accumulated into `acc`.
void row_sum_acc(Tensor2& acc, const Tensor2& a);
Tensor2 transpose(const Tensor2& a);

Tensor2 activation(const Tensor2& v, Activation kind);
double sigmoid(double s);

double max_abs(const Tensor2& a);
double max_abs_diff(const Tensor2& a, const Tensor2& b);

/// Counts multiplications and additions performed by the tensor ops above
/// (activations excluded) while an instance is alive on the current thread.
/// A nested counter adds its totals to the enclosing one when it ends.
class OpCounter {
 public:
  OpCounter();
  ~OpCounter();
  OpCounter(const OpCounter&) = delete;
  OpCounter& operator=(const OpCounter&) = delete;

  std::size_t multiplies() const noexcept { return mul_; }
  std::size_t additions() const noexcept { return add_; }
  std::size_t total() const noexcept { return mul_ + add_; }

  static void record(std::size_t mul, std::size_t add) noexcept;

 private:
  std::size_t mul_ = 0;
  std::size_t add_ = 0;
  OpCounter* previous_ = nullptr;
};

}  // namespace eleatt
