// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_TENSOR_HPP_
#define QROBUST_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qrobust {

/// Dense row-major float matrix.
class Tensor2D {
 public:
  Tensor2D() = default;
  /// Zero-filled rows x cols; both must be positive.
  Tensor2D(std::size_t rows, std::size_t cols);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Tensor2D identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  std::string shape_string() const;

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

bool all_finite(std::span<const float> values) noexcept;

/// a (m x k) times b (k x n). Accumulates in float.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
/// a^T times b, for a (k x m) and b (k x n).
Tensor2D matmul_at_b(const Tensor2D& a, const Tensor2D& b);
/// a times b^T, for a (m x k) and b (n x k).
Tensor2D matmul_a_bt(const Tensor2D& a, const Tensor2D& b);

/// Adds `bias` to every row of x in place; empty bias is a no-op.
void add_row_vector(Tensor2D& x, std::span<const float> bias);

/// Numerically stable softmax (max-subtracted).
std::vector<float> softmax(std::span<const float> logits);
void softmax_inplace(std::span<float> logits);

/// Normalizes each row to zero mean and unit variance, then applies gain and bias.
Tensor2D layer_norm(const Tensor2D& x, std::span<const float> gain, std::span<const float> bias,
                    float epsilon);

/// GELU, tanh approximation.
float gelu(float x) noexcept;
/// d/dx of the tanh-approximated GELU.
float gelu_grad(float x) noexcept;
Tensor2D gelu(const Tensor2D& x);

}  // namespace qrobust

#endif  // QROBUST_TENSOR_HPP_
