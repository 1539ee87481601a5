// SPDX-License-Identifier: Apache-2.0
#include "qrobust/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "qrobust/errors.hpp"

namespace qrobust {

namespace {

constexpr float kGeluCoeff = 0.7978845608028654f;  // sqrt(2 / pi)
constexpr float kGeluCubic = 0.044715f;

void check_shape(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ContractViolation("tensor dimensions must be positive, got " + std::to_string(rows) +
                            "x" + std::to_string(cols));
  }
}

}  // namespace

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  check_shape(rows, cols);
  data_.assign(rows * cols, 0.0f);
}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_shape(rows, cols);
  if (data_.size() != rows * cols) {
    throw ContractViolation("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string());
  }
  if (!all_finite(data_)) throw ContractViolation("tensor data holds non-finite values");
}

Tensor2D Tensor2D::identity(std::size_t n) {
  Tensor2D t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0f;
  return t;
}

std::string Tensor2D::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool all_finite(std::span<const float> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul shape mismatch: " + a.shape_string() + " x " +
                            b.shape_string());
  }
  Tensor2D out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const float aik = a(i, k);
      if (aik == 0.0f) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Tensor2D matmul_at_b(const Tensor2D& a, const Tensor2D& b) {
  if (a.rows() != b.rows()) {
    throw ContractViolation("matmul_at_b shape mismatch: " + a.shape_string() + " x " +
                            b.shape_string());
  }
  Tensor2D out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto src = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const float aki = a(k, i);
      if (aki == 0.0f) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aki * src[j];
    }
  }
  return out;
}

Tensor2D matmul_a_bt(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.cols()) {
    throw ContractViolation("matmul_a_bt shape mismatch: " + a.shape_string() + " x " +
                            b.shape_string());
  }
  Tensor2D out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      float acc = 0.0f;
      for (std::size_t k = 0; k < ai.size(); ++k) acc += ai[k] * bj[k];
      out(i, j) = acc;
    }
  }
  return out;
}

void add_row_vector(Tensor2D& x, std::span<const float> bias) {
  if (bias.empty()) return;
  if (bias.size() != x.cols()) {
    throw ContractViolation("bias length " + std::to_string(bias.size()) +
                            " does not match tensor " + x.shape_string());
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
}

void softmax_inplace(std::span<float> logits) {
  if (logits.empty()) throw ContractViolation("softmax of an empty vector");
  const float max = *std::max_element(logits.begin(), logits.end());
  float sum = 0.0f;
  for (float& v : logits) {
    v = std::exp(v - max);
    sum += v;
  }
  for (float& v : logits) v /= sum;
}

std::vector<float> softmax(std::span<const float> logits) {
  std::vector<float> out(logits.begin(), logits.end());
  softmax_inplace(out);
  return out;
}

Tensor2D layer_norm(const Tensor2D& x, std::span<const float> gain, std::span<const float> bias,
                    float epsilon) {
  if (gain.size() != x.cols() || bias.size() != x.cols()) {
    throw ContractViolation("layer_norm parameter length mismatch: gain " +
                            std::to_string(gain.size()) + ", bias " + std::to_string(bias.size()) +
                            ", input " + x.shape_string());
  }
  if (!(epsilon > 0.0f)) throw ContractViolation("layer_norm epsilon must be positive");
  Tensor2D out(x.rows(), x.cols());
  const float n = static_cast<float>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    float mean = 0.0f;
    for (float v : in) mean += v;
    mean /= n;
    float var = 0.0f;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= n;
    const float inv_std = 1.0f / std::sqrt(var + epsilon);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = (in[c] - mean) * inv_std * gain[c] + bias[c];
    }
  }
  return out;
}

float gelu(float x) noexcept {
  const float inner = kGeluCoeff * (x + kGeluCubic * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(inner));
}

float gelu_grad(float x) noexcept {
  const float inner = kGeluCoeff * (x + kGeluCubic * x * x * x);
  const float t = std::tanh(inner);
  return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * kGeluCoeff * (1.0f + 3.0f * kGeluCubic * x * x);
}

Tensor2D gelu(const Tensor2D& x) {
  Tensor2D out = x;
  for (float& v : out.values()) v = gelu(v);
  return out;
}

}  // namespace qrobust
