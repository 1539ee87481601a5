// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_QUANT_HPP_
#define QROBUST_QUANT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrobust/lexicon.hpp"
#include "qrobust/model.hpp"
#include "qrobust/tensor.hpp"

namespace qrobust {

/// Asymmetric 8-bit affine parameters: r = scale * (q - zero_point).
struct QuantParams {
  static constexpr std::int32_t kQMin = 0;
  static constexpr std::int32_t kQMax = 255;

  float scale = 1.0f;
  std::int32_t zero_point = 0;

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// Scale and zero point for the data range [d_min, d_max], widened to
/// include 0 so that real zero is exactly representable. A degenerate range
/// falls back to scale 1. Rounding is half-to-even.
QuantParams compute_params(float d_min, float d_max);
/// compute_params over the observed min/max of `values` (0 when empty).
QuantParams params_for(std::span<const float> values);

std::uint8_t quantize_value(float r, const QuantParams& params) noexcept;
float dequantize_value(std::uint8_t q, const QuantParams& params) noexcept;

struct QuantizedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;
  QuantParams params;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

/// q = clamp(round(r / S) + Z, 0, 255); out-of-range values saturate.
QuantizedTensor quantize_tensor(const Tensor2D& r, const QuantParams& params);
/// Per-tensor parameters from the tensor's own range.
QuantizedTensor quantize_tensor(const Tensor2D& r);
Tensor2D dequantize(const QuantizedTensor& q);

/// Dynamic int8 linear layer: x is quantized per call from its observed
/// range, the product is accumulated in int32 with the zero-point cross terms
/// expanded, then rescaled by S_x * S_w and offset by `bias` in float.
/// `bias` may be empty.
Tensor2D quantized_linear(const Tensor2D& x, const QuantizedTensor& w, std::span<const float> bias);

struct QuantizedEncoderLayer {
  QuantizedTensor wq, wk, wv, wo;
  Tensor2D ln1_gain, ln1_bias;
  QuantizedTensor w1;
  Tensor2D b1;
  QuantizedTensor w2;
  Tensor2D b2;
  Tensor2D ln2_gain, ln2_bias;
};

/// Matmul weights in 8 bits; embeddings, biases and layer norms in float.
struct QuantizedClassifier {
  ModelConfig config;
  Tensor2D token_embeddings;
  Tensor2D position_embeddings;
  std::vector<QuantizedEncoderLayer> layers;
  QuantizedTensor head;
  Tensor2D head_bias;

  const QuantizedTensor& weight(LinearSlot slot) const;
  std::span<const float> bias(LinearSlot slot) const;

  /// Visits tensors in checkpoint order, dispatching on storage type.
  void for_each_tensor(const std::function<void(const std::string&, const Tensor2D&)>& on_float,
                       const std::function<void(const std::string&, const QuantizedTensor&)>&
                           on_quantized) const;
};

/// Quantizes exactly the matmul weight set, each with its own range.
QuantizedClassifier quantize_model(const TransformerClassifier& model);

/// Same pipeline as forward(), with every matmul routed through quantized_linear.
ClassifierOutput forward(const QuantizedClassifier& model, std::span<const TokenId> token_ids);
ClassifierOutput predict(const QuantizedClassifier& model, std::string_view text,
                         const Vocabulary& vocab);

std::string serialize_checkpoint(const QuantizedClassifier& model);
QuantizedClassifier parse_quantized_checkpoint(std::string_view bytes);
std::size_t save_checkpoint(const QuantizedClassifier& model, const std::filesystem::path& path);
QuantizedClassifier load_quantized_checkpoint(const std::filesystem::path& path);

/// Size in bytes of a checkpoint file; throws IoError if unreadable.
std::uintmax_t model_size(const std::filesystem::path& path);
/// model_size(quantized) / model_size(original).
double size_ratio(const std::filesystem::path& quantized_path,
                  const std::filesystem::path& original_path);

}  // namespace qrobust

#endif  // QROBUST_QUANT_HPP_
