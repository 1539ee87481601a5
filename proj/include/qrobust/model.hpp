// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_MODEL_HPP_
#define QROBUST_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrobust/lexicon.hpp"
#include "qrobust/tensor.hpp"

namespace qrobust {

struct ModelConfig {
  std::uint32_t vocab_size = 2;
  std::uint32_t max_seq_len = 32;
  std::uint32_t embed_dim = 64;
  std::uint32_t num_layers = 2;
  std::uint32_t num_heads = 4;
  std::uint32_t ffn_dim = 128;
  std::uint32_t num_classes = 2;
  float dropout = 0.1f;
  std::uint64_t seed = 0;

  /// Throws ContractViolation on an unusable configuration.
  void validate() const;
  std::uint32_t head_dim() const noexcept { return embed_dim / num_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr float kLayerNormEpsilon = 1e-5f;

struct EncoderLayer {
  // Attention projections carry no bias.
  Tensor2D wq, wk, wv, wo;
  Tensor2D ln1_gain, ln1_bias;
  Tensor2D w1, b1, w2, b2;
  Tensor2D ln2_gain, ln2_bias;
};

/// Identifies one of the matmul weights, i.e. the quantizable set.
enum class LinearKind : std::uint8_t { kQuery, kKey, kValue, kOutput, kFfnIn, kFfnOut, kHead };

struct LinearSlot {
  std::size_t layer = 0;
  LinearKind kind = LinearKind::kHead;
};

/// Encoder-only transformer classifier with mean pooling over non-PAD tokens.
struct TransformerClassifier {
  ModelConfig config;
  Tensor2D token_embeddings;     // vocab_size x embed_dim
  Tensor2D position_embeddings;  // max_seq_len x embed_dim
  std::vector<EncoderLayer> layers;
  Tensor2D head;       // embed_dim x num_classes
  Tensor2D head_bias;  // 1 x num_classes

  /// Correctly shaped model: uniform(-0.05, 0.05) matmul weights and
  /// embeddings, unit layer-norm gains, zero biases and a zero head.
  static TransformerClassifier initialize(const ModelConfig& config);
  /// All-zero tensors except layer-norm gains (1).
  static TransformerClassifier zeros(const ModelConfig& config);

  /// Throws ContractViolation naming the first tensor whose shape disagrees
  /// with the config.
  void audit_shapes() const;

  /// Visits every tensor in checkpoint order.
  void for_each_tensor(const std::function<void(const std::string&, Tensor2D&)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, const Tensor2D&)>& fn) const;

  const Tensor2D& weight(LinearSlot slot) const;
  /// Bias paired with a matmul weight; empty for attention projections.
  std::span<const float> bias(LinearSlot slot) const;

  std::size_t parameter_count() const;
};

/// True when `name` is a matmul weight (quantized by quantize_model).
bool is_linear_weight(std::string_view name) noexcept;

struct ClassifierOutput {
  std::vector<float> probabilities;
  int predicted_label = 0;
  friend bool operator==(const ClassifierOutput&, const ClassifierOutput&) = default;
};

/// Lowest index wins on ties.
int argmax(std::span<const float> values) noexcept;

/// Inference forward pass. Ids beyond max_seq_len are dropped; PAD ids are
/// masked out of attention and pooling. Throws on out-of-range ids.
ClassifierOutput forward(const TransformerClassifier& model, std::span<const TokenId> token_ids);

/// tokenize -> encode -> forward.
ClassifierOutput predict(const TransformerClassifier& model, std::string_view text,
                         const Vocabulary& vocab);

}  // namespace qrobust

#endif  // QROBUST_MODEL_HPP_
