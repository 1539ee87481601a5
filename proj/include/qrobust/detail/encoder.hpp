// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_DETAIL_ENCODER_HPP_
#define QROBUST_DETAIL_ENCODER_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qrobust/errors.hpp"
#include "qrobust/model.hpp"

namespace qrobust::detail {

/// Rows of the input that survive truncation and PAD masking.
struct ActiveTokens {
  std::vector<TokenId> ids;
  std::vector<std::size_t> positions;
};

inline ActiveTokens active_tokens(const ModelConfig& config, std::span<const TokenId> token_ids) {
  ActiveTokens active;
  const std::size_t n = std::min<std::size_t>(token_ids.size(), config.max_seq_len);
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    const TokenId id = token_ids[i];
    if (id < 0 || static_cast<std::uint32_t>(id) >= config.vocab_size) {
      throw ContractViolation("token id " + std::to_string(id) + " at position " +
                              std::to_string(i) + " outside vocabulary of size " +
                              std::to_string(config.vocab_size));
    }
    if (i < n && id != Vocabulary::kPad) {
      active.ids.push_back(id);
      active.positions.push_back(i);
    }
  }
  return active;
}

/// Scaled dot-product attention over `num_heads` column blocks. When
/// `weights_out` is non-null it receives the per-head softmax matrices.
inline Tensor2D multi_head_attention(const Tensor2D& q, const Tensor2D& k, const Tensor2D& v,
                                     std::size_t num_heads,
                                     std::vector<Tensor2D>* weights_out = nullptr) {
  const std::size_t n = q.rows();
  const std::size_t head_dim = q.cols() / num_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
  Tensor2D context(n, q.cols());
  if (weights_out) weights_out->clear();
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t off = h * head_dim;
    Tensor2D weights(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        float dot = 0.0f;
        for (std::size_t c = 0; c < head_dim; ++c) dot += q(i, off + c) * k(j, off + c);
        weights(i, j) = dot * scale;
      }
      softmax_inplace(weights.row(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const float a = weights(i, j);
        for (std::size_t c = 0; c < head_dim; ++c) context(i, off + c) += a * v(j, off + c);
      }
    }
    if (weights_out) weights_out->push_back(std::move(weights));
  }
  return context;
}

inline Tensor2D add(const Tensor2D& a, const Tensor2D& b) {
  Tensor2D out = a;
  auto dst = out.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

inline Tensor2D mean_rows(const Tensor2D& x) {
  Tensor2D out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += x(r, c);
  }
  const float inv = 1.0f / static_cast<float>(x.rows());
  for (float& v : out.values()) v *= inv;
  return out;
}

/// Shared inference path. `Params` provides the float residue (embeddings,
/// layer norms); `linear(x, slot)` computes x * W + b for each matmul weight,
/// in float or through the quantized kernel.
template <typename Params, typename Linear>
ClassifierOutput run_encoder(const Params& params, std::span<const TokenId> token_ids,
                             Linear&& linear) {
  const ModelConfig& config = params.config;
  const ActiveTokens active = active_tokens(config, token_ids);
  Tensor2D pooled(1, config.embed_dim);
  if (!active.ids.empty()) {
    Tensor2D x(active.ids.size(), config.embed_dim);
    for (std::size_t i = 0; i < active.ids.size(); ++i) {
      auto tok = params.token_embeddings.row(static_cast<std::size_t>(active.ids[i]));
      auto pos = params.position_embeddings.row(active.positions[i]);
      auto dst = x.row(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = tok[c] + pos[c];
    }
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      const auto& layer = params.layers[l];
      Tensor2D q = linear(x, LinearSlot{l, LinearKind::kQuery});
      Tensor2D k = linear(x, LinearSlot{l, LinearKind::kKey});
      Tensor2D v = linear(x, LinearSlot{l, LinearKind::kValue});
      Tensor2D context = multi_head_attention(q, k, v, config.num_heads);
      Tensor2D attended = linear(context, LinearSlot{l, LinearKind::kOutput});
      Tensor2D h1 = layer_norm(add(x, attended), layer.ln1_gain.values(), layer.ln1_bias.values(),
                               kLayerNormEpsilon);
      Tensor2D hidden = gelu(linear(h1, LinearSlot{l, LinearKind::kFfnIn}));
      Tensor2D ffn = linear(hidden, LinearSlot{l, LinearKind::kFfnOut});
      x = layer_norm(add(h1, ffn), layer.ln2_gain.values(), layer.ln2_bias.values(),
                     kLayerNormEpsilon);
    }
    pooled = mean_rows(x);
  }
  Tensor2D logits = linear(pooled, LinearSlot{0, LinearKind::kHead});
  ClassifierOutput out;
  out.probabilities = softmax(logits.row(0));
  out.predicted_label = argmax(out.probabilities);
  return out;
}

}  // namespace qrobust::detail

#endif  // QROBUST_DETAIL_ENCODER_HPP_
