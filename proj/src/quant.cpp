// SPDX-License-Identifier: Apache-2.0
#include "qrobust/quant.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <limits>

#include "qrobust/binary_io.hpp"
#include "qrobust/checkpoint.hpp"
#include "qrobust/detail/encoder.hpp"
#include "qrobust/errors.hpp"

namespace qrobust {

namespace {

constexpr std::uint8_t kFloatTag = 0;
constexpr std::uint8_t kQuantizedTag = 1;
// Keeps 255 * 255 * cols inside the int32 accumulator.
constexpr std::size_t kMaxAccumulatedCols = 32767;

// Uses the default FE_TONEAREST mode, i.e. round half to even.
double round_even(double v) noexcept { return std::nearbyint(v); }

std::int32_t clamp_q(double v) noexcept {
  return static_cast<std::int32_t>(
      std::clamp(v, double{QuantParams::kQMin}, double{QuantParams::kQMax}));
}

template <typename Model, typename OnFloat, typename OnQuant>
void visit_quantized(Model& m, OnFloat&& on_float, OnQuant&& on_quant) {
  on_float(std::string("token_embeddings"), m.token_embeddings);
  on_float(std::string("position_embeddings"), m.position_embeddings);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    on_quant(p + "attn.q", layer.wq);
    on_quant(p + "attn.k", layer.wk);
    on_quant(p + "attn.v", layer.wv);
    on_quant(p + "attn.o", layer.wo);
    on_float(p + "ln1.gain", layer.ln1_gain);
    on_float(p + "ln1.bias", layer.ln1_bias);
    on_quant(p + "ffn.w1", layer.w1);
    on_float(p + "ffn.b1", layer.b1);
    on_quant(p + "ffn.w2", layer.w2);
    on_float(p + "ffn.b2", layer.b2);
    on_float(p + "ln2.gain", layer.ln2_gain);
    on_float(p + "ln2.bias", layer.ln2_bias);
  }
  on_quant(std::string("head.weight"), m.head);
  on_float(std::string("head.bias"), m.head_bias);
}

}  // namespace

QuantParams compute_params(float d_min, float d_max) {
  if (!std::isfinite(d_min) || !std::isfinite(d_max)) {
    throw ContractViolation("quantization range must be finite");
  }
  if (d_min > d_max) throw ContractViolation("quantization range has d_min > d_max");
  const double lo = std::min(d_min, 0.0f);
  const double hi = std::max(d_max, 0.0f);
  constexpr double q_span = QuantParams::kQMax - QuantParams::kQMin;
  if (lo == hi) {
    return {1.0f, clamp_q(round_even(QuantParams::kQMin - lo))};
  }
  QuantParams p;
  p.scale = static_cast<float>((hi - lo) / q_span);
  if (!(p.scale > 0.0f)) p.scale = std::numeric_limits<float>::min();
  // q_min - d_min / S with S expanded, so exact half-steps round as written.
  p.zero_point = clamp_q(round_even(QuantParams::kQMin - lo * q_span / (hi - lo)));
  return p;
}

QuantParams params_for(std::span<const float> values) {
  if (values.empty()) return compute_params(0.0f, 0.0f);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return compute_params(*lo, *hi);
}

std::uint8_t quantize_value(float r, const QuantParams& params) noexcept {
  const double q = round_even(static_cast<double>(r / params.scale)) + params.zero_point;
  return static_cast<std::uint8_t>(clamp_q(q));
}

float dequantize_value(std::uint8_t q, const QuantParams& params) noexcept {
  return params.scale * static_cast<float>(static_cast<std::int32_t>(q) - params.zero_point);
}

QuantizedTensor quantize_tensor(const Tensor2D& r, const QuantParams& params) {
  if (!(params.scale > 0.0f) || params.zero_point < QuantParams::kQMin ||
      params.zero_point > QuantParams::kQMax) {
    throw ContractViolation("invalid quantization parameters");
  }
  QuantizedTensor q{r.rows(), r.cols(), {}, params};
  q.data.reserve(r.size());
  for (float v : r.values()) q.data.push_back(quantize_value(v, params));
  return q;
}

QuantizedTensor quantize_tensor(const Tensor2D& r) { return quantize_tensor(r, params_for(r.values())); }

Tensor2D dequantize(const QuantizedTensor& q) {
  std::vector<float> values;
  values.reserve(q.data.size());
  for (std::uint8_t v : q.data) values.push_back(dequantize_value(v, q.params));
  return Tensor2D(q.rows, q.cols, std::move(values));
}

Tensor2D quantized_linear(const Tensor2D& x, const QuantizedTensor& w, std::span<const float> bias) {
  if (x.cols() != w.rows) {
    throw ContractViolation("quantized_linear shape mismatch: " + x.shape_string() + " x " +
                            std::to_string(w.rows) + "x" + std::to_string(w.cols));
  }
  if (!bias.empty() && bias.size() != w.cols) {
    throw ContractViolation("quantized_linear bias length " + std::to_string(bias.size()) +
                            " does not match " + std::to_string(w.cols) + " outputs");
  }
  if (x.cols() > kMaxAccumulatedCols) {
    throw ContractViolation("quantized_linear inner dimension exceeds the int32 accumulator bound");
  }
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols;
  const QuantParams px = params_for(x.values());
  std::vector<std::uint8_t> qx(x.size());
  for (std::size_t i = 0; i < qx.size(); ++i) qx[i] = quantize_value(x.values()[i], px);

  std::vector<std::int32_t> col_sums(n, 0);
  for (std::size_t kk = 0; kk < k; ++kk) {
    for (std::size_t j = 0; j < n; ++j) col_sums[j] += w.data[kk * n + j];
  }

  const std::int64_t zx = px.zero_point;
  const std::int64_t zw = w.params.zero_point;
  const float out_scale = px.scale * w.params.scale;
  Tensor2D out(m, n);
  std::vector<std::int32_t> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0);
    std::int32_t row_sum = 0;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const std::int32_t a = qx[i * k + kk];
      row_sum += a;
      if (a == 0) continue;
      const std::uint8_t* wrow = w.data.data() + kk * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += a * static_cast<std::int32_t>(wrow[j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      // sum (qx - zx)(qw - zw) = sum qx*qw - zw*sum qx - zx*sum qw + k*zx*zw
      const std::int64_t total = std::int64_t{acc[j]} - zw * row_sum - zx * col_sums[j] +
                                 static_cast<std::int64_t>(k) * zx * zw;
      float v = out_scale * static_cast<float>(total);
      if (!bias.empty()) v += bias[j];
      out(i, j) = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

const QuantizedTensor& QuantizedClassifier::weight(LinearSlot slot) const {
  if (slot.kind == LinearKind::kHead) return head;
  const auto& layer = layers.at(slot.layer);
  switch (slot.kind) {
    case LinearKind::kQuery: return layer.wq;
    case LinearKind::kKey: return layer.wk;
    case LinearKind::kValue: return layer.wv;
    case LinearKind::kOutput: return layer.wo;
    case LinearKind::kFfnIn: return layer.w1;
    case LinearKind::kFfnOut: return layer.w2;
    case LinearKind::kHead: break;
  }
  return head;
}

std::span<const float> QuantizedClassifier::bias(LinearSlot slot) const {
  switch (slot.kind) {
    case LinearKind::kFfnIn: return layers.at(slot.layer).b1.values();
    case LinearKind::kFfnOut: return layers.at(slot.layer).b2.values();
    case LinearKind::kHead: return head_bias.values();
    default: return {};
  }
}

void QuantizedClassifier::for_each_tensor(
    const std::function<void(const std::string&, const Tensor2D&)>& on_float,
    const std::function<void(const std::string&, const QuantizedTensor&)>& on_quantized) const {
  visit_quantized(*this, on_float, on_quantized);
}

QuantizedClassifier quantize_model(const TransformerClassifier& model) {
  model.audit_shapes();
  QuantizedClassifier q;
  q.config = model.config;
  q.token_embeddings = model.token_embeddings;
  q.position_embeddings = model.position_embeddings;
  q.head = quantize_tensor(model.head);
  q.head_bias = model.head_bias;
  q.layers.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    QuantizedEncoderLayer ql;
    ql.wq = quantize_tensor(layer.wq);
    ql.wk = quantize_tensor(layer.wk);
    ql.wv = quantize_tensor(layer.wv);
    ql.wo = quantize_tensor(layer.wo);
    ql.ln1_gain = layer.ln1_gain;
    ql.ln1_bias = layer.ln1_bias;
    ql.w1 = quantize_tensor(layer.w1);
    ql.b1 = layer.b1;
    ql.w2 = quantize_tensor(layer.w2);
    ql.b2 = layer.b2;
    ql.ln2_gain = layer.ln2_gain;
    ql.ln2_bias = layer.ln2_bias;
    q.layers.push_back(std::move(ql));
  }
  return q;
}

ClassifierOutput forward(const QuantizedClassifier& model, std::span<const TokenId> token_ids) {
  return detail::run_encoder(model, token_ids, [&](const Tensor2D& x, LinearSlot slot) {
    return quantized_linear(x, model.weight(slot), model.bias(slot));
  });
}

ClassifierOutput predict(const QuantizedClassifier& model, std::string_view text,
                         const Vocabulary& vocab) {
  const auto tokens = tokenize(text);
  const auto ids = vocab.encode(tokens);
  return forward(model, ids);
}

// ---------------------------------------------------------------------------

std::string serialize_checkpoint(const QuantizedClassifier& model) {
  ByteWriter w;
  detail::write_checkpoint_header(w, kQuantizedCheckpointVersion, model.config);
  visit_quantized(
      model,
      [&](const std::string& name, const Tensor2D& t) {
        detail::write_tensor_header(w, name, t.rows(), t.cols());
        w.u8(kFloatTag);
        for (float v : t.values()) w.f32(v);
      },
      [&](const std::string& name, const QuantizedTensor& q) {
        detail::write_tensor_header(w, name, q.rows, q.cols);
        w.u8(kQuantizedTag);
        w.f32(q.params.scale);
        w.u8(static_cast<std::uint8_t>(q.params.zero_point));
        w.raw(std::string_view(reinterpret_cast<const char*>(q.data.data()), q.data.size()));
      });
  return w.take();
}

QuantizedClassifier parse_quantized_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  try {
    const ModelConfig config = detail::read_checkpoint_header(r, kQuantizedCheckpointVersion);
    // Every element occupies at least one byte.
    if (detail::element_count(config) > r.remaining()) throw ByteReader::TruncatedInput{};
    // Shapes come from a zero float model with the same config.
    const TransformerClassifier shapes = TransformerClassifier::zeros(config);
    QuantizedClassifier q = quantize_model(shapes);
    auto wrong_tag = [&](const std::string& name, std::uint8_t tag) {
      return CheckpointError(CheckpointErrorKind::kShapeMismatch,
                             "tensor " + name + " has unexpected dtype tag " + std::to_string(tag));
    };
    visit_quantized(
        q,
        [&](const std::string& name, Tensor2D& t) {
          detail::read_tensor_header(r, name, t);
          if (const auto tag = r.u8(); tag != kFloatTag) throw wrong_tag(name, tag);
          for (float& v : t.values()) v = r.f32();
        },
        [&](const std::string& name, QuantizedTensor& t) {
          detail::read_tensor_header(r, name, Tensor2D(t.rows, t.cols));
          if (const auto tag = r.u8(); tag != kQuantizedTag) throw wrong_tag(name, tag);
          t.params.scale = r.f32();
          t.params.zero_point = r.u8();
          if (!(t.params.scale > 0.0f) || !std::isfinite(t.params.scale)) {
            throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                                  "tensor " + name + " has a non-positive scale");
          }
          auto payload = r.raw(t.data.size());
          std::copy(payload.begin(), payload.end(), reinterpret_cast<char*>(t.data.data()));
        });
    if (r.remaining() != 0) {
      throw CheckpointError(CheckpointErrorKind::kTrailingBytes,
                            std::to_string(r.remaining()) + " trailing bytes after last tensor");
    }
    return q;
  } catch (const ByteReader::TruncatedInput&) {
    throw CheckpointError(CheckpointErrorKind::kTruncated,
                          "checkpoint truncated at byte " + std::to_string(r.position()));
  }
}

std::size_t save_checkpoint(const QuantizedClassifier& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  write_file(path, bytes);
  return bytes.size();
}

QuantizedClassifier load_quantized_checkpoint(const std::filesystem::path& path) {
  return parse_quantized_checkpoint(read_file(path));
}

std::uintmax_t model_size(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  return size;
}

double size_ratio(const std::filesystem::path& quantized_path,
                  const std::filesystem::path& original_path) {
  const auto original = model_size(original_path);
  if (original == 0) throw IoError(original_path.string() + " is empty");
  return static_cast<double>(model_size(quantized_path)) / static_cast<double>(original);
}

}  // namespace qrobust
