// SPDX-License-Identifier: Apache-2.0
#include "qrobust/checkpoint.hpp"

#include "qrobust/errors.hpp"

namespace qrobust {

namespace detail {

void write_checkpoint_header(ByteWriter& w, std::uint16_t version, const ModelConfig& config) {
  w.raw(std::string_view(kCheckpointMagic, 4));
  w.u16(version);
  w.u32(config.vocab_size);
  w.u32(config.max_seq_len);
  w.u32(config.embed_dim);
  w.u32(config.num_layers);
  w.u32(config.num_heads);
  w.u32(config.ffn_dim);
  w.u32(config.num_classes);
  w.u32(static_cast<std::uint32_t>(config.seed & 0xffffffffULL));
  w.u32(static_cast<std::uint32_t>(config.seed >> 32));
}

ModelConfig read_checkpoint_header(ByteReader& r, std::uint16_t expected_version) {
  if (r.raw(4) != std::string_view(kCheckpointMagic, 4)) {
    throw CheckpointError(CheckpointErrorKind::kBadMagic, "not a QGCK checkpoint");
  }
  const std::uint16_t version = r.u16();
  if (version != expected_version) {
    throw CheckpointError(CheckpointErrorKind::kVersionMismatch,
                          "checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(expected_version));
  }
  ModelConfig config;
  config.vocab_size = r.u32();
  config.max_seq_len = r.u32();
  config.embed_dim = r.u32();
  config.num_layers = r.u32();
  config.num_heads = r.u32();
  config.ffn_dim = r.u32();
  config.num_classes = r.u32();
  const std::uint64_t lo = r.u32();
  const std::uint64_t hi = r.u32();
  config.seed = lo | (hi << 32);
  config.dropout = 0.0f;  // not persisted
  try {
    config.validate();
  } catch (const ContractViolation& e) {
    throw CheckpointError(CheckpointErrorKind::kInvalidConfig, e.what());
  }
  return config;
}

void write_tensor_header(ByteWriter& w, const std::string& name, std::size_t rows,
                         std::size_t cols) {
  w.str16(name);
  w.u32(static_cast<std::uint32_t>(rows));
  w.u32(static_cast<std::uint32_t>(cols));
}

void read_tensor_header(ByteReader& r, const std::string& expected_name, const Tensor2D& expected) {
  const std::string name = r.str16();
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (name != expected_name || rows != expected.rows() || cols != expected.cols()) {
    throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                          "tensor " + name + " " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " does not match expected " + expected_name +
                              " " + expected.shape_string());
  }
}

std::uint64_t element_count(const ModelConfig& c) {
  const std::uint64_t d = c.embed_dim, f = c.ffn_dim;
  const std::uint64_t per_layer = 4 * d * d + 2 * d * f + f + d + 4 * d;
  return std::uint64_t{c.vocab_size} * d + std::uint64_t{c.max_seq_len} * d +
         std::uint64_t{c.num_layers} * per_layer + d * c.num_classes + c.num_classes;
}

}  // namespace detail

std::string serialize_checkpoint(const TransformerClassifier& model) {
  model.audit_shapes();
  ByteWriter w;
  detail::write_checkpoint_header(w, kFloatCheckpointVersion, model.config);
  model.for_each_tensor([&](const std::string& name, const Tensor2D& t) {
    detail::write_tensor_header(w, name, t.rows(), t.cols());
    for (float v : t.values()) w.f32(v);
  });
  return w.take();
}

TransformerClassifier parse_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  try {
    const ModelConfig config = detail::read_checkpoint_header(r, kFloatCheckpointVersion);
    if (detail::element_count(config) * 4 > r.remaining()) throw ByteReader::TruncatedInput{};
    TransformerClassifier model = TransformerClassifier::zeros(config);
    model.for_each_tensor([&](const std::string& name, Tensor2D& t) {
      detail::read_tensor_header(r, name, t);
      for (float& v : t.values()) v = r.f32();
      if (!all_finite(t.values())) {
        throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                              "tensor " + name + " holds non-finite values");
      }
    });
    if (r.remaining() != 0) {
      throw CheckpointError(CheckpointErrorKind::kTrailingBytes,
                            std::to_string(r.remaining()) + " trailing bytes after last tensor");
    }
    return model;
  } catch (const ByteReader::TruncatedInput&) {
    throw CheckpointError(CheckpointErrorKind::kTruncated,
                          "checkpoint truncated at byte " + std::to_string(r.position()));
  }
}

std::size_t save_checkpoint(const TransformerClassifier& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  write_file(path, bytes);
  return bytes.size();
}

TransformerClassifier load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace qrobust
