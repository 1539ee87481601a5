// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_CHECKPOINT_HPP_
#define QROBUST_CHECKPOINT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qrobust/binary_io.hpp"
#include "qrobust/model.hpp"

namespace qrobust {

// Container layout, all integers little-endian:
//   "QGCK" | u16 version | config: vocab_size, max_seq_len, embed_dim,
//   num_layers, num_heads, ffn_dim, num_classes, seed_lo, seed_hi (u32 each)
//   then per tensor in checkpoint order:
//   u16 name length | name | u32 rows | u32 cols | payload
// Version 1 payloads are raw float32. Version 2 prefixes each payload with a
// dtype byte: 0 = float32 values, 1 = f32 scale, u8 zero point, rows*cols bytes.
inline constexpr char kCheckpointMagic[4] = {'Q', 'G', 'C', 'K'};
inline constexpr std::uint16_t kFloatCheckpointVersion = 1;
inline constexpr std::uint16_t kQuantizedCheckpointVersion = 2;

enum class CheckpointErrorKind {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kInvalidConfig,
  kShapeMismatch,
  kTrailingBytes,
};

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const noexcept { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

std::string serialize_checkpoint(const TransformerClassifier& model);
TransformerClassifier parse_checkpoint(std::string_view bytes);

/// Returns the number of bytes written, the "binary size" of the model.
std::size_t save_checkpoint(const TransformerClassifier& model, const std::filesystem::path& path);
TransformerClassifier load_checkpoint(const std::filesystem::path& path);

namespace detail {

void write_checkpoint_header(ByteWriter& w, std::uint16_t version, const ModelConfig& config);
/// Validates magic and version, returns the decoded config.
ModelConfig read_checkpoint_header(ByteReader& r, std::uint16_t expected_version);
/// Reads name, rows and cols, checking them against `expected`.
void read_tensor_header(ByteReader& r, const std::string& expected_name, const Tensor2D& expected);
void write_tensor_header(ByteWriter& w, const std::string& name, std::size_t rows, std::size_t cols);
/// Total parameter count implied by `config`; bounds allocation before parsing.
std::uint64_t element_count(const ModelConfig& config);

}  // namespace detail

}  // namespace qrobust

#endif  // QROBUST_CHECKPOINT_HPP_
