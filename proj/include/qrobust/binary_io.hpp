// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_BINARY_IO_HPP_
#define QROBUST_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

namespace qrobust {

/// Appends little-endian encoded values to a byte string.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view bytes) { buf_.append(bytes); }
  /// u16 length prefix followed by the bytes.
  void str16(std::string_view s);

  const std::string& bytes() const noexcept { return buf_; }
  std::string take() noexcept { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

/// Reads little-endian values; throws TruncatedInput when data runs out.
class ByteReader {
 public:
  struct TruncatedInput {};

  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view raw(std::size_t n);
  std::string str16() { return std::string(raw(u16())); }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  std::uint64_t get_le(int width);
  std::string_view data_;
  std::size_t pos_ = 0;
};

/// Whole-file helpers; both throw IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Hex FNV-1a digest of a byte string, used for manifests and cache keys.
std::string content_hash(std::string_view bytes);

}  // namespace qrobust

#endif  // QROBUST_BINARY_IO_HPP_
