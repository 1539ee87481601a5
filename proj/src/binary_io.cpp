// SPDX-License-Identifier: Apache-2.0
#include "qrobust/binary_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qrobust/errors.hpp"
#include "qrobust/random.hpp"

namespace qrobust {

void ByteWriter::str16(std::string_view s) {
  u16(static_cast<std::uint16_t>(s.size()));
  raw(s);
}

std::string_view ByteReader::raw(std::size_t n) {
  if (remaining() < n) throw TruncatedInput{};
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint64_t ByteReader::get_le(int width) {
  auto bytes = raw(static_cast<std::size_t>(width));
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string content_hash(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace qrobust
