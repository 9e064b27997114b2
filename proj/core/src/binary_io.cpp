#include "binary_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>

namespace salengine::detail {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void ByteWriter::f32s(std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  } else {
    for (float v : values) u32(std::bit_cast<std::uint32_t>(v));
  }
}

std::string_view ByteReader::bytes(std::size_t n) {
  if (n > remaining()) {
    throw CorruptionError(what_ + ": truncated at byte " + std::to_string(pos_) +
                          " (need " + std::to_string(n) + ", have " +
                          std::to_string(remaining()) + ")");
  }
  auto s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::uint64_t ByteReader::get_le(int n) {
  auto s = bytes(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
  }
  return v;
}

void ByteReader::f32s(std::span<float> out) {
  auto s = bytes(out.size_bytes());
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), s.data(), s.size());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[4 * i + b])) << (8 * b);
      }
      out[i] = std::bit_cast<float>(v);
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace salengine::detail
