#include "salengine/tensor_io.hpp"

#include <limits>

#include "binary_io.hpp"
#include "salengine/error.hpp"

namespace salengine {

std::string encode_tensor(const Tensor& t) {
  detail::ByteWriter w;
  w.bytes(std::string_view(kTensorMagic, 4));
  w.u32(kTensorVersion);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.dims()) w.u64(static_cast<std::uint64_t>(d));
  w.f32s(t.data());
  return std::move(w.str());
}

Tensor decode_tensor(std::string_view bytes) {
  detail::ByteReader r(bytes, "VNTS");
  if (r.bytes(4) != std::string_view(kTensorMagic, 4)) {
    throw FormatError("VNTS: bad magic");
  }
  if (auto v = r.u32(); v != kTensorVersion) {
    throw FormatError("VNTS: unsupported version " + std::to_string(v));
  }
  const std::uint32_t ndim = r.u32();
  Shape dims;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint64_t d = r.u64();
    if (d > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) ||
        (d != 0 && count > r.remaining() / 4 / d + 1)) {
      throw CorruptionError("VNTS: extent " + std::to_string(d) + " exceeds file size");
    }
    count *= d;
    dims.push_back(static_cast<std::int64_t>(d));
  }
  if (count * 4 > r.remaining()) {
    throw CorruptionError("VNTS: truncated payload");
  }
  Tensor t(dims);
  r.f32s(t.mutable_data());
  if (r.remaining() != 0) throw FormatError("VNTS: trailing bytes after payload");
  return t;
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  detail::write_file(path, encode_tensor(t));
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  return decode_tensor(detail::read_file(path));
}

}  // namespace salengine
