#pragma once

#include <filesystem>
#include <string>

#include "salengine/tensor.hpp"

namespace salengine {

// Raw tensor file ("VNTS"), little-endian:
//   char[4] magic "VNTS" | u32 version = 1 | u32 ndim | ndim x u64 dims |
//   f32 payload in row-major order.
inline constexpr char kTensorMagic[4] = {'V', 'N', 'T', 'S'};
inline constexpr std::uint32_t kTensorVersion = 1;

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);

void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);

}  // namespace salengine
