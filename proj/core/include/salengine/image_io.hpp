#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "salengine/tensor.hpp"

namespace salengine {

/// Binary PGM (P5) or PPM (P6), maxval 1..65535. Values are scaled to [0, 1].
/// Grayscale images load as [H, W], colour images as [3, H, W].
Tensor decode_pnm(std::string_view bytes);
Tensor read_pnm(const std::filesystem::path& path);

/// RGB frame as [3, H, W]. A grayscale file is replicated to three channels.
Tensor read_frame(const std::filesystem::path& path);

/// 8-bit P5 encoding of a map whose last two axes are H, W (leading axes must
/// be singleton). Values are clamped to [0, 1] and rounded to 0..255.
std::string encode_pgm(const Tensor& map);
void write_pgm(const std::filesystem::path& path, const Tensor& map);

/// 8-bit P6 encoding of a [3, H, W] frame.
std::string encode_ppm(const Tensor& frame);
void write_ppm(const std::filesystem::path& path, const Tensor& frame);

}  // namespace salengine
