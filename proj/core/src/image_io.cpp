#include "salengine/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "binary_io.hpp"
#include "salengine/error.hpp"

namespace salengine {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::string_view s) : s_(s) {}

  std::int64_t number(const char* what) {
    skip_space_and_comments();
    std::int64_t v = 0;
    std::size_t digits = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + (s_[pos_++] - '0');
      if (v > (1 << 20)) throw FormatError(std::string("PNM: ") + what + " too large");
      ++digits;
    }
    if (digits == 0) throw FormatError(std::string("PNM: missing ") + what);
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= s_.size() || !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      throw FormatError("PNM: malformed header");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 2;
};

const Tensor& check_map(const Tensor& map) {
  const Shape& d = map.dims();
  if (d.size() < 2) throw DimensionError("PGM: map must be at least 2-D, got " + to_string(d));
  for (std::size_t i = 0; i + 2 < d.size(); ++i) {
    if (d[i] != 1) throw DimensionError("PGM: map has non-singleton axis in " + to_string(d));
  }
  return map;
}

char to_byte(float v) {
  const float c = std::clamp(std::isnan(v) ? 0.0f : v, 0.0f, 1.0f);
  return static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f)));
}

}  // namespace

Tensor decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("PNM: expected binary P5 or P6");
  }
  const bool colour = bytes[1] == '6';
  HeaderParser h(bytes);
  const std::int64_t width = h.number("width");
  const std::int64_t height = h.number("height");
  const std::int64_t maxval = h.number("maxval");
  if (width < 1 || height < 1) throw FormatError("PNM: empty image");
  if (maxval < 1 || maxval > 65535) throw FormatError("PNM: maxval out of range");
  const std::size_t start = h.raster_start();

  const std::int64_t channels = colour ? 3 : 1;
  const std::int64_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::int64_t count = width * height * channels;
  if (bytes.size() - start < static_cast<std::size_t>(count * sample_bytes)) {
    throw CorruptionError("PNM: raster truncated");
  }
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  Tensor out(colour ? Shape{3, height, width} : Shape{height, width});
  float* o = out.raw();
  const std::int64_t plane = width * height;
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::int64_t px = 0; px < plane; ++px) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const std::int64_t k = (px * channels + c) * sample_bytes;
      const unsigned v = sample_bytes == 2 ? (raster[k] << 8u) | raster[k + 1] : raster[k];
      o[c * plane + px] = static_cast<float>(std::min<double>(v * scale, 1.0));
    }
  }
  return out;
}

Tensor read_pnm(const std::filesystem::path& path) {
  try {
    return decode_pnm(detail::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

Tensor read_frame(const std::filesystem::path& path) {
  Tensor img = read_pnm(path);
  if (img.rank() == 3) return img;
  const Tensor* planes[3] = {&img, &img, &img};
  const Shape d = img.dims();
  return concat_channels(std::span<const Tensor* const>(planes))
      .reshape({3, d[0], d[1]});
}

std::string encode_pgm(const Tensor& map) {
  check_map(map);
  const Shape& d = map.dims();
  const std::int64_t h = d[d.size() - 2], w = d[d.size() - 1];
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(h * w));
  for (float v : map.data()) out.push_back(to_byte(v));
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& map) {
  detail::write_file(path, encode_pgm(map));
}

std::string encode_ppm(const Tensor& frame) {
  if (frame.rank() != 3 || frame.dim(0) != 3) {
    throw DimensionError("PPM: expected [3,H,W], got " + to_string(frame.dims()));
  }
  const std::int64_t h = frame.dim(1), w = frame.dim(2), plane = h * w;
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(3 * plane));
  for (std::int64_t px = 0; px < plane; ++px) {
    for (std::int64_t c = 0; c < 3; ++c) out.push_back(to_byte(frame.raw()[c * plane + px]));
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& frame) {
  detail::write_file(path, encode_ppm(frame));
}

}  // namespace salengine
