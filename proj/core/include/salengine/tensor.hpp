#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace salengine {

/// Tensor extents, outermost first. Feature maps are [C, T, H, W]; conv
/// weights are [out_ch, in_ch / groups, kt, kh, kw].
using Shape = std::vector<std::int64_t>;

std::int64_t num_elements(const Shape& dims);
std::string to_string(const Shape& dims);

/// Dense row-major float32 array.
///
/// A Tensor is a value: copies are deep and a const Tensor is safe to share
/// between threads. Kernels build their outputs through mutable_data() before
/// handing them out.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor. Throws DimensionError on a negative extent.
  explicit Tensor(Shape dims);
  Tensor(Shape dims, std::vector<float> data);

  static Tensor full(Shape dims, float value);

  const Shape& dims() const noexcept { return dims_; }
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const noexcept { return dims_.size(); }
  std::int64_t numel() const noexcept {
    return static_cast<std::int64_t>(data_.size());
  }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> mutable_data() noexcept { return data_; }
  const float* raw() const noexcept { return data_.data(); }
  float* raw() noexcept { return data_.data(); }

  float operator[](std::size_t i) const noexcept { return data_[i]; }
  float& operator[](std::size_t i) noexcept { return data_[i]; }

  /// Same flat data under new extents. The rvalue overload reuses storage.
  Tensor reshape(Shape new_dims) const&;
  Tensor reshape(Shape new_dims) &&;

  std::vector<float> release() && { return std::move(data_); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape dims_;
  std::vector<float> data_;
};

Tensor reshape(const Tensor& t, Shape new_dims);

/// Channel-wise concatenation along axis 0; `a` channels come first.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor concat_channels(std::span<const Tensor* const> parts);

/// Channels [begin, begin + count) of `t`.
Tensor slice_channels(const Tensor& t, std::int64_t begin, std::int64_t count);

/// out[i] = (a[i] + b[i]) / 2.
Tensor pixelwise_mean(const Tensor& a, const Tensor& b);

}  // namespace salengine
