#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "salengine/tensor.hpp"

namespace salengine {

using Triple = std::array<std::int64_t, 3>;  // (t, h, w)

/// Geometry of a 3D convolution. Weight dims are
/// [out_ch, in_ch / groups, kt, kh, kw]; bias (when present) is [out_ch].
struct Conv3dParams {
  std::int64_t in_ch = 1;
  std::int64_t out_ch = 1;
  std::int64_t groups = 1;
  Triple kernel{1, 1, 1};
  Triple stride{1, 1, 1};
  Triple padding{0, 0, 0};
  Triple dilation{1, 1, 1};
  bool has_bias = true;

  /// Throws ConfigError if the channel counts are not group-divisible or any
  /// extent is non-positive.
  void validate() const;
  Shape weight_dims() const;
  std::int64_t parameter_count() const;
  /// Output [C, T, H, W] for an input of `in` ([C, T, H, W]).
  Shape output_dims(const Shape& in) const;

  friend bool operator==(const Conv3dParams&, const Conv3dParams&) = default;
};

/// Grouped 3D cross-correlation over x = [C, T, H, W].
///
/// Each output element accumulates in a fixed order (input channel, kt, kh,
/// kw, all ascending) starting from its bias, so results do not depend on the
/// thread count.
Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor* bias,
              const Conv3dParams& p);

/// ShuffleNet channel permutation: view channels as (g, C/g), transpose,
/// flatten. out[j * g + k] = in[k * (C/g) + j].
Tensor channel_shuffle(const Tensor& x, std::int64_t groups);

/// Source channel for every output channel of channel_shuffle.
std::vector<std::int64_t> channel_shuffle_permutation(std::int64_t channels,
                                                      std::int64_t groups);

/// Trilinear interpolation over (T, H, W) with align_corners = false: output
/// index i samples the source at (i + 0.5) * in / out - 0.5, clamped at 0.
Tensor trilinear_upsample(const Tensor& x, const Triple& out_size);
Tensor trilinear_upsample_scale(const Tensor& x, const Triple& scale);

/// Max over temporal bins [floor(i*T/t_out), floor((i+1)*T/t_out)).
Tensor adaptive_max_pool_t(const Tensor& x, std::int64_t t_out);

/// Windowed max with implicit -inf padding.
Tensor max_pool3d(const Tensor& x, const Triple& kernel, const Triple& stride,
                  const Triple& padding);
Shape max_pool3d_output_dims(const Shape& in, const Triple& kernel,
                             const Triple& stride, const Triple& padding);

Tensor relu(Tensor x);
Tensor sigmoid(Tensor x);

/// Elementwise a + b (residual connections).
Tensor add(const Tensor& a, const Tensor& b);

}  // namespace salengine
