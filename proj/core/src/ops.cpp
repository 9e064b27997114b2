#include "salengine/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "salengine/error.hpp"

namespace salengine {

namespace {

std::string triple_str(const Triple& t) {
  return "(" + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
         std::to_string(t[2]) + ")";
}

void require_feature_map(const Tensor& x, const char* op) {
  if (x.rank() != 4) {
    throw DimensionError(std::string(op) + ": expected [C,T,H,W], got " +
                         to_string(x.dims()));
  }
}

// floor((n + 2p - d*(k-1) - 1) / s) + 1, or <= 0 when the window does not fit.
std::int64_t window_count(std::int64_t n, std::int64_t k, std::int64_t s,
                          std::int64_t p, std::int64_t d) {
  const std::int64_t span = n + 2 * p - d * (k - 1) - 1;
  if (span < 0) return 0;
  return span / s + 1;
}

}  // namespace

void Conv3dParams::validate() const {
  if (in_ch <= 0 || out_ch <= 0 || groups <= 0) {
    throw ConfigError("conv3d: channels and groups must be positive");
  }
  if (in_ch % groups != 0 || out_ch % groups != 0) {
    throw ConfigError("conv3d: groups=" + std::to_string(groups) +
                      " does not divide in_ch=" + std::to_string(in_ch) +
                      " and out_ch=" + std::to_string(out_ch));
  }
  for (int i = 0; i < 3; ++i) {
    if (kernel[i] <= 0 || stride[i] <= 0 || dilation[i] <= 0 || padding[i] < 0) {
      throw ConfigError("conv3d: bad geometry kernel=" + triple_str(kernel) +
                        " stride=" + triple_str(stride) +
                        " padding=" + triple_str(padding) +
                        " dilation=" + triple_str(dilation));
    }
  }
}

Shape Conv3dParams::weight_dims() const {
  return {out_ch, in_ch / groups, kernel[0], kernel[1], kernel[2]};
}

std::int64_t Conv3dParams::parameter_count() const {
  return out_ch * (in_ch / groups) * kernel[0] * kernel[1] * kernel[2] +
         (has_bias ? out_ch : 0);
}

Shape Conv3dParams::output_dims(const Shape& in) const {
  validate();
  if (in.size() != 4) {
    throw DimensionError("conv3d: expected [C,T,H,W], got " + to_string(in));
  }
  if (in[0] != in_ch) {
    throw DimensionError("conv3d: input has " + std::to_string(in[0]) +
                         " channels, expected " + std::to_string(in_ch));
  }
  Shape out{out_ch, 0, 0, 0};
  for (int i = 0; i < 3; ++i) {
    out[i + 1] = window_count(in[i + 1], kernel[i], stride[i], padding[i], dilation[i]);
    if (out[i + 1] <= 0) {
      throw ConfigError("conv3d: kernel " + triple_str(kernel) +
                        " does not fit input " + to_string(in));
    }
  }
  return out;
}

Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor* bias,
              const Conv3dParams& p) {
  const Shape od = p.output_dims(x.dims());
  if (weight.dims() != p.weight_dims()) {
    throw DimensionError("conv3d: weight dims " + to_string(weight.dims()) +
                         ", expected " + to_string(p.weight_dims()));
  }
  if (p.has_bias && (bias == nullptr || bias->dims() != Shape{p.out_ch})) {
    throw DimensionError("conv3d: bias must have dims [" +
                         std::to_string(p.out_ch) + "]");
  }

  const std::int64_t T = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t OT = od[1], OH = od[2], OW = od[3];
  const auto [KT, KH, KW] = p.kernel;
  const auto [ST, SH, SW] = p.stride;
  const auto [PT, PH, PW] = p.padding;
  const auto [DT, DH, DW] = p.dilation;
  const std::int64_t cin_g = p.in_ch / p.groups;
  const std::int64_t cout_g = p.out_ch / p.groups;
  const std::int64_t plane_in = T * H * W;
  const std::int64_t plane_out = OH * OW;
  const bool pointwise = KT == 1 && KH == 1 && KW == 1 && ST == 1 && SH == 1 &&
                         SW == 1 && PT == 0 && PH == 0 && PW == 0;

  Tensor out(od);
  const float* src = x.raw();
  const float* wts = weight.raw();
  const float* b = p.has_bias ? bias->raw() : nullptr;
  float* dst_all = out.raw();

  // Columns ow whose input column ow*SW - PW + kw*DW lies inside [0, W).
  std::vector<std::int64_t> ow_lo(static_cast<std::size_t>(KW)), ow_hi(static_cast<std::size_t>(KW));
  for (std::int64_t kw = 0; kw < KW; ++kw) {
    const std::int64_t off = kw * DW - PW;
    const std::int64_t lo = off >= 0 ? 0 : (-off + SW - 1) / SW;
    const std::int64_t top = W - 1 - off;
    const std::int64_t hi = top < 0 ? 0 : std::min(OW, top / SW + 1);
    ow_lo[static_cast<std::size_t>(kw)] = lo;
    ow_hi[static_cast<std::size_t>(kw)] = std::max(lo, hi);
  }

  const std::int64_t jobs = p.out_ch * OT;
#pragma omp parallel for schedule(static)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::int64_t o = job / OT;
    const std::int64_t ot = job % OT;
    const std::int64_t g = o / cout_g;
    float* dst = dst_all + (o * OT + ot) * plane_out;
    std::fill(dst, dst + plane_out, b ? b[o] : 0.0f);

    for (std::int64_t ic = 0; ic < cin_g; ++ic) {
      const float* src_c = src + (g * cin_g + ic) * plane_in;
      const float* wk = wts + (o * cin_g + ic) * KT * KH * KW;
      if (pointwise) {
        const float wv = wk[0];
        const float* s = src_c + ot * plane_out;
        for (std::int64_t i = 0; i < plane_out; ++i) dst[i] += wv * s[i];
        continue;
      }
      for (std::int64_t kt = 0; kt < KT; ++kt) {
        const std::int64_t it = ot * ST - PT + kt * DT;
        if (it < 0 || it >= T) continue;
        const float* src_t = src_c + it * H * W;
        for (std::int64_t kh = 0; kh < KH; ++kh) {
          for (std::int64_t kw = 0; kw < KW; ++kw) {
            const float wv = wk[(kt * KH + kh) * KW + kw];
            const std::int64_t lo = ow_lo[static_cast<std::size_t>(kw)];
            const std::int64_t hi = ow_hi[static_cast<std::size_t>(kw)];
            const std::int64_t off = kw * DW - PW;
            for (std::int64_t oh = 0; oh < OH; ++oh) {
              const std::int64_t ih = oh * SH - PH + kh * DH;
              if (ih < 0 || ih >= H) continue;
              const float* row = src_t + ih * W;
              float* drow = dst + oh * OW;
              if (SW == 1) {
                const float* base = row + off;
                for (std::int64_t ow = lo; ow < hi; ++ow) drow[ow] += wv * base[ow];
              } else {
                for (std::int64_t ow = lo; ow < hi; ++ow) {
                  drow[ow] += wv * row[ow * SW + off];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<std::int64_t> channel_shuffle_permutation(std::int64_t channels,
                                                      std::int64_t groups) {
  if (groups <= 0 || channels <= 0 || channels % groups != 0) {
    throw ConfigError("channel_shuffle: groups=" + std::to_string(groups) +
                      " does not divide C=" + std::to_string(channels));
  }
  const std::int64_t per = channels / groups;
  std::vector<std::int64_t> src(static_cast<std::size_t>(channels));
  for (std::int64_t k = 0; k < groups; ++k) {
    for (std::int64_t j = 0; j < per; ++j) {
      src[static_cast<std::size_t>(j * groups + k)] = k * per + j;
    }
  }
  return src;
}

Tensor channel_shuffle(const Tensor& x, std::int64_t groups) {
  if (x.rank() == 0) throw DimensionError("channel_shuffle of rank-0 tensor");
  const auto perm = channel_shuffle_permutation(x.dim(0), groups);
  const std::int64_t plane = x.numel() / x.dim(0);
  Tensor out(x.dims());
  for (std::size_t o = 0; o < perm.size(); ++o) {
    const float* s = x.raw() + perm[o] * plane;
    std::copy(s, s + plane, out.raw() + static_cast<std::int64_t>(o) * plane);
  }
  return out;
}

namespace {

struct AxisTaps {
  std::vector<std::int64_t> i0, i1;
  std::vector<float> frac;
};

AxisTaps linear_taps(std::int64_t in, std::int64_t out) {
  AxisTaps t;
  t.i0.resize(static_cast<std::size_t>(out));
  t.i1.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::int64_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const auto k = static_cast<std::size_t>(i);
    t.i0[k] = lo;
    t.i1[k] = std::min(lo + 1, in - 1);
    t.frac[k] = t.i1[k] == lo ? 0.0f : static_cast<float>(src - static_cast<double>(lo));
  }
  return t;
}

// a + f * (b - a): exact when a == b, so constant regions stay constant.
inline float lerp(float a, float b, float f) { return a + f * (b - a); }

}  // namespace

Tensor trilinear_upsample(const Tensor& x, const Triple& out_size) {
  require_feature_map(x, "trilinear_upsample");
  for (auto s : out_size) {
    if (s <= 0) throw ConfigError("trilinear_upsample: non-positive target " + triple_str(out_size));
  }
  const std::int64_t C = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto [OT, OH, OW] = out_size;
  if (OT == T && OH == H && OW == W) return x;

  const AxisTaps tt = linear_taps(T, OT), th = linear_taps(H, OH), tw = linear_taps(W, OW);
  Tensor out({C, OT, OH, OW});
  const std::int64_t jobs = C * OT;
#pragma omp parallel for schedule(static)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::int64_t c = job / OT;
    const auto ot = static_cast<std::size_t>(job % OT);
    const float* base = x.raw() + c * T * H * W;
    const float* p0 = base + tt.i0[ot] * H * W;
    const float* p1 = base + tt.i1[ot] * H * W;
    const float ft = tt.frac[ot];
    float* dst = out.raw() + job * OH * OW;
    for (std::size_t oh = 0; oh < static_cast<std::size_t>(OH); ++oh) {
      const std::int64_t h0 = th.i0[oh] * W, h1 = th.i1[oh] * W;
      const float fh = th.frac[oh];
      for (std::size_t ow = 0; ow < static_cast<std::size_t>(OW); ++ow) {
        const std::int64_t w0 = tw.i0[ow], w1 = tw.i1[ow];
        const float fw = tw.frac[ow];
        const float a = lerp(lerp(p0[h0 + w0], p0[h0 + w1], fw),
                             lerp(p0[h1 + w0], p0[h1 + w1], fw), fh);
        const float b = lerp(lerp(p1[h0 + w0], p1[h0 + w1], fw),
                             lerp(p1[h1 + w0], p1[h1 + w1], fw), fh);
        dst[static_cast<std::int64_t>(oh) * OW + static_cast<std::int64_t>(ow)] = lerp(a, b, ft);
      }
    }
  }
  return out;
}

Tensor trilinear_upsample_scale(const Tensor& x, const Triple& scale) {
  require_feature_map(x, "trilinear_upsample");
  for (auto s : scale) {
    if (s <= 0) throw ConfigError("trilinear_upsample: non-positive scale " + triple_str(scale));
  }
  return trilinear_upsample(x, {x.dim(1) * scale[0], x.dim(2) * scale[1], x.dim(3) * scale[2]});
}

Tensor adaptive_max_pool_t(const Tensor& x, std::int64_t t_out) {
  require_feature_map(x, "adaptive_max_pool_t");
  const std::int64_t C = x.dim(0), T = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (t_out <= 0 || t_out > T) {
    throw ConfigError("adaptive_max_pool_t: t_out=" + std::to_string(t_out) +
                      " not in [1, " + std::to_string(T) + "]");
  }
  if (t_out == T) return x;
  Tensor out({C, t_out, x.dim(2), x.dim(3)});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t i = 0; i < t_out; ++i) {
      const std::int64_t begin = i * T / t_out;
      const std::int64_t end = (i + 1) * T / t_out;
      float* dst = out.raw() + (c * t_out + i) * HW;
      const float* first = x.raw() + (c * T + begin) * HW;
      std::copy(first, first + HW, dst);
      for (std::int64_t t = begin + 1; t < end; ++t) {
        const float* s = x.raw() + (c * T + t) * HW;
        for (std::int64_t k = 0; k < HW; ++k) dst[k] = std::max(dst[k], s[k]);
      }
    }
  }
  return out;
}

Shape max_pool3d_output_dims(const Shape& in, const Triple& kernel,
                             const Triple& stride, const Triple& padding) {
  if (in.size() != 4) {
    throw DimensionError("max_pool3d: expected [C,T,H,W], got " + to_string(in));
  }
  Shape out{in[0], 0, 0, 0};
  for (int i = 0; i < 3; ++i) {
    if (kernel[i] <= 0 || stride[i] <= 0 || padding[i] < 0 || 2 * padding[i] > kernel[i]) {
      throw ConfigError("max_pool3d: bad geometry kernel=" + triple_str(kernel) +
                        " stride=" + triple_str(stride) + " padding=" + triple_str(padding));
    }
    out[i + 1] = window_count(in[i + 1], kernel[i], stride[i], padding[i], 1);
    if (out[i + 1] <= 0) {
      throw ConfigError("max_pool3d: window " + triple_str(kernel) +
                        " larger than padded input " + to_string(in));
    }
  }
  return out;
}

Tensor max_pool3d(const Tensor& x, const Triple& kernel, const Triple& stride,
                  const Triple& padding) {
  const Shape od = max_pool3d_output_dims(x.dims(), kernel, stride, padding);
  const std::int64_t T = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t OT = od[1], OH = od[2], OW = od[3];
  Tensor out(od);
  const std::int64_t jobs = od[0] * OT;
#pragma omp parallel for schedule(static)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::int64_t c = job / OT, ot = job % OT;
    const float* src = x.raw() + c * T * H * W;
    float* dst = out.raw() + job * OH * OW;
    const std::int64_t t0 = std::max<std::int64_t>(0, ot * stride[0] - padding[0]);
    const std::int64_t t1 = std::min(T, ot * stride[0] - padding[0] + kernel[0]);
    for (std::int64_t oh = 0; oh < OH; ++oh) {
      const std::int64_t h0 = std::max<std::int64_t>(0, oh * stride[1] - padding[1]);
      const std::int64_t h1 = std::min(H, oh * stride[1] - padding[1] + kernel[1]);
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        const std::int64_t w0 = std::max<std::int64_t>(0, ow * stride[2] - padding[2]);
        const std::int64_t w1 = std::min(W, ow * stride[2] - padding[2] + kernel[2]);
        float m = -std::numeric_limits<float>::infinity();
        for (std::int64_t t = t0; t < t1; ++t) {
          for (std::int64_t h = h0; h < h1; ++h) {
            const float* row = src + (t * H + h) * W;
            for (std::int64_t w = w0; w < w1; ++w) m = std::max(m, row[w]);
          }
        }
        dst[oh * OW + ow] = m;
      }
    }
  }
  return out;
}

Tensor relu(Tensor x) {
  for (float& v : x.mutable_data()) v = v > 0.0f ? v : 0.0f;
  return x;
}

Tensor sigmoid(Tensor x) {
  // Clamped so a float32 result never rounds onto 0 or 1.
  constexpr float lo = std::numeric_limits<float>::min();
  const float hi = std::nextafter(1.0f, 0.0f);
  for (float& v : x.mutable_data()) {
    const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
    v = std::clamp(static_cast<float>(s), lo, hi);
  }
  return x;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw DimensionError("add: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
  Tensor out = a;
  auto z = out.mutable_data();
  auto y = b.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += y[i];
  return out;
}

}  // namespace salengine
