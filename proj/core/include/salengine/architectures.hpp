#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "salengine/graph.hpp"

namespace salengine {

/// Input geometry and width scaling shared by the encoder generators.
/// Every channel count of the reference network is divided by
/// `channel_divisor`, which must divide it exactly.
struct EncoderOptions {
  std::int64_t height = 256;
  std::int64_t width = 464;
  std::int64_t channel_divisor = 1;
};

/// SlowFast-R50 two-pathway encoder on a [3, 32, H, W] clip.
///
/// The slow pathway samples every 4th frame (8 of 32); the fast pathway keeps
/// all 32 at 1/8 the width. Time-strided 7x1x1 lateral convolutions fuse fast
/// into slow after the stem, res2, res3 and res4. res5 runs at spatial stride
/// 1 with dilation 2, so the deepest features sit at H/16 x W/16.
///
/// Taps: X1 (slow stem, H/2), X2..X4 (lateral-fused res2..res4 outputs at
/// H/4, H/8, H/16), X_slow [2048, 8, H/16, W/16], X_fast [256, 32, H/16, W/16].
GraphConfig slowfast_r50_encoder(const EncoderOptions& opts);

/// S3D (separable 3D Inception) encoder on a [3, 32, H, W] clip.
/// Taps X1..X4 carry (192, 480, 832, 1024) channels at spatial strides
/// (4, 8, 16, 32) and temporal sizes (16, 16, 8, 4).
GraphConfig s3d_encoder(const EncoderOptions& opts);

/// Appends the SlowFast neck to a graph exposing X_slow, X_fast and X1..X4:
/// X_slow is halved by a 1x1 conv, X_fast is reshaped to twice the channels
/// and half the frames and max-pooled in time to match X_slow, and the two are
/// concatenated into tap X_slowfast. Each X_i is halved into tap skip<i>.
void append_neck(GraphConfig& cfg);

struct DecoderBlock {
  std::int64_t out_ch = 0;
  std::int64_t groups = 1;
  bool shuffle = false;
  std::int64_t temporal_stride = 1;
  bool upsample = false;  // x2 in H and W after the activation
  std::string skip_tap;   // concatenated before the conv; empty for none
};

struct DecoderSchedule {
  std::vector<DecoderBlock> blocks;
  Triple kernel{3, 3, 3};
};

/// Six grouped blocks, groups (32, 16, 8, 8, 4, 2), shuffle after the first
/// three. Widths 512/256/128/64/32/16 divided by `channel_divisor`.
DecoderSchedule default_decoder_schedule(ModelVariant variant,
                                         std::int64_t channel_divisor = 1);

/// Appends the saliency decoder reading `input_tap`. Skips whose temporal
/// extent exceeds the decoder's are max-pooled in time first. Ends with an
/// ungrouped 1x1 conv to one channel and a sigmoid, exposed as tap
/// "saliency"; throws ConfigError unless the time axis has collapsed to 1.
void append_decoder(GraphConfig& cfg, std::string_view input_tap,
                    const DecoderSchedule& schedule);

struct ModelOptions {
  std::int64_t height = 0;  // 0 selects the variant default
  std::int64_t width = 0;
  std::int64_t channel_divisor = 1;
  std::string name;
};

/// Default resolutions: 256x464 (ViNet-A) and 224x384 (ViNet-S).
std::pair<std::int64_t, std::int64_t> default_resolution(ModelVariant variant);

/// Full encoder-neck-decoder graph for a variant.
GraphConfig vinet_config(ModelVariant variant, const ModelOptions& opts = {});

/// The reference config set shipped under configs/, as (file name, config).
std::vector<std::pair<std::string, GraphConfig>> reference_configs();

}  // namespace salengine
