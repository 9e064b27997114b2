#include "salengine/architectures.hpp"

#include <map>

#include "salengine/error.hpp"

namespace salengine {

namespace {

constexpr std::int64_t kClipFrames = 32;
constexpr std::int64_t kTinyDivisor = 4;
constexpr std::int64_t kTinyEncoderDivisor = 8;
constexpr std::int64_t kTinyHeight = 32;
constexpr std::int64_t kTinyWidth = 64;

// Appends layers to a config while tracking output shapes, so generators can
// read channel counts instead of hard-coding them.
class ConfigBuilder {
 public:
  ConfigBuilder(GraphConfig& cfg, std::string subgraph)
      : cfg_(cfg), subgraph_(std::move(subgraph)) {
    const ShapeTable table = infer_shapes(cfg_, cfg_.input_shape);
    for (const auto& [name, shape] : table) shapes_.emplace(name, shape);
  }

  const Shape& shape(const std::string& name) const {
    if (name == kGraphInput) return cfg_.input_shape;
    return shapes_.at(name);
  }
  std::int64_t channels(const std::string& name) const { return shape(name)[0]; }
  std::int64_t frames(const std::string& name) const { return shape(name)[1]; }

  std::string conv(const std::string& name, const std::string& x, std::int64_t out_ch,
                   Triple kernel, Triple stride = {1, 1, 1}, Triple padding = {0, 0, 0},
                   Triple dilation = {1, 1, 1}, std::int64_t groups = 1) {
    Conv3dParams p;
    p.in_ch = channels(x);
    p.out_ch = out_ch;
    p.groups = groups;
    p.kernel = kernel;
    p.stride = stride;
    p.padding = padding;
    p.dilation = dilation;
    p.has_bias = true;
    const bool is_pointwise = kernel == Triple{1, 1, 1} && stride == Triple{1, 1, 1} &&
                              padding == Triple{0, 0, 0};
    return push(name, is_pointwise ? LayerKind::kPointwise : LayerKind::kConv3d, {x}, p);
  }
  std::string pointwise(const std::string& name, const std::string& x, std::int64_t out_ch) {
    return conv(name, x, out_ch, {1, 1, 1});
  }
  // Convolution followed by ReLU; returns the activation's name.
  std::string conv_relu(const std::string& prefix, const std::string& x, std::int64_t out_ch,
                        Triple kernel, Triple stride = {1, 1, 1}, Triple padding = {0, 0, 0},
                        Triple dilation = {1, 1, 1}) {
    const auto c = conv(prefix + ".conv", x, out_ch, kernel, stride, padding, dilation);
    return relu(prefix + ".relu", c);
  }
  std::string relu(const std::string& name, const std::string& x) {
    return push(name, LayerKind::kRelu, {x}, {});
  }
  std::string sigmoid(const std::string& name, const std::string& x) {
    return push(name, LayerKind::kSigmoid, {x}, {});
  }
  std::string maxpool(const std::string& name, const std::string& x, Triple kernel,
                      Triple stride, Triple padding = {0, 0, 0}) {
    return push(name, LayerKind::kMaxPool, {x}, MaxPoolParams{kernel, stride, padding});
  }
  std::string concat(const std::string& name, std::vector<std::string> xs) {
    return push(name, LayerKind::kConcatSkip, std::move(xs), {});
  }
  std::string add(const std::string& name, const std::string& a, const std::string& b) {
    return push(name, LayerKind::kAdd, {a, b}, {});
  }
  std::string shuffle(const std::string& name, const std::string& x, std::int64_t groups) {
    return push(name, LayerKind::kShuffle, {x}, ShuffleParams{groups});
  }
  std::string upsample(const std::string& name, const std::string& x, Triple scale) {
    return push(name, LayerKind::kUpsample, {x}, UpsampleParams{scale});
  }
  std::string pool_t(const std::string& name, const std::string& x, std::int64_t t_out) {
    return push(name, LayerKind::kAdaptivePoolT, {x}, AdaptivePoolParams{t_out});
  }
  std::string reshape_fast(const std::string& name, const std::string& x, std::int64_t factor) {
    return push(name, LayerKind::kReshapeFast, {x}, ReshapeFastParams{factor});
  }

  void tap(const std::string& tap, const std::string& layer) { cfg_.taps[tap] = layer; }
  const std::string& tap_layer(const std::string& tap) const {
    auto it = cfg_.taps.find(tap);
    if (it == cfg_.taps.end()) {
      throw ConfigError("graph '" + cfg_.name + "' has no tap '" + tap + "'");
    }
    return it->second;
  }

 private:
  std::string push(const std::string& name, LayerKind kind, std::vector<std::string> inputs,
                   LayerParams params) {
    LayerSpec l{name, kind, std::move(inputs), subgraph_, std::move(params)};
    std::vector<Shape> in;
    for (const auto& src : l.inputs) in.push_back(shape(src));
    Shape out = infer_layer_shape(l, in);
    if (!shapes_.emplace(name, out).second) {
      throw ConfigError("duplicate layer name '" + name + "'");
    }
    cfg_.layers.push_back(std::move(l));
    return name;
  }

  GraphConfig& cfg_;
  std::string subgraph_;
  std::map<std::string, Shape> shapes_;
};

std::int64_t scaled(std::int64_t channels, std::int64_t divisor) {
  if (divisor <= 0 || channels % divisor != 0) {
    throw ConfigError("channel divisor " + std::to_string(divisor) + " does not divide " +
                      std::to_string(channels));
  }
  return channels / divisor;
}

GraphConfig empty_encoder(const std::string& name, const EncoderOptions& o) {
  if (o.height <= 0 || o.width <= 0) {
    throw ConfigError(name + ": non-positive input resolution");
  }
  GraphConfig cfg;
  cfg.name = name;
  cfg.input_shape = {3, kClipFrames, o.height, o.width};
  return cfg;
}

// ResNet bottleneck: Tx1x1 -> 1x3x3 (strided, dilated) -> 1x1x1, plus a
// projection shortcut when the shape changes.
std::string bottleneck(ConfigBuilder& b, const std::string& prefix, const std::string& x,
                       std::int64_t inner, std::int64_t out, std::int64_t temporal_kernel,
                       std::int64_t stride, std::int64_t dilation) {
  const auto a = b.conv_relu(prefix + ".a", x, inner, {temporal_kernel, 1, 1}, {1, 1, 1},
                             {temporal_kernel / 2, 0, 0});
  const auto mid = b.conv_relu(prefix + ".b", a, inner, {1, 3, 3}, {1, stride, stride},
                               {0, dilation, dilation}, {1, dilation, dilation});
  const auto c = b.conv(prefix + ".c.conv", mid, out, {1, 1, 1});
  std::string shortcut = x;
  if (b.channels(x) != out || stride != 1) {
    shortcut = b.conv(prefix + ".shortcut.conv", x, out, {1, 1, 1}, {1, stride, stride});
  }
  const auto sum = b.add(prefix + ".add", c, shortcut);
  return b.relu(prefix + ".relu", sum);
}

// Fast -> slow lateral connection: 7x1x1 conv with temporal stride alpha,
// doubling the fast channels, concatenated after the slow features.
std::string lateral_fuse(ConfigBuilder& b, const std::string& prefix, const std::string& slow,
                         const std::string& fast) {
  const std::int64_t alpha = b.frames(fast) / b.frames(slow);
  const auto lat = b.conv_relu(prefix, fast, 2 * b.channels(fast), {7, 1, 1}, {alpha, 1, 1},
                               {3, 0, 0});
  return b.concat(prefix + ".cat", {slow, lat});
}

// Spatial 1xkxk then temporal kx1x1 convolution, each followed by ReLU.
std::string sep_conv(ConfigBuilder& b, const std::string& prefix, const std::string& x,
                     std::int64_t out, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  const auto s = b.conv_relu(prefix + ".s", x, out, {1, k, k}, {1, stride, stride}, {0, pad, pad});
  return b.conv_relu(prefix + ".t", s, out, {k, 1, 1}, {stride, 1, 1}, {pad, 0, 0});
}

struct MixedWidths {
  std::int64_t b0, b1a, b1b, b2a, b2b, b3;
};

std::string mixed(ConfigBuilder& b, const std::string& prefix, const std::string& x,
                  const MixedWidths& w, std::int64_t d) {
  const auto b0 = b.conv_relu(prefix + ".b0", x, scaled(w.b0, d), {1, 1, 1});
  const auto b1a = b.conv_relu(prefix + ".b1a", x, scaled(w.b1a, d), {1, 1, 1});
  const auto b1 = sep_conv(b, prefix + ".b1b", b1a, scaled(w.b1b, d), 3, 1, 1);
  const auto b2a = b.conv_relu(prefix + ".b2a", x, scaled(w.b2a, d), {1, 1, 1});
  const auto b2 = sep_conv(b, prefix + ".b2b", b2a, scaled(w.b2b, d), 3, 1, 1);
  const auto pool = b.maxpool(prefix + ".b3.pool", x, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  const auto b3 = b.conv_relu(prefix + ".b3", pool, scaled(w.b3, d), {1, 1, 1});
  return b.concat(prefix + ".cat", {b0, b1, b2, b3});
}

}  // namespace

GraphConfig slowfast_r50_encoder(const EncoderOptions& o) {
  GraphConfig cfg = empty_encoder("slowfast_r50", o);
  cfg.preprocess = {{0.45, 0.45, 0.45}, {0.225, 0.225, 0.225}};
  ConfigBuilder b(cfg, "encoder");
  const std::int64_t d = o.channel_divisor;
  constexpr std::int64_t alpha = 4;  // slow pathway sees every 4th frame
  constexpr std::int64_t beta = 8;   // fast pathway channel ratio

  auto slow = b.maxpool("slow.sample", std::string(kGraphInput), {1, 1, 1}, {alpha, 1, 1});
  slow = b.conv_relu("slow.stem", slow, scaled(64, d), {1, 7, 7}, {1, 2, 2}, {0, 3, 3});
  b.tap("X1", slow);
  slow = b.maxpool("slow.stem.pool", slow, {1, 3, 3}, {1, 2, 2}, {0, 1, 1});

  auto fast = b.conv_relu("fast.stem", std::string(kGraphInput), scaled(64 / beta, d),
                          {5, 7, 7}, {1, 2, 2}, {2, 3, 3});
  fast = b.maxpool("fast.stem.pool", fast, {1, 3, 3}, {1, 2, 2}, {0, 1, 1});
  slow = lateral_fuse(b, "fuse.stem", slow, fast);

  struct Stage {
    const char* name;
    std::int64_t blocks, inner, out, slow_tk, stride, dilation;
  };
  constexpr Stage stages[] = {
      {"res2", 3, 64, 256, 1, 1, 1},
      {"res3", 4, 128, 512, 1, 2, 1},
      {"res4", 6, 256, 1024, 3, 2, 1},
      {"res5", 3, 512, 2048, 3, 1, 2},
  };
  int tap_index = 2;
  for (const Stage& s : stages) {
    for (std::int64_t i = 0; i < s.blocks; ++i) {
      const std::int64_t stride = i == 0 ? s.stride : 1;
      const std::string id = std::string(s.name) + "." + std::to_string(i);
      slow = bottleneck(b, "slow." + id, slow, scaled(s.inner, d), scaled(s.out, d), s.slow_tk,
                        stride, s.dilation);
      fast = bottleneck(b, "fast." + id, fast, scaled(s.inner / beta, d),
                        scaled(s.out / beta, d), 3, stride, s.dilation);
    }
    if (std::string_view(s.name) != "res5") {
      slow = lateral_fuse(b, std::string("fuse.") + s.name, slow, fast);
      b.tap("X" + std::to_string(tap_index++), slow);
    }
  }
  b.tap("X_slow", slow);
  b.tap("X_fast", fast);
  return cfg;
}

GraphConfig s3d_encoder(const EncoderOptions& o) {
  GraphConfig cfg = empty_encoder("s3d", o);
  cfg.preprocess = {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}};
  ConfigBuilder b(cfg, "encoder");
  const std::int64_t d = o.channel_divisor;

  auto x = sep_conv(b, "s3d.conv1", std::string(kGraphInput), scaled(64, d), 7, 2, 3);
  x = b.maxpool("s3d.pool1", x, {1, 3, 3}, {1, 2, 2}, {0, 1, 1});
  x = b.conv_relu("s3d.conv2", x, scaled(64, d), {1, 1, 1});
  x = sep_conv(b, "s3d.conv3", x, scaled(192, d), 3, 1, 1);
  b.tap("X1", x);
  x = b.maxpool("s3d.pool2", x, {1, 3, 3}, {1, 2, 2}, {0, 1, 1});
  x = mixed(b, "s3d.mixed3b", x, {64, 96, 128, 16, 32, 32}, d);
  x = mixed(b, "s3d.mixed3c", x, {128, 128, 192, 32, 96, 64}, d);
  b.tap("X2", x);
  x = b.maxpool("s3d.pool3", x, {3, 3, 3}, {2, 2, 2}, {1, 1, 1});
  x = mixed(b, "s3d.mixed4b", x, {192, 96, 208, 16, 48, 64}, d);
  x = mixed(b, "s3d.mixed4c", x, {160, 112, 224, 24, 64, 64}, d);
  x = mixed(b, "s3d.mixed4d", x, {128, 128, 256, 24, 64, 64}, d);
  x = mixed(b, "s3d.mixed4e", x, {112, 144, 288, 32, 64, 64}, d);
  x = mixed(b, "s3d.mixed4f", x, {256, 160, 320, 32, 128, 128}, d);
  b.tap("X3", x);
  x = b.maxpool("s3d.pool4", x, {2, 2, 2}, {2, 2, 2});
  x = mixed(b, "s3d.mixed5b", x, {256, 160, 320, 32, 128, 128}, d);
  x = mixed(b, "s3d.mixed5c", x, {384, 192, 384, 48, 128, 128}, d);
  b.tap("X4", x);
  return cfg;
}

void append_neck(GraphConfig& cfg) {
  ConfigBuilder b(cfg, "neck");
  const auto slow_in = b.tap_layer("X_slow");
  const auto fast_in = b.tap_layer("X_fast");
  if (b.channels(fast_in) * 2 > b.channels(slow_in) || b.frames(fast_in) % 2 != 0) {
    throw ConfigError("neck: incompatible X_slow " + to_string(b.shape(slow_in)) +
                      " / X_fast " + to_string(b.shape(fast_in)));
  }
  const auto slow = b.conv_relu("neck.slow", slow_in, b.channels(slow_in) / 2, {1, 1, 1});
  auto fast = b.reshape_fast("neck.fast.reshape", fast_in, 2);
  if (b.frames(fast) < b.frames(slow)) {
    throw ConfigError("neck: X_fast has fewer frames than X_slow");
  }
  fast = b.pool_t("neck.fast.pool", fast, b.frames(slow));
  b.tap("X_slowfast", b.concat("neck.fuse", {slow, fast}));

  for (int i = 1; i <= 4; ++i) {
    const auto x = b.tap_layer("X" + std::to_string(i));
    if (b.channels(x) % 2 != 0) {
      throw ConfigError("neck: X" + std::to_string(i) + " has an odd channel count");
    }
    const auto prefix = "neck.x" + std::to_string(i);
    b.tap("skip" + std::to_string(i), b.conv_relu(prefix, x, b.channels(x) / 2, {1, 1, 1}));
  }
}

DecoderSchedule default_decoder_schedule(ModelVariant variant, std::int64_t d) {
  const std::int64_t widths[] = {512, 256, 128, 64, 32, 16};
  const std::int64_t groups[] = {32, 16, 8, 8, 4, 2};
  DecoderSchedule s;
  for (int i = 0; i < 6; ++i) {
    DecoderBlock blk;
    blk.out_ch = scaled(widths[i], d);
    blk.groups = groups[i];
    blk.shuffle = i < 3;
    s.blocks.push_back(blk);
  }
  if (variant == ModelVariant::kVinetA) {
    // X_slowfast enters at H/16 with 8 frames; skips sit at H/16..H/2.
    const char* skips[] = {"", "skip4", "skip3", "skip2", "skip1", ""};
    for (int i = 0; i < 6; ++i) {
      s.blocks[i].temporal_stride = i < 3 ? 2 : 1;
      s.blocks[i].upsample = i >= 1 && i <= 4;
      s.blocks[i].skip_tap = skips[i];
    }
  } else {
    // X4 enters at H/32 with 4 frames; skips X3..X1 sit at H/16..H/4.
    const char* skips[] = {"", "X3", "X2", "X1", "", ""};
    for (int i = 0; i < 6; ++i) {
      s.blocks[i].temporal_stride = i < 2 ? 2 : 1;
      s.blocks[i].upsample = i <= 4;
      s.blocks[i].skip_tap = skips[i];
    }
  }
  return s;
}

void append_decoder(GraphConfig& cfg, std::string_view input_tap, const DecoderSchedule& s) {
  ConfigBuilder b(cfg, "decoder");
  std::string x = b.tap_layer(std::string(input_tap));
  const auto [kt, kh, kw] = s.kernel;
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    const DecoderBlock& blk = s.blocks[i];
    const std::string prefix = "dec.b" + std::to_string(i + 1);
    if (!blk.skip_tap.empty()) {
      std::string skip = b.tap_layer(blk.skip_tap);
      if (b.frames(skip) < b.frames(x)) {
        throw ConfigError(prefix + ": skip " + blk.skip_tap + " has fewer frames than the decoder");
      }
      if (b.frames(skip) > b.frames(x)) skip = b.pool_t(prefix + ".skip_pool", skip, b.frames(x));
      x = b.concat(prefix + ".cat", {x, skip});
    }
    x = b.conv(prefix + ".conv", x, blk.out_ch, s.kernel, {blk.temporal_stride, 1, 1},
               {kt / 2, kh / 2, kw / 2}, {1, 1, 1}, blk.groups);
    if (blk.shuffle) x = b.shuffle(prefix + ".shuffle", x, blk.groups);
    x = b.relu(prefix + ".relu", x);
    if (blk.upsample) x = b.upsample(prefix + ".up", x, {1, 2, 2});
  }
  x = b.pointwise("dec.out.conv", x, 1);
  x = b.sigmoid("dec.out.sigmoid", x);
  if (b.frames(x) != 1) {
    throw ConfigError("decoder leaves " + std::to_string(b.frames(x)) +
                      " frames; the schedule must reduce time to 1");
  }
  b.tap("saliency", x);
}

std::pair<std::int64_t, std::int64_t> default_resolution(ModelVariant variant) {
  return variant == ModelVariant::kVinetA ? std::pair<std::int64_t, std::int64_t>{256, 464}
                                          : std::pair<std::int64_t, std::int64_t>{224, 384};
}

GraphConfig vinet_config(ModelVariant variant, const ModelOptions& opts) {
  auto [h, w] = default_resolution(variant);
  if (opts.height > 0) h = opts.height;
  if (opts.width > 0) w = opts.width;
  const EncoderOptions enc{h, w, opts.channel_divisor};
  GraphConfig cfg;
  if (variant == ModelVariant::kVinetA) {
    cfg = slowfast_r50_encoder(enc);
    append_neck(cfg);
    append_decoder(cfg, "X_slowfast", default_decoder_schedule(variant, opts.channel_divisor));
  } else {
    cfg = s3d_encoder(enc);
    append_decoder(cfg, "X4", default_decoder_schedule(variant, opts.channel_divisor));
  }
  cfg.name = opts.name.empty() ? std::string(to_string(variant)) : opts.name;
  cfg.variant = variant;
  return cfg;
}

std::vector<std::pair<std::string, GraphConfig>> reference_configs() {
  std::vector<std::pair<std::string, GraphConfig>> out;
  out.emplace_back("slowfast_r50.json", slowfast_r50_encoder({256, 464, 1}));
  out.emplace_back("s3d.json", s3d_encoder({224, 384, 1}));
  out.emplace_back("vinet_a.json", vinet_config(ModelVariant::kVinetA));
  out.emplace_back("vinet_s.json", vinet_config(ModelVariant::kVinetS));

  auto sf_tiny = slowfast_r50_encoder({kTinyHeight, kTinyWidth, kTinyEncoderDivisor});
  sf_tiny.name = "slowfast_r50_tiny";
  out.emplace_back("slowfast_r50_tiny.json", std::move(sf_tiny));
  auto s3d_tiny = s3d_encoder({kTinyHeight, kTinyWidth, kTinyEncoderDivisor});
  s3d_tiny.name = "s3d_tiny";
  out.emplace_back("s3d_tiny.json", std::move(s3d_tiny));
  out.emplace_back("vinet_a_tiny.json",
                   vinet_config(ModelVariant::kVinetA,
                                {kTinyHeight, kTinyWidth, kTinyDivisor, "vinet_a_tiny"}));
  out.emplace_back("vinet_s_tiny.json",
                   vinet_config(ModelVariant::kVinetS,
                                {kTinyHeight, kTinyWidth, kTinyDivisor, "vinet_s_tiny"}));
  return out;
}

}  // namespace salengine
