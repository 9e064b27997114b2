#include "salengine/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <optional>

#include "salengine/error.hpp"
#include "salengine/ops.hpp"
#include "salengine/parallel.hpp"

namespace salengine {

namespace {

constexpr const char* kSaliencyTap = "saliency";

Tensor run_layer(const BoundModel& model, std::size_t i, std::vector<Tensor>& args) {
  const LayerSpec& layer = model.graph().layers()[i];
  switch (layer.kind) {
    case LayerKind::kConv3d:
    case LayerKind::kPointwise:
      return conv3d(args[0], model.weight(i), model.bias(i), layer.conv());
    case LayerKind::kShuffle:
      return channel_shuffle(args[0], std::get<ShuffleParams>(layer.params).groups);
    case LayerKind::kUpsample:
      return trilinear_upsample_scale(args[0], std::get<UpsampleParams>(layer.params).scale);
    case LayerKind::kMaxPool: {
      const auto& p = std::get<MaxPoolParams>(layer.params);
      return max_pool3d(args[0], p.kernel, p.stride, p.padding);
    }
    case LayerKind::kAdaptivePoolT:
      return adaptive_max_pool_t(args[0], std::get<AdaptivePoolParams>(layer.params).t_out);
    case LayerKind::kRelu:
      return relu(std::move(args[0]));
    case LayerKind::kSigmoid:
      return sigmoid(std::move(args[0]));
    case LayerKind::kConcatSkip: {
      std::vector<const Tensor*> parts;
      for (const auto& a : args) parts.push_back(&a);
      return concat_channels(parts);
    }
    case LayerKind::kReshapeFast:
      return std::move(args[0]).reshape(model.graph().shape(i));
    case LayerKind::kAdd:
      if (args[0].dims() == args[1].dims()) {
        // Accumulate into the first operand when it is ours to reuse.
        Tensor out = std::move(args[0]);
        float* o = out.raw();
        const float* b = args[1].raw();
        const auto n = out.numel();
        for (std::int64_t k = 0; k < n; ++k) o[k] += b[k];
        return out;
      }
      return add(args[0], args[1]);
  }
  throw ConfigError("layer '" + layer.name + "': unsupported kind");
}

}  // namespace

WindowPlan window_for(std::int64_t t, std::int64_t video_len, ModelVariant variant) {
  if (video_len < 1) throw UsageError("video length must be at least 1");
  if (t < 0 || t >= video_len) {
    throw UsageError("target frame " + std::to_string(t) + " outside video of length " +
                     std::to_string(video_len));
  }
  WindowPlan plan;
  plan.target = t;
  plan.frames.reserve(kWindowFrames);
  for (std::int64_t k = 0; k < kWindowFrames; ++k) {
    const std::int64_t idx = variant == ModelVariant::kVinetS ? t - (kWindowFrames - 1) + k
                                                             : t - kWindowFrames + 2 * k;
    plan.frames.push_back(std::clamp<std::int64_t>(idx, 0, video_len - 1));
  }
  return plan;
}

std::vector<WindowPlan> make_windows(std::int64_t video_len, ModelVariant variant) {
  if (video_len < 1) throw UsageError("video length must be at least 1");
  std::vector<WindowPlan> plans;
  plans.reserve(static_cast<std::size_t>(video_len));
  for (std::int64_t t = 0; t < video_len; ++t) plans.push_back(window_for(t, video_len, variant));
  return plans;
}

FrameWindow assemble_window(const WindowPlan& plan, std::span<const Tensor> video,
                            ModelVariant variant) {
  if (video.empty()) throw UsageError("assemble_window: empty video");
  const Shape& fd = video[0].dims();
  if (fd.size() != 3 || fd[0] != 3) {
    throw DimensionError("frames must be [3,H,W], got " + to_string(fd));
  }
  const auto T = static_cast<std::int64_t>(plan.frames.size());
  const std::int64_t plane = fd[1] * fd[2];
  Tensor clip({3, T, fd[1], fd[2]});
  float* out = clip.raw();
  for (std::int64_t k = 0; k < T; ++k) {
    const auto idx = plan.frames[static_cast<std::size_t>(k)];
    if (idx < 0 || idx >= static_cast<std::int64_t>(video.size())) {
      throw UsageError("window references frame " + std::to_string(idx) + " of " +
                       std::to_string(video.size()));
    }
    const Tensor& f = video[static_cast<std::size_t>(idx)];
    if (f.dims() != fd) {
      throw DimensionError("frame " + std::to_string(idx) + " has dims " + to_string(f.dims()) +
                           ", expected " + to_string(fd));
    }
    for (std::int64_t c = 0; c < 3; ++c) {
      std::memcpy(out + (c * T + k) * plane, f.raw() + c * plane,
                  static_cast<std::size_t>(plane) * sizeof(float));
    }
  }
  return {std::move(clip), plan.target, variant};
}

Tensor standardize(Tensor frames, const Preprocess& pre) {
  if (frames.rank() != 4 || frames.dim(0) != 3) {
    throw DimensionError("standardize: expected [3,T,H,W], got " + to_string(frames.dims()));
  }
  const std::int64_t per_channel = frames.numel() / 3;
  float* d = frames.raw();
  for (std::int64_t c = 0; c < 3; ++c) {
    const double mean = pre.mean[static_cast<std::size_t>(c)];
    const double inv = 1.0 / pre.std[static_cast<std::size_t>(c)];
    float* p = d + c * per_channel;
    for (std::int64_t k = 0; k < per_channel; ++k) {
      p[k] = static_cast<float>((static_cast<double>(p[k]) - mean) * inv);
    }
  }
  return frames;
}

std::map<std::string, Tensor> run_graph(const BoundModel& model, Tensor input,
                                        std::span<const std::string> taps) {
  const Graph& g = model.graph();
  if (input.dims() != g.input_shape()) {
    throw DimensionError("input dims " + to_string(input.dims()) + " do not match model input " +
                         to_string(g.input_shape()));
  }
  const std::size_t n = g.layers().size();
  std::vector<bool> keep(n, false);
  for (const auto& tap : taps) keep[g.tap_layer(tap)] = true;

  std::size_t input_last_use = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : g.input_indices(i)) {
      if (j < 0) input_last_use = i;
    }
  }

  std::vector<std::optional<Tensor>> values(n);
  std::optional<Tensor> graph_input(std::move(input));
  std::vector<Tensor> args;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ins = g.input_indices(i);
    args.clear();
    for (std::size_t a = 0; a < ins.size(); ++a) {
      const auto j = ins[a];
      // An operand may be moved only if this is its last reader and it is not
      // consumed again by a later argument of the same layer.
      const bool repeated =
          std::find(ins.begin() + static_cast<std::ptrdiff_t>(a) + 1, ins.end(), j) != ins.end();
      if (j < 0) {
        if (input_last_use == i && !repeated) {
          args.push_back(std::move(*graph_input));
          graph_input.reset();
        } else {
          args.push_back(*graph_input);
        }
        continue;
      }
      const auto src = static_cast<std::size_t>(j);
      auto& v = values[src];
      if (g.last_use(src) == i && !keep[src] && !repeated) {
        args.push_back(std::move(*v));
        v.reset();
      } else {
        args.push_back(*v);
      }
    }
    values[i] = run_layer(model, i, args);
    if (g.last_use(i) == i && !keep[i]) values[i].reset();
  }

  std::map<std::string, Tensor> out;
  for (const auto& tap : taps) out.emplace(tap, *values[g.tap_layer(tap)]);
  return out;
}

SaliencyMap predict(const BoundModel& model, const FrameWindow& window) {
  const GraphConfig& cfg = model.graph().config();
  if (!cfg.taps.contains(kSaliencyTap)) {
    throw UsageError("model '" + cfg.name + "' has no saliency output");
  }
  if (cfg.variant && *cfg.variant != window.variant) {
    throw UsageError("window built for " + std::string(to_string(window.variant)) +
                     " but model '" + cfg.name + "' is " + std::string(to_string(*cfg.variant)));
  }
  if (window.frames.dims() != model.graph().input_shape()) {
    throw DimensionError("window dims " + to_string(window.frames.dims()) +
                         " do not match model input " + to_string(model.graph().input_shape()));
  }
  const std::string tap = kSaliencyTap;
  auto outs = run_graph(model, standardize(window.frames, cfg.preprocess),
                        std::span<const std::string>(&tap, 1));
  Tensor values = std::move(outs.at(tap));
  const Shape& d = values.dims();
  return {std::move(values).reshape({1, 1, d[d.size() - 2], d[d.size() - 1]}),
          window.target_index};
}

std::vector<SaliencyMap> predict_batch(const BoundModel& model,
                                       std::span<const FrameWindow> windows) {
  std::vector<SaliencyMap> out(windows.size());
  if (windows.size() <= 1) {
    for (std::size_t i = 0; i < windows.size(); ++i) out[i] = predict(model, windows[i]);
    return out;
  }
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(windows.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = predict(model, windows[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(salengine_predict_batch_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

Tensor resize_map(const Tensor& map, std::int64_t height, std::int64_t width) {
  if (map.rank() != 4 || map.dim(0) != 1 || map.dim(1) != 1) {
    throw DimensionError("resize_map: expected [1,1,H,W], got " + to_string(map.dims()));
  }
  if (map.dim(2) == height && map.dim(3) == width) return map;
  return trilinear_upsample(map, {1, height, width});
}

SaliencyMap ensemble(const SaliencyMap& ms, const SaliencyMap& ma) {
  if (ms.source_frame != ma.source_frame) {
    throw UsageError("ensemble: maps for frames " + std::to_string(ms.source_frame) + " and " +
                     std::to_string(ma.source_frame));
  }
  const Tensor aligned = resize_map(ms.values, ma.values.dim(2), ma.values.dim(3));
  return {pixelwise_mean(aligned, ma.values), ma.source_frame};
}

BenchReport bench(const BoundModel& model, int batch, int iters, int warmup) {
  if (batch < 1) throw UsageError("bench: batch must be at least 1");
  BenchReport report;
  report.model = model.graph().config().name;
  report.batch = batch;
  report.iters = std::max(iters, 0);
  report.warmup = std::max(warmup, 0);
  report.threads = num_threads();
  if (iters <= 0) return report;

  const auto variant = model.graph().config().variant.value_or(ModelVariant::kVinetS);
  std::vector<FrameWindow> windows;
  for (int b = 0; b < batch; ++b) {
    windows.push_back({Tensor::full(model.graph().input_shape(), 0.5f), b, variant});
  }
  for (int w = 0; w < report.warmup; ++w) predict_batch(model, windows);
  for (int it = 0; it < iters; ++it) {
    const auto start = std::chrono::steady_clock::now();
    predict_batch(model, windows);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    report.fps.push_back(static_cast<double>(batch) / std::max(dt.count(), 1e-12));
  }
  double sum = 0.0;
  for (double f : report.fps) sum += f;
  report.mean_fps = sum / static_cast<double>(report.fps.size());
  if (report.fps.size() > 1) {
    double ss = 0.0;
    for (double f : report.fps) ss += (f - report.mean_fps) * (f - report.mean_fps);
    report.stddev_fps = std::sqrt(ss / static_cast<double>(report.fps.size() - 1));
  }
  report.valid = true;
  return report;
}

}  // namespace salengine
