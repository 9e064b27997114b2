#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "salengine/graph.hpp"
#include "salengine/tensor.hpp"
#include "salengine/weights.hpp"

namespace salengine {

inline constexpr std::int64_t kWindowFrames = 32;

/// Source frame indices feeding one prediction.
struct WindowPlan {
  std::int64_t target = 0;
  std::vector<std::int64_t> frames;  // kWindowFrames entries, in clip order

  friend bool operator==(const WindowPlan&, const WindowPlan&) = default;
};

/// Plan predicting frame t of a video of `video_len` frames.
///   ViNet-S: frames t-31 .. t.
///   ViNet-A: frames t-32, t-30, .. t+30 (every other frame of [t-32, t+31]).
/// Indices outside [0, video_len) are clamped, which repeats the first or
/// last frame.
WindowPlan window_for(std::int64_t t, std::int64_t video_len, ModelVariant variant);

/// One plan per frame, targets 0 .. video_len-1 in order. Throws UsageError
/// if video_len < 1.
std::vector<WindowPlan> make_windows(std::int64_t video_len, ModelVariant variant);

/// A model-ready clip: frames [3, 32, H, W] with RGB values in [0, 1].
struct FrameWindow {
  Tensor frames;
  std::int64_t target_index = 0;
  ModelVariant variant = ModelVariant::kVinetS;
};

/// Stacks video frames ([3, H, W] each) along the plan into a window.
FrameWindow assemble_window(const WindowPlan& plan, std::span<const Tensor> video,
                            ModelVariant variant);

struct SaliencyMap {
  Tensor values;  // [1, 1, H, W], every value in (0, 1)
  std::int64_t source_frame = 0;
};

/// (x - mean[c]) / std[c] per channel of a [3, T, H, W] clip.
Tensor standardize(Tensor frames, const Preprocess& pre);

/// Runs the bound graph on an already standardized input and returns the
/// requested taps. Intermediate tensors are released after their last use.
std::map<std::string, Tensor> run_graph(const BoundModel& model, Tensor input,
                                        std::span<const std::string> taps);

/// Standardizes the window with the config's constants and runs the full
/// model. Throws DimensionError when the clip does not match the model input,
/// UsageError when the model has no "saliency" tap or the window was built
/// for the other variant.
SaliencyMap predict(const BoundModel& model, const FrameWindow& window);

/// predict over several windows, parallel across windows. Output order
/// follows input order and every map is identical to a single predict call.
std::vector<SaliencyMap> predict_batch(const BoundModel& model,
                                       std::span<const FrameWindow> windows);

/// Bilinear resize of a [1, 1, H, W] map (align_corners = false).
Tensor resize_map(const Tensor& map, std::int64_t height, std::int64_t width);

/// ViNet-E fusion: `ms` is resized to `ma`'s extent, then the two are averaged
/// pixelwise. Throws UsageError when the maps belong to different frames.
SaliencyMap ensemble(const SaliencyMap& ms, const SaliencyMap& ma);

struct BenchReport {
  std::string model;
  int batch = 1;
  int iters = 0;
  int warmup = 0;
  int threads = 1;
  std::vector<double> fps;  // one sample per timed iteration
  double mean_fps = 0.0;
  double stddev_fps = 0.0;
  bool valid = false;  // false when no iteration was timed
};

/// Times `iters` batches of `batch` windows after `warmup` untimed batches.
/// Each sample is batch / seconds for one predict_batch call.
BenchReport bench(const BoundModel& model, int batch, int iters, int warmup = 3);

}  // namespace salengine
