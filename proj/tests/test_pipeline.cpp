#include <gtest/gtest.h>

#include <filesystem>
#include <memory>
#include <random>
#include <set>

#include "oracles.hpp"
#include "salengine/error.hpp"
#include "salengine/graph.hpp"
#include "salengine/ops.hpp"
#include "salengine/parallel.hpp"
#include "salengine/pipeline.hpp"
#include "salengine/weights.hpp"

namespace se = salengine;
namespace fs = std::filesystem;
using se::ModelVariant;
using se::Shape;
using se::Tensor;

namespace {

const fs::path kConfigs = fs::path(SALENGINE_SOURCE_DIR) / "configs";

std::shared_ptr<const se::Graph> graph(const char* file) {
  return std::make_shared<const se::Graph>(se::build(se::load_graph_config(kConfigs / file)));
}

const se::BoundModel& tiny_s() {
  static const se::BoundModel m = [] {
    auto g = graph("vinet_s_tiny.json");
    return se::bind(g, se::random_init(*g, 3, se::InitScheme::kFanIn));
  }();
  return m;
}

se::FrameWindow random_window(std::uint32_t seed, const se::BoundModel& m) {
  std::mt19937 rng(seed);
  return {oracle::uniform(rng, m.graph().input_shape(), 0, 1), 0,
          *m.graph().config().variant};
}

std::vector<std::int64_t> range(std::int64_t from, std::int64_t to, std::int64_t step = 1) {
  std::vector<std::int64_t> v;
  for (std::int64_t i = from; i <= to; i += step) v.push_back(i);
  return v;
}

}  // namespace

TEST(Windows, ViNetSExamples) {
  const auto plans = se::make_windows(100, ModelVariant::kVinetS);
  ASSERT_EQ(plans.size(), 100u);
  EXPECT_EQ(plans[50].target, 50);
  EXPECT_EQ(plans[50].frames, range(19, 50));
  EXPECT_EQ(plans[31].frames, range(0, 31));
  std::vector<std::int64_t> head(29, 0);
  head.push_back(0);
  head.push_back(1);
  head.push_back(2);
  EXPECT_EQ(plans[2].frames, head);
}

TEST(Windows, SingleFrameVideo) {
  for (auto v : {ModelVariant::kVinetS, ModelVariant::kVinetA}) {
    const auto plans = se::make_windows(1, v);
    ASSERT_EQ(plans.size(), 1u);
    EXPECT_EQ(plans[0].frames, std::vector<std::int64_t>(32, 0));
  }
  EXPECT_THROW(se::make_windows(0, ModelVariant::kVinetS), se::UsageError);
}

TEST(Windows, ViNetAExamples) {
  const auto plan = se::window_for(40, 100, ModelVariant::kVinetA);
  EXPECT_EQ(plan.frames, range(8, 70, 2));
  const auto clamped = se::window_for(40, 50, ModelVariant::kVinetA);
  for (std::size_t k = 0; k < 32; ++k) {
    EXPECT_EQ(clamped.frames[k], std::min<std::int64_t>(8 + 2 * static_cast<std::int64_t>(k), 49));
  }
}

TEST(WindowsProperty, EveryFrameTargetedOnce) {
  std::mt19937 rng(1);
  std::vector<std::int64_t> lens{1, 31, 32, 100};
  for (int i = 0; i < 20; ++i) lens.push_back(std::uniform_int_distribution<int>(1, 300)(rng));
  for (auto v : {ModelVariant::kVinetS, ModelVariant::kVinetA}) {
    for (auto len : lens) {
      const auto plans = se::make_windows(len, v);
      ASSERT_EQ(static_cast<std::int64_t>(plans.size()), len);
      std::multiset<std::int64_t> targets;
      for (const auto& p : plans) {
        targets.insert(p.target);
        ASSERT_EQ(p.frames.size(), 32u);
        for (auto f : p.frames) {
          ASSERT_GE(f, 0);
          ASSERT_LT(f, len);
        }
      }
      for (std::int64_t t = 0; t < len; ++t) ASSERT_EQ(targets.count(t), 1u);
    }
  }
}

TEST(WindowsProperty, InteriorViNetAIndices) {
  for (std::int64_t len : {64, 65, 100, 257}) {
    for (std::int64_t t = 32; t + 31 < len; ++t) {
      EXPECT_EQ(se::window_for(t, len, ModelVariant::kVinetA).frames, range(t - 32, t + 30, 2));
    }
  }
}

TEST(Windows, AssembleOrdersFrames) {
  std::vector<Tensor> video;
  for (int f = 0; f < 40; ++f) video.push_back(Tensor::full({3, 2, 2}, static_cast<float>(f)));
  video[39][4] = -1.0f;  // channel 1, pixel 0
  const auto plan = se::window_for(39, 40, ModelVariant::kVinetS);
  const auto w = se::assemble_window(plan, video, ModelVariant::kVinetS);
  ASSERT_EQ(w.frames.dims(), (Shape{3, 32, 2, 2}));
  EXPECT_EQ(w.target_index, 39);
  EXPECT_EQ(oracle::at4(w.frames, 2, 0, 1, 1), 8.0f);
  EXPECT_EQ(oracle::at4(w.frames, 0, 31, 0, 0), 39.0f);
  EXPECT_EQ(oracle::at4(w.frames, 1, 31, 0, 0), -1.0f);
}

TEST(Predict, RangeDimsAndDeterminism) {
  const auto& m = tiny_s();
  const auto w = random_window(1, m);
  const auto a = se::predict(m, w);
  const auto b = se::predict(m, w);
  EXPECT_EQ(a.values.dims(), (Shape{1, 1, 32, 64}));
  EXPECT_EQ(a.values, b.values);
  for (float v : a.values.data()) {
    ASSERT_GT(v, 0.0f);
    ASSERT_LT(v, 1.0f);
  }
}

TEST(Predict, BatchMatchesSingleAndThreadCount) {
  const auto& m = tiny_s();
  std::vector<se::FrameWindow> ws{random_window(2, m), random_window(3, m), random_window(4, m)};
  ws[1].target_index = 7;
  se::set_num_threads(1);
  const auto one = se::predict(m, ws[1]);
  se::set_num_threads(3);
  const auto batch = se::predict_batch(m, ws);
  se::set_num_threads(0);
  ASSERT_EQ(batch.size(), 3u);
  EXPECT_EQ(batch[1].values, one.values);
  EXPECT_EQ(batch[1].source_frame, 7);
  EXPECT_NE(batch[0].values, batch[1].values);
}

TEST(Predict, ZeroInputGivesConstantMap) {
  // Frames at the per-channel mean standardize to zero; with zero biases every
  // activation stays zero until the output conv adds its bias.
  auto g = graph("vinet_s_tiny.json");
  auto store = se::random_init(*g, 9);
  store.replace("dec.out.conv.bias", Tensor({1}, {0.3f}));
  const auto m = se::bind(g, std::move(store));
  Tensor frames(g->input_shape());
  const auto& pre = g->config().preprocess;
  const std::int64_t per = frames.numel() / 3;
  for (std::int64_t i = 0; i < frames.numel(); ++i) {
    frames[static_cast<std::size_t>(i)] = static_cast<float>(pre.mean[static_cast<std::size_t>(i / per)]);
  }
  const auto map = se::predict(m, {frames, 0, ModelVariant::kVinetS});
  const float want = se::sigmoid(Tensor({1}, {0.3f}))[0];
  for (float v : map.values.data()) ASSERT_EQ(v, want);
}

TEST(Predict, NeckOnZerosIsZero) {
  auto g = graph("vinet_a_tiny.json");
  const auto m = se::bind(g, se::random_init(*g, 2));
  const std::vector<std::string> taps{"X_slowfast"};
  const auto out = se::run_graph(m, Tensor(g->input_shape()), taps);
  const Tensor& x = out.at("X_slowfast");
  EXPECT_EQ(x.dims(), g->tap_shape("X_slowfast"));
  for (float v : x.data()) ASSERT_EQ(v, 0.0f);
}

TEST(Predict, Errors) {
  const auto& m = tiny_s();
  EXPECT_THROW(se::predict(m, {Tensor({3, 32, 16, 64}), 0, ModelVariant::kVinetS}),
               se::DimensionError);
  EXPECT_THROW(se::predict(m, {Tensor(m.graph().input_shape()), 0, ModelVariant::kVinetA}),
               se::UsageError);
  auto enc = graph("s3d_tiny.json");
  const auto em = se::bind(enc, se::random_init(*enc, 1));
  EXPECT_THROW(se::predict(em, {Tensor(enc->input_shape()), 0, ModelVariant::kVinetS}),
               se::UsageError);
}

TEST(Ensemble, IdempotentOnEqualMaps) {
  std::mt19937 rng(5);
  const se::SaliencyMap m{oracle::uniform(rng, {1, 1, 8, 12}, 0.01f, 0.99f), 4};
  EXPECT_EQ(se::ensemble(m, m).values, m.values);
}

TEST(Ensemble, ConstantsAcrossSizes) {
  const se::SaliencyMap ms{Tensor::full({1, 1, 7, 12}, 0.2f), 3};
  const se::SaliencyMap ma{Tensor::full({1, 1, 16, 29}, 0.6f), 3};
  const auto e = se::ensemble(ms, ma);
  EXPECT_EQ(e.values.dims(), (Shape{1, 1, 16, 29}));
  const float want = (0.2f + 0.6f) / 2.0f;
  for (float v : e.values.data()) ASSERT_EQ(v, want);
  EXPECT_EQ(e.source_frame, 3);
}

TEST(Ensemble, FollowsViNetADims) {
  const se::SaliencyMap ms{Tensor::full({1, 1, 112, 192}, 0.5f), 0};
  const se::SaliencyMap ma{Tensor::full({1, 1, 256, 464}, 0.5f), 0};
  EXPECT_EQ(se::ensemble(ms, ma).values.dims(), (Shape{1, 1, 256, 464}));
}

TEST(Ensemble, UpsamplesBeforeAveraging) {
  std::mt19937 rng(6);
  const se::SaliencyMap ms{oracle::uniform(rng, {1, 1, 4, 6}, 0, 1), 1};
  const se::SaliencyMap ma{oracle::uniform(rng, {1, 1, 8, 12}, 0, 1), 1};
  const Tensor up = se::trilinear_upsample(ms.values, {1, 8, 12});
  EXPECT_EQ(se::ensemble(ms, ma).values, se::pixelwise_mean(up, ma.values));
  const se::SaliencyMap other{ms.values, 2};
  EXPECT_THROW(se::ensemble(other, ma), se::UsageError);
}

TEST(Bench, ZeroItersIsInvalid) {
  const auto r = se::bench(tiny_s(), 1, 0);
  EXPECT_FALSE(r.valid);
  EXPECT_TRUE(r.fps.empty());
  EXPECT_THROW(se::bench(tiny_s(), 0, 1), se::UsageError);
}

TEST(Bench, ReportsSamples) {
  const auto r = se::bench(tiny_s(), 2, 2, 0);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.batch, 2);
  ASSERT_EQ(r.fps.size(), 2u);
  EXPECT_GT(r.mean_fps, 0.0);
  EXPECT_GE(r.stddev_fps, 0.0);
  EXPECT_EQ(r.model, "vinet_s_tiny");
}
