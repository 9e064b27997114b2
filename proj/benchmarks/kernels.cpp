#include <benchmark/benchmark.h>

#include <filesystem>
#include <memory>
#include <random>

#include "salengine/graph.hpp"
#include "salengine/ops.hpp"
#include "salengine/pipeline.hpp"
#include "salengine/weights.hpp"

namespace se = salengine;
namespace fs = std::filesystem;
using se::Tensor;

namespace {

Tensor random_tensor(se::Shape dims, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor t(std::move(dims));
  for (float& v : t.mutable_data()) v = u(rng);
  return t;
}

// Decoder-like 3x3x3 conv: channels and groups from the range arguments.
void BM_Conv3d(benchmark::State& state) {
  se::Conv3dParams p;
  p.in_ch = p.out_ch = state.range(0);
  p.groups = state.range(1);
  p.kernel = {3, 3, 3};
  p.padding = {1, 1, 1};
  const Tensor x = random_tensor({p.in_ch, 4, 16, 29}, 1);
  const Tensor w = random_tensor(p.weight_dims(), 2);
  const Tensor b = random_tensor({p.out_ch}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(se::conv3d(x, w, &b, p));
  state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_Conv3d)->Args({64, 1})->Args({64, 8})->Args({64, 32})->Unit(benchmark::kMillisecond);

void BM_ChannelShuffle(benchmark::State& state) {
  const Tensor x = random_tensor({256, 8, 16, 29}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(se::channel_shuffle(x, state.range(0)));
  state.SetBytesProcessed(state.iterations() * x.numel() * 4);
}
BENCHMARK(BM_ChannelShuffle)->Arg(8)->Arg(32);

void BM_TrilinearUpsample(benchmark::State& state) {
  const Tensor x = random_tensor({32, 4, 32, 58}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(se::trilinear_upsample_scale(x, {2, 2, 2}));
  state.SetItemsProcessed(state.iterations() * x.numel() * 8);
}
BENCHMARK(BM_TrilinearUpsample)->Unit(benchmark::kMillisecond);

// One window through a tiny model; range(0) selects ViNet-S (0) or ViNet-A (1).
void BM_TinyForward(benchmark::State& state) {
  const char* file = state.range(0) == 0 ? "vinet_s_tiny.json" : "vinet_a_tiny.json";
  auto g = std::make_shared<const se::Graph>(
      se::build(se::load_graph_config(fs::path(SALENGINE_SOURCE_DIR) / "configs" / file)));
  const auto model = se::bind(g, se::random_init(*g, 1, se::InitScheme::kFanIn));
  Tensor frames = random_tensor(g->input_shape(), 6);
  for (float& v : frames.mutable_data()) v = 0.5f + 0.5f * v;
  const se::FrameWindow w{frames, 0, *g->config().variant};
  for (auto _ : state) benchmark::DoNotOptimize(se::predict(model, w));
  state.SetLabel(g->config().name);
}
BENCHMARK(BM_TinyForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
