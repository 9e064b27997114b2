#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "salengine/architectures.hpp"
#include "salengine/error.hpp"
#include "salengine/graph.hpp"

namespace se = salengine;
namespace fs = std::filesystem;
using se::Shape;

namespace {

const fs::path kConfigs = fs::path(SALENGINE_SOURCE_DIR) / "configs";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

se::LayerSpec conv_layer(std::string name, std::string input, std::int64_t in_ch,
                         std::int64_t out_ch, std::int64_t groups, se::Triple k,
                         se::Triple pad = {0, 0, 0}) {
  se::Conv3dParams p;
  p.in_ch = in_ch;
  p.out_ch = out_ch;
  p.groups = groups;
  p.kernel = k;
  p.padding = pad;
  return {std::move(name), se::LayerKind::kConv3d, {std::move(input)}, "encoder", p};
}

// conv(3->4, 3x3x3, g=1, bias) -> relu -> conv(4->6, 1x1x1, g=2, bias)
se::GraphConfig toy_config() {
  se::GraphConfig cfg;
  cfg.name = "toy";
  cfg.input_shape = {3, 4, 5, 5};
  cfg.layers.push_back(conv_layer("c1", "input", 3, 4, 1, {3, 3, 3}, {1, 1, 1}));
  cfg.layers.push_back({"r1", se::LayerKind::kRelu, {"c1"}, "encoder", {}});
  auto c2 = conv_layer("c2", "r1", 4, 6, 2, {1, 1, 1});
  c2.kind = se::LayerKind::kPointwise;
  c2.subgraph = "decoder";
  cfg.layers.push_back(c2);
  cfg.taps["out"] = "c2";
  return cfg;
}

double rel_err(double got, double want) { return std::abs(got - want) / want; }

}  // namespace

TEST(Graph, ToyShapesAndHandCount) {
  const se::Graph g = se::build(toy_config());
  EXPECT_EQ(g.tap_shape("out"), (Shape{6, 4, 5, 5}));
  const auto pc = se::count_parameters(g);
  // 4*3*27 + 4 and 6*(4/2)*1 + 6.
  EXPECT_EQ(pc.total, 328 + 18);
  EXPECT_EQ(pc.subgraph("encoder"), 328);
  EXPECT_EQ(pc.subgraph("decoder"), 18);
  EXPECT_EQ(pc.subgraph("neck"), 0);
}

TEST(Graph, IdentityGraph) {
  se::GraphConfig cfg;
  cfg.name = "id";
  cfg.input_shape = {2, 3, 4, 5};
  cfg.layers.push_back({"r", se::LayerKind::kRelu, {"input"}, "encoder", {}});
  cfg.taps["out"] = "r";
  EXPECT_EQ(se::build(cfg).tap_shape("out"), cfg.input_shape);
}

TEST(Graph, ErrorsNameTheLayer) {
  auto cfg = toy_config();
  std::get<se::Conv3dParams>(cfg.layers[2].params).groups = 3;
  try {
    se::build(cfg);
    FAIL() << "expected ConfigError";
  } catch (const se::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("c2"), std::string::npos) << e.what();
  }

  cfg = toy_config();
  cfg.layers[1].inputs = {"nope"};
  EXPECT_THROW(se::build(cfg), se::ConfigError);
  cfg = toy_config();
  cfg.layers[1].name = "c1";
  EXPECT_THROW(se::build(cfg), se::ConfigError);
  cfg = toy_config();
  cfg.taps["bad"] = "missing";
  EXPECT_THROW(se::build(cfg), se::ConfigError);
  cfg = toy_config();
  std::get<se::Conv3dParams>(cfg.layers[0].params).in_ch = 2;
  EXPECT_THROW(se::build(cfg), se::ConfigError);
}

TEST(Graph, JsonRoundTripAndStrictness) {
  const auto cfg = toy_config();
  const std::string text = se::to_json_text(cfg);
  const auto back = se::graph_config_from_json_text(text);
  EXPECT_EQ(back, cfg);
  EXPECT_EQ(se::to_json_text(back), text);

  std::string unknown = text;
  unknown.replace(unknown.find("\"bias\""), 6, "\"biaz\"");
  EXPECT_THROW(se::graph_config_from_json_text(unknown), se::ConfigError);
  EXPECT_THROW(se::graph_config_from_json_text("{not json"), se::ConfigError);
}

TEST(Graph, ReferenceConfigFilesAreCurrent) {
  for (const auto& [file, cfg] : se::reference_configs()) {
    SCOPED_TRACE(file);
    const std::string on_disk = slurp(kConfigs / file);
    EXPECT_EQ(on_disk, se::to_json_text(cfg));
    EXPECT_EQ(se::load_graph_config(kConfigs / file), cfg);
  }
}

TEST(Graph, RebuildIsIdentical) {
  EXPECT_EQ(se::s3d_encoder({224, 384, 1}), se::s3d_encoder({224, 384, 1}));
  EXPECT_EQ(se::vinet_config(se::ModelVariant::kVinetA),
            se::vinet_config(se::ModelVariant::kVinetA));
}

TEST(SlowFast, FullResolutionTaps) {
  const se::Graph g = se::build(se::slowfast_r50_encoder({256, 464, 1}));
  EXPECT_EQ(g.tap_shape("X_slow"), (Shape{2048, 8, 16, 29}));
  EXPECT_EQ(g.tap_shape("X_fast"), (Shape{256, 32, 16, 29}));
  EXPECT_EQ(g.tap_shape("X1"), (Shape{64, 8, 128, 232}));
  EXPECT_EQ(g.tap_shape("X2"), (Shape{320, 8, 64, 116}));
  EXPECT_EQ(g.tap_shape("X3"), (Shape{640, 8, 32, 58}));
  EXPECT_EQ(g.tap_shape("X4"), (Shape{1280, 8, 16, 29}));
}

TEST(SlowFast, ReducedWidthScalesChannels) {
  const se::Graph full = se::build(se::slowfast_r50_encoder({64, 96, 1}));
  const se::Graph eighth = se::build(se::slowfast_r50_encoder({64, 96, 8}));
  for (const char* tap : {"X1", "X2", "X3", "X4", "X_slow", "X_fast"}) {
    Shape want = full.tap_shape(tap);
    want[0] /= 8;
    EXPECT_EQ(eighth.tap_shape(tap), want) << tap;
  }
}

TEST(S3d, TapSchedule) {
  const se::Graph g = se::build(se::s3d_encoder({224, 384, 1}));
  EXPECT_EQ(g.tap_shape("X1"), (Shape{192, 16, 56, 96}));
  EXPECT_EQ(g.tap_shape("X2"), (Shape{480, 16, 28, 48}));
  EXPECT_EQ(g.tap_shape("X3"), (Shape{832, 8, 14, 24}));
  EXPECT_EQ(g.tap_shape("X4"), (Shape{1024, 4, 7, 12}));
}

TEST(Neck, FusedShapeAndHalvedSkips) {
  const se::Graph g = se::build(se::load_graph_config(kConfigs / "vinet_a.json"));
  EXPECT_EQ(g.tap_shape("X_slowfast"), (Shape{1536, 8, 16, 29}));
  EXPECT_EQ(g.tap_shape("skip1")[0], 32);
  EXPECT_EQ(g.tap_shape("skip2")[0], 160);
  EXPECT_EQ(g.tap_shape("skip3")[0], 320);
  EXPECT_EQ(g.tap_shape("skip4")[0], 640);
}

TEST(Decoder, GroupScheduleAndShuffles) {
  for (const char* file : {"vinet_a.json", "vinet_s.json", "vinet_a_tiny.json", "vinet_s_tiny.json"}) {
    SCOPED_TRACE(file);
    const se::Graph g = se::build(se::load_graph_config(kConfigs / file));
    EXPECT_EQ(g.decoder_groups(), (std::vector<std::int64_t>{32, 16, 8, 8, 4, 2}));
    for (int b = 1; b <= 6; ++b) {
      const std::string shuffle = "dec.b" + std::to_string(b) + ".shuffle";
      EXPECT_EQ(g.find(shuffle).has_value(), b <= 3) << shuffle;
      if (b <= 3) {
        EXPECT_EQ(g.layers()[*g.find(shuffle)].inputs[0], "dec.b" + std::to_string(b) + ".conv");
      }
    }
    const auto& out = g.layers()[*g.find("dec.out.conv")].conv();
    EXPECT_EQ(out.groups, 1);
    EXPECT_EQ(out.out_ch, 1);
  }
}

TEST(Decoder, SaliencyAtInputResolution) {
  for (const auto& [file, cfg] : se::reference_configs()) {
    if (!cfg.variant) continue;
    SCOPED_TRACE(file);
    const se::Graph g = se::build(cfg);
    EXPECT_EQ(g.tap_shape("saliency"), (Shape{1, 1, cfg.input_shape[2], cfg.input_shape[3]}));
  }
}

TEST(Decoder, GroupingCutsParametersFourfold) {
  for (auto v : {se::ModelVariant::kVinetA, se::ModelVariant::kVinetS}) {
    se::GraphConfig grouped = v == se::ModelVariant::kVinetA
                                  ? se::slowfast_r50_encoder({256, 464, 1})
                                  : se::s3d_encoder({224, 384, 1});
    if (v == se::ModelVariant::kVinetA) se::append_neck(grouped);
    se::GraphConfig dense = grouped;
    const char* input = v == se::ModelVariant::kVinetA ? "X_slowfast" : "X4";
    auto schedule = se::default_decoder_schedule(v);
    se::append_decoder(grouped, input, schedule);
    for (auto& b : schedule.blocks) {
      b.groups = 1;
      b.shuffle = false;
    }
    se::append_decoder(dense, input, schedule);
    const auto g = se::count_parameters(grouped).subgraph("decoder");
    const auto d = se::count_parameters(dense).subgraph("decoder");
    EXPECT_LT(4 * g, d);
  }
}

TEST(ParameterAudit, TargetBudgets) {
  const auto a = se::count_parameters(se::load_graph_config(kConfigs / "vinet_a.json"));
  const auto s = se::count_parameters(se::load_graph_config(kConfigs / "vinet_s.json"));
  EXPECT_LE(rel_err(static_cast<double>(a.total), 38.69e6), 0.10);
  EXPECT_LE(rel_err(static_cast<double>(a.subgraph("encoder") + a.subgraph("neck")), 37e6), 0.10);
  EXPECT_LE(rel_err(static_cast<double>(a.subgraph("decoder")), 1.6e6), 0.25);
  EXPECT_LE(rel_err(static_cast<double>(s.total), 9.5e6), 0.15);
  EXPECT_LE(rel_err(static_cast<double>(a.total + s.total), 48.19e6), 0.10);
}

TEST(ParameterAudit, SumOfLayersMatchesTotal) {
  const auto a = se::count_parameters(se::load_graph_config(kConfigs / "vinet_a_tiny.json"));
  std::int64_t sum = 0;
  for (const auto& [name, n] : a.per_layer) sum += n;
  EXPECT_EQ(sum, a.total);
  std::int64_t by_subgraph = 0;
  for (const auto& [name, n] : a.per_subgraph) by_subgraph += n;
  EXPECT_EQ(by_subgraph, a.total);
}

TEST(Graph, LastUseAndInputIndices) {
  const se::Graph g = se::build(toy_config());
  EXPECT_EQ(g.input_indices(0), (std::vector<std::ptrdiff_t>{-1}));
  EXPECT_EQ(g.input_indices(2), (std::vector<std::ptrdiff_t>{1}));
  EXPECT_EQ(g.last_use(0), 1u);
  EXPECT_EQ(g.last_use(2), 2u);
  EXPECT_TRUE(g.is_tap(2));
  EXPECT_FALSE(g.is_tap(0));
}
