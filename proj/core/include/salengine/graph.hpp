#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "salengine/ops.hpp"
#include "salengine/tensor.hpp"

namespace salengine {

enum class LayerKind {
  kConv3d,
  kPointwise,  // 1x1x1 convolution, stride 1, no padding
  kShuffle,
  kUpsample,
  kMaxPool,
  kAdaptivePoolT,
  kRelu,
  kSigmoid,
  kConcatSkip,   // channel concatenation of all inputs, in order
  kReshapeFast,  // [C, T, H, W] -> [C*f, T/f, H, W] row-major reinterpretation
  kAdd,          // elementwise sum of two inputs (residual shortcut)
};

std::string_view to_string(LayerKind kind) noexcept;
LayerKind layer_kind_from_string(std::string_view s);

struct ShuffleParams {
  std::int64_t groups = 1;
  friend bool operator==(const ShuffleParams&, const ShuffleParams&) = default;
};

struct UpsampleParams {
  Triple scale{1, 2, 2};
  friend bool operator==(const UpsampleParams&, const UpsampleParams&) = default;
};

struct MaxPoolParams {
  Triple kernel{1, 1, 1};
  Triple stride{1, 1, 1};
  Triple padding{0, 0, 0};
  friend bool operator==(const MaxPoolParams&, const MaxPoolParams&) = default;
};

struct AdaptivePoolParams {
  std::int64_t t_out = 1;
  friend bool operator==(const AdaptivePoolParams&, const AdaptivePoolParams&) = default;
};

struct ReshapeFastParams {
  std::int64_t factor = 2;
  friend bool operator==(const ReshapeFastParams&, const ReshapeFastParams&) = default;
};

using LayerParams = std::variant<std::monostate, Conv3dParams, ShuffleParams,
                                 UpsampleParams, MaxPoolParams,
                                 AdaptivePoolParams, ReshapeFastParams>;

/// Name of the implicit graph input. Layers list it in `inputs` to consume
/// the clip tensor.
inline constexpr std::string_view kGraphInput = "input";

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kRelu;
  std::vector<std::string> inputs;
  std::string subgraph;  // "encoder", "neck" or "decoder"; used for audits
  LayerParams params;

  bool learnable() const noexcept {
    return kind == LayerKind::kConv3d || kind == LayerKind::kPointwise;
  }
  const Conv3dParams& conv() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class ModelVariant { kVinetS, kVinetA };

std::string_view to_string(ModelVariant v) noexcept;
ModelVariant model_variant_from_string(std::string_view s);

/// Per-channel input standardization applied to [0, 1] frames.
struct Preprocess {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
  friend bool operator==(const Preprocess&, const Preprocess&) = default;
};

/// Declarative description of a network: an ordered layer list plus named
/// outputs. Layers may only consume the graph input or earlier layers.
struct GraphConfig {
  std::string name;
  std::optional<ModelVariant> variant;
  Shape input_shape;
  Preprocess preprocess;
  std::vector<LayerSpec> layers;
  std::map<std::string, std::string> taps;  // tap name -> layer name

  friend bool operator==(const GraphConfig&, const GraphConfig&) = default;
};

/// Output dims of one layer given the dims of its inputs. Throws
/// ConfigError (naming the layer) when the inputs are inconsistent.
Shape infer_layer_shape(const LayerSpec& layer, std::span<const Shape> inputs);

/// One row per layer, in declaration order.
using ShapeTable = std::vector<std::pair<std::string, Shape>>;

ShapeTable infer_shapes(const GraphConfig& cfg, const Shape& input_shape);

/// A validated, shape-checked graph. Immutable and shareable.
class Graph {
 public:
  explicit Graph(GraphConfig cfg);

  const GraphConfig& config() const noexcept { return cfg_; }
  const std::vector<LayerSpec>& layers() const noexcept { return cfg_.layers; }
  const Shape& input_shape() const noexcept { return cfg_.input_shape; }

  /// Output dims of layer i.
  const Shape& shape(std::size_t i) const { return shapes_.at(i); }
  const Shape& shape_of(std::string_view layer) const;
  const Shape& tap_shape(std::string_view tap) const;

  /// Layer index for a name, or nullopt.
  std::optional<std::size_t> find(std::string_view layer) const;
  std::size_t tap_layer(std::string_view tap) const;

  /// Input indices for layer i; -1 marks the graph input.
  const std::vector<std::ptrdiff_t>& input_indices(std::size_t i) const {
    return inputs_.at(i);
  }
  /// Index of the last layer reading layer i's output (i itself if unread).
  std::size_t last_use(std::size_t i) const { return last_use_.at(i); }
  bool is_tap(std::size_t i) const { return tapped_.at(i); }

  /// Grouped-conv group counts of the decoder subgraph, in layer order.
  std::vector<std::int64_t> decoder_groups() const;

 private:
  GraphConfig cfg_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<std::ptrdiff_t>> inputs_;
  std::vector<std::size_t> last_use_;
  std::vector<bool> tapped_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Validates and shape-checks a config. Throws ConfigError.
Graph build(GraphConfig cfg);

struct ParameterCount {
  std::vector<std::pair<std::string, std::int64_t>> per_layer;  // learnable layers only
  std::map<std::string, std::int64_t> per_subgraph;
  std::int64_t total = 0;

  std::int64_t subgraph(std::string_view name) const;
};

ParameterCount count_parameters(const Graph& graph);
ParameterCount count_parameters(const GraphConfig& cfg);

/// JSON text of a config. Deterministic: one layer per line, keys in a fixed
/// order, so rebuilding a reference file is byte-identical.
std::string to_json_text(const GraphConfig& cfg);
GraphConfig graph_config_from_json_text(std::string_view text);

GraphConfig load_graph_config(const std::filesystem::path& path);
void save_graph_config(const std::filesystem::path& path, const GraphConfig& cfg);

}  // namespace salengine
