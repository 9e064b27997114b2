#include "salengine/graph.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "salengine/error.hpp"

namespace salengine {

namespace {

struct KindName {
  LayerKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::kConv3d, "conv3d"},
    {LayerKind::kPointwise, "pointwise"},
    {LayerKind::kShuffle, "shuffle"},
    {LayerKind::kUpsample, "upsample"},
    {LayerKind::kMaxPool, "maxpool"},
    {LayerKind::kAdaptivePoolT, "adaptive_pool_t"},
    {LayerKind::kRelu, "relu"},
    {LayerKind::kSigmoid, "sigmoid"},
    {LayerKind::kConcatSkip, "concat_skip"},
    {LayerKind::kReshapeFast, "reshape_fast"},
    {LayerKind::kAdd, "add"},
};

[[noreturn]] void layer_error(const LayerSpec& layer, const std::string& what) {
  throw ConfigError("layer '" + layer.name + "' (" + std::string(to_string(layer.kind)) +
                    "): " + what);
}

template <typename P>
const P& params_of(const LayerSpec& layer) {
  if (const P* p = std::get_if<P>(&layer.params)) return *p;
  layer_error(layer, "missing or mismatched parameter record");
}

void expect_inputs(const LayerSpec& layer, std::span<const Shape> inputs,
                   std::size_t min, std::size_t max) {
  if (inputs.size() < min || inputs.size() > max) {
    layer_error(layer, "takes " + std::to_string(min) +
                           (min == max ? "" : ".." + std::to_string(max)) +
                           " inputs, got " + std::to_string(inputs.size()));
  }
  for (const Shape& s : inputs) {
    if (s.size() != 4) layer_error(layer, "expects [C,T,H,W] inputs, got " + to_string(s));
  }
}

Shape infer_unchecked(const LayerSpec& layer, std::span<const Shape> in) {
  switch (layer.kind) {
    case LayerKind::kConv3d:
    case LayerKind::kPointwise: {
      expect_inputs(layer, in, 1, 1);
      const auto& p = params_of<Conv3dParams>(layer);
      if (layer.kind == LayerKind::kPointwise &&
          (p.kernel != Triple{1, 1, 1} || p.stride != Triple{1, 1, 1} ||
           p.padding != Triple{0, 0, 0} || p.dilation != Triple{1, 1, 1})) {
        layer_error(layer, "pointwise layers must be 1x1x1, stride 1, no padding");
      }
      return p.output_dims(in[0]);
    }
    case LayerKind::kShuffle: {
      expect_inputs(layer, in, 1, 1);
      const auto g = params_of<ShuffleParams>(layer).groups;
      if (g <= 0 || in[0][0] % g != 0) {
        layer_error(layer, "groups=" + std::to_string(g) + " does not divide C=" +
                               std::to_string(in[0][0]));
      }
      return in[0];
    }
    case LayerKind::kUpsample: {
      expect_inputs(layer, in, 1, 1);
      const auto& s = params_of<UpsampleParams>(layer).scale;
      if (s[0] <= 0 || s[1] <= 0 || s[2] <= 0) layer_error(layer, "non-positive scale");
      return {in[0][0], in[0][1] * s[0], in[0][2] * s[1], in[0][3] * s[2]};
    }
    case LayerKind::kMaxPool: {
      expect_inputs(layer, in, 1, 1);
      const auto& p = params_of<MaxPoolParams>(layer);
      return max_pool3d_output_dims(in[0], p.kernel, p.stride, p.padding);
    }
    case LayerKind::kAdaptivePoolT: {
      expect_inputs(layer, in, 1, 1);
      const auto t = params_of<AdaptivePoolParams>(layer).t_out;
      if (t <= 0 || t > in[0][1]) {
        layer_error(layer, "t_out=" + std::to_string(t) + " exceeds T=" + std::to_string(in[0][1]));
      }
      return {in[0][0], t, in[0][2], in[0][3]};
    }
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
      expect_inputs(layer, in, 1, 1);
      return in[0];
    case LayerKind::kConcatSkip: {
      expect_inputs(layer, in, 2, static_cast<std::size_t>(-1));
      Shape out = in[0];
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (!std::equal(in[i].begin() + 1, in[i].end(), in[0].begin() + 1)) {
          layer_error(layer, "cannot concatenate " + to_string(in[0]) + " with " +
                                 to_string(in[i]));
        }
        out[0] += in[i][0];
      }
      return out;
    }
    case LayerKind::kReshapeFast: {
      expect_inputs(layer, in, 1, 1);
      const auto f = params_of<ReshapeFastParams>(layer).factor;
      if (f <= 0 || in[0][1] % f != 0) {
        layer_error(layer, "factor " + std::to_string(f) + " does not divide T=" +
                               std::to_string(in[0][1]));
      }
      return {in[0][0] * f, in[0][1] / f, in[0][2], in[0][3]};
    }
    case LayerKind::kAdd:
      expect_inputs(layer, in, 2, 2);
      if (in[0] != in[1]) {
        layer_error(layer, "cannot add " + to_string(in[0]) + " and " + to_string(in[1]));
      }
      return in[0];
  }
  layer_error(layer, "unknown kind");
}

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view s) {
  for (const auto& kn : kKindNames) {
    if (kn.name == s) return kn.kind;
  }
  throw ConfigError("unknown layer kind '" + std::string(s) + "'");
}

std::string_view to_string(ModelVariant v) noexcept {
  return v == ModelVariant::kVinetS ? "vinet_s" : "vinet_a";
}

ModelVariant model_variant_from_string(std::string_view s) {
  if (s == "vinet_s" || s == "s") return ModelVariant::kVinetS;
  if (s == "vinet_a" || s == "a") return ModelVariant::kVinetA;
  throw ConfigError("unknown model variant '" + std::string(s) + "'");
}

const Conv3dParams& LayerSpec::conv() const { return params_of<Conv3dParams>(*this); }

Shape infer_layer_shape(const LayerSpec& layer, std::span<const Shape> inputs) {
  try {
    return infer_unchecked(layer, inputs);
  } catch (const ConfigError& e) {
    if (std::string_view(e.what()).starts_with("layer '")) throw;
    layer_error(layer, e.what());
  } catch (const Error& e) {
    layer_error(layer, e.what());
  }
}

ShapeTable infer_shapes(const GraphConfig& cfg, const Shape& input_shape) {
  std::map<std::string, std::size_t, std::less<>> index;
  ShapeTable table;
  table.reserve(cfg.layers.size());
  std::vector<Shape> in;
  for (const LayerSpec& layer : cfg.layers) {
    if (layer.name.empty() || layer.name == kGraphInput) {
      throw ConfigError("invalid layer name '" + layer.name + "'");
    }
    if (index.contains(layer.name)) {
      throw ConfigError("duplicate layer name '" + layer.name + "'");
    }
    in.clear();
    for (const auto& src : layer.inputs) {
      if (src == kGraphInput) {
        in.push_back(input_shape);
      } else if (auto it = index.find(src); it != index.end()) {
        in.push_back(table[it->second].second);
      } else {
        layer_error(layer, "input '" + src + "' is not a graph input or earlier layer");
      }
    }
    index.emplace(layer.name, table.size());
    table.emplace_back(layer.name, infer_layer_shape(layer, in));
  }
  return table;
}

Graph::Graph(GraphConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.input_shape.size() != 4 ||
      std::any_of(cfg_.input_shape.begin(), cfg_.input_shape.end(),
                  [](std::int64_t d) { return d <= 0; })) {
    throw ConfigError("graph '" + cfg_.name + "': input_shape must be 4 positive extents, got " +
                      to_string(cfg_.input_shape));
  }
  if (cfg_.layers.empty()) throw ConfigError("graph '" + cfg_.name + "' has no layers");
  const ShapeTable table = infer_shapes(cfg_, cfg_.input_shape);

  const std::size_t n = cfg_.layers.size();
  shapes_.reserve(n);
  inputs_.resize(n);
  last_use_.resize(n);
  tapped_.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    shapes_.push_back(table[i].second);
    index_.emplace(cfg_.layers[i].name, i);
    last_use_[i] = i;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& src : cfg_.layers[i].inputs) {
      if (src == kGraphInput) {
        inputs_[i].push_back(-1);
      } else {
        const std::size_t j = index_.at(src);
        inputs_[i].push_back(static_cast<std::ptrdiff_t>(j));
        last_use_[j] = std::max(last_use_[j], i);
      }
    }
  }
  for (const auto& [tap, layer] : cfg_.taps) {
    auto it = index_.find(layer);
    if (it == index_.end()) {
      throw ConfigError("tap '" + tap + "' refers to unknown layer '" + layer + "'");
    }
    tapped_[it->second] = true;
  }
}

std::optional<std::size_t> Graph::find(std::string_view layer) const {
  if (auto it = index_.find(layer); it != index_.end()) return it->second;
  return std::nullopt;
}

const Shape& Graph::shape_of(std::string_view layer) const {
  if (auto i = find(layer)) return shapes_[*i];
  throw ConfigError("unknown layer '" + std::string(layer) + "'");
}

std::size_t Graph::tap_layer(std::string_view tap) const {
  auto it = cfg_.taps.find(std::string(tap));
  if (it == cfg_.taps.end()) {
    throw ConfigError("graph '" + cfg_.name + "' has no tap '" + std::string(tap) + "'");
  }
  return index_.at(it->second);
}

const Shape& Graph::tap_shape(std::string_view tap) const { return shapes_[tap_layer(tap)]; }

std::vector<std::int64_t> Graph::decoder_groups() const {
  std::vector<std::int64_t> groups;
  for (const auto& layer : cfg_.layers) {
    if (layer.subgraph == "decoder" && layer.learnable() && layer.conv().groups > 1) {
      groups.push_back(layer.conv().groups);
    }
  }
  return groups;
}

Graph build(GraphConfig cfg) { return Graph(std::move(cfg)); }

std::int64_t ParameterCount::subgraph(std::string_view name) const {
  auto it = per_subgraph.find(std::string(name));
  return it == per_subgraph.end() ? 0 : it->second;
}

ParameterCount count_parameters(const GraphConfig& cfg) {
  ParameterCount pc;
  for (const auto& layer : cfg.layers) {
    if (!layer.learnable()) continue;
    const std::int64_t n = layer.conv().parameter_count();
    pc.per_layer.emplace_back(layer.name, n);
    pc.per_subgraph[layer.subgraph] += n;
    pc.total += n;
  }
  return pc;
}

ParameterCount count_parameters(const Graph& graph) { return count_parameters(graph.config()); }

// ---------------------------------------------------------------------------
// JSON

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr std::string_view kFormatTag = "salengine-graph";
constexpr int kFormatVersion = 1;

ojson triple_json(const Triple& t) { return ojson::array({t[0], t[1], t[2]}); }

ojson layer_json(const LayerSpec& l) {
  ojson j;
  j["name"] = l.name;
  j["kind"] = std::string(to_string(l.kind));
  j["subgraph"] = l.subgraph;
  j["inputs"] = l.inputs;
  switch (l.kind) {
    case LayerKind::kConv3d: {
      const auto& p = l.conv();
      j["in_ch"] = p.in_ch;
      j["out_ch"] = p.out_ch;
      j["groups"] = p.groups;
      j["kernel"] = triple_json(p.kernel);
      j["stride"] = triple_json(p.stride);
      j["padding"] = triple_json(p.padding);
      j["dilation"] = triple_json(p.dilation);
      j["bias"] = p.has_bias;
      break;
    }
    case LayerKind::kPointwise: {
      const auto& p = l.conv();
      j["in_ch"] = p.in_ch;
      j["out_ch"] = p.out_ch;
      j["groups"] = p.groups;
      j["bias"] = p.has_bias;
      break;
    }
    case LayerKind::kShuffle:
      j["groups"] = params_of<ShuffleParams>(l).groups;
      break;
    case LayerKind::kUpsample:
      j["scale"] = triple_json(params_of<UpsampleParams>(l).scale);
      break;
    case LayerKind::kMaxPool: {
      const auto& p = params_of<MaxPoolParams>(l);
      j["kernel"] = triple_json(p.kernel);
      j["stride"] = triple_json(p.stride);
      j["padding"] = triple_json(p.padding);
      break;
    }
    case LayerKind::kAdaptivePoolT:
      j["t_out"] = params_of<AdaptivePoolParams>(l).t_out;
      break;
    case LayerKind::kReshapeFast:
      j["factor"] = params_of<ReshapeFastParams>(l).factor;
      break;
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
    case LayerKind::kConcatSkip:
    case LayerKind::kAdd:
      break;
  }
  return j;
}

class FieldReader {
 public:
  FieldReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  const json& get(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }
  bool has(const char* key) const { return j_.contains(key); }

  std::int64_t integer(const char* key) {
    const json& v = get(key);
    if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
  }
  Triple triple(const char* key) {
    const json& v = get(key);
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); })) {
      fail(std::string("field '") + key + "' must be 3 integers");
    }
    return {v[0].get<std::int64_t>(), v[1].get<std::int64_t>(), v[2].get<std::int64_t>()};
  }
  bool boolean(const char* key) {
    const json& v = get(key);
    if (!v.is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
  }
  std::string string(const char* key) {
    const json& v = get(key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) fail("unknown field '" + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(where_ + ": " + what);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

LayerSpec layer_from_json(const json& j, std::size_t index) {
  std::string where = "layer #" + std::to_string(index);
  if (j.is_object() && j.contains("name") && j["name"].is_string()) {
    where = "layer '" + j["name"].get<std::string>() + "'";
  }
  FieldReader r(j, where);
  LayerSpec l;
  l.name = r.string("name");
  l.kind = layer_kind_from_string(r.string("kind"));
  l.subgraph = r.string("subgraph");
  const json& inputs = r.get("inputs");
  if (!inputs.is_array()) r.fail("'inputs' must be an array");
  for (const auto& s : inputs) {
    if (!s.is_string()) r.fail("'inputs' must hold strings");
    l.inputs.push_back(s.get<std::string>());
  }
  switch (l.kind) {
    case LayerKind::kConv3d: {
      Conv3dParams p;
      p.in_ch = r.integer("in_ch");
      p.out_ch = r.integer("out_ch");
      p.groups = r.integer("groups");
      p.kernel = r.triple("kernel");
      p.stride = r.triple("stride");
      p.padding = r.triple("padding");
      p.dilation = r.triple("dilation");
      p.has_bias = r.boolean("bias");
      l.params = p;
      break;
    }
    case LayerKind::kPointwise: {
      Conv3dParams p;
      p.in_ch = r.integer("in_ch");
      p.out_ch = r.integer("out_ch");
      p.groups = r.integer("groups");
      p.has_bias = r.boolean("bias");
      l.params = p;
      break;
    }
    case LayerKind::kShuffle:
      l.params = ShuffleParams{r.integer("groups")};
      break;
    case LayerKind::kUpsample:
      l.params = UpsampleParams{r.triple("scale")};
      break;
    case LayerKind::kMaxPool:
      l.params = MaxPoolParams{r.triple("kernel"), r.triple("stride"), r.triple("padding")};
      break;
    case LayerKind::kAdaptivePoolT:
      l.params = AdaptivePoolParams{r.integer("t_out")};
      break;
    case LayerKind::kReshapeFast:
      l.params = ReshapeFastParams{r.integer("factor")};
      break;
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
    case LayerKind::kConcatSkip:
    case LayerKind::kAdd:
      break;
  }
  r.finish();
  return l;
}

std::array<double, 3> three_reals(const json& v, const char* what) {
  if (!v.is_array() || v.size() != 3 ||
      !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
    throw ConfigError(std::string("preprocess.") + what + " must be 3 numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

std::string to_json_text(const GraphConfig& cfg) {
  ojson head;
  head["format"] = kFormatTag;
  head["version"] = kFormatVersion;
  head["name"] = cfg.name;
  head["variant"] = cfg.variant ? ojson(std::string(to_string(*cfg.variant))) : ojson(nullptr);
  head["input_shape"] = cfg.input_shape;
  head["preprocess"] = {{"mean", cfg.preprocess.mean}, {"std", cfg.preprocess.std}};
  ojson taps = ojson::object();
  for (const auto& [k, v] : cfg.taps) taps[k] = v;
  head["taps"] = taps;

  std::string out = "{\n";
  for (auto it = head.begin(); it != head.end(); ++it) {
    out += "  " + ojson(it.key()).dump() + ": " + it.value().dump() + ",\n";
  }
  out += "  \"layers\": [\n";
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    out += "    " + layer_json(cfg.layers[i]).dump();
    out += i + 1 < cfg.layers.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

GraphConfig graph_config_from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("graph config is not valid JSON: ") + e.what());
  }
  FieldReader r(j, "graph config");
  if (r.string("format") != kFormatTag) r.fail("format must be \"salengine-graph\"");
  if (r.integer("version") != kFormatVersion) r.fail("unsupported version");
  GraphConfig cfg;
  cfg.name = r.string("name");
  if (const json& v = r.get("variant"); !v.is_null()) {
    if (!v.is_string()) r.fail("'variant' must be a string or null");
    cfg.variant = model_variant_from_string(v.get<std::string>());
  }
  const json& shape = r.get("input_shape");
  if (!shape.is_array()) r.fail("'input_shape' must be an array");
  for (const auto& d : shape) {
    if (!d.is_number_integer()) r.fail("'input_shape' must hold integers");
    cfg.input_shape.push_back(d.get<std::int64_t>());
  }
  if (r.has("preprocess")) {
    FieldReader p(r.get("preprocess"), "preprocess");
    cfg.preprocess.mean = three_reals(p.get("mean"), "mean");
    cfg.preprocess.std = three_reals(p.get("std"), "std");
    p.finish();
    for (double s : cfg.preprocess.std) {
      if (!(s > 0.0)) r.fail("preprocess.std must be positive");
    }
  }
  const json& taps = r.get("taps");
  if (!taps.is_object()) r.fail("'taps' must be an object");
  for (auto it = taps.begin(); it != taps.end(); ++it) {
    if (!it.value().is_string()) r.fail("tap '" + it.key() + "' must name a layer");
    cfg.taps.emplace(it.key(), it.value().get<std::string>());
  }
  const json& layers = r.get("layers");
  if (!layers.is_array()) r.fail("'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    cfg.layers.push_back(layer_from_json(layers[i], i));
  }
  r.finish();
  return cfg;
}

GraphConfig load_graph_config(const std::filesystem::path& path) {
  try {
    return graph_config_from_json_text(detail::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_graph_config(const std::filesystem::path& path, const GraphConfig& cfg) {
  detail::write_file(path, to_json_text(cfg));
}

}  // namespace salengine
