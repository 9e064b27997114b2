#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "salengine/error.hpp"
#include "salengine/graph.hpp"
#include "salengine/image_io.hpp"
#include "salengine/manifest.hpp"
#include "salengine/metrics.hpp"
#include "salengine/ops.hpp"
#include "salengine/parallel.hpp"
#include "salengine/pipeline.hpp"
#include "salengine/tensor_io.hpp"
#include "salengine/weights.hpp"

namespace salengine::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

struct Options {
  int threads = 0;

  // predict
  std::vector<std::string> configs;
  std::vector<std::string> weights;
  std::string manifest;
  std::string out_dir;
  std::string variant;
  int batch = 1;
  bool raw = false;

  // eval
  std::vector<std::string> pred_dirs;
  std::vector<std::string> manifests;
  bool per_frame = false;

  // params / bench / init-weights
  std::string config;
  std::string weights_file;
  std::optional<std::uint64_t> random_seed;
  int iters = 10;
  int warmup = 3;
  std::string out;
  std::uint64_t seed = 0;
  bool fan_in = false;

  bool json = false;
};

struct LoadedModel {
  BoundModel model;
  ModelVariant variant;
};

LoadedModel load_model(const std::string& config_path, const std::optional<std::string>& weights,
                       std::optional<std::uint64_t> seed) {
  auto graph = std::make_shared<const Graph>(build(load_graph_config(config_path)));
  if (!graph->config().variant) {
    throw UsageError(config_path + ": config has no model variant (encoder-only graph?)");
  }
  WeightStore store = weights ? read_container(*weights) : random_init(*graph, seed.value_or(0));
  const ModelVariant v = *graph->config().variant;
  return {bind(std::move(graph), std::move(store)), v};
}

Tensor resize_frame(const Tensor& frame, std::int64_t h, std::int64_t w) {
  if (frame.dim(1) == h && frame.dim(2) == w) return frame;
  const Tensor clip = frame.reshape({3, 1, frame.dim(1), frame.dim(2)});
  return trilinear_upsample(clip, {1, h, w}).reshape({3, h, w});
}

std::vector<SaliencyMap> predict_video(const LoadedModel& m, const std::vector<Tensor>& frames,
                                       int batch) {
  const Shape& in = m.model.graph().input_shape();
  std::vector<Tensor> resized;
  resized.reserve(frames.size());
  for (const auto& f : frames) resized.push_back(resize_frame(f, in[2], in[3]));

  const auto plans = make_windows(static_cast<std::int64_t>(resized.size()), m.variant);
  std::vector<SaliencyMap> maps;
  maps.reserve(plans.size());
  for (std::size_t start = 0; start < plans.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(plans.size(), start + static_cast<std::size_t>(batch));
    std::vector<FrameWindow> windows;
    for (std::size_t i = start; i < end; ++i) {
      windows.push_back(assemble_window(plans[i], resized, m.variant));
    }
    for (auto& s : predict_batch(m.model, windows)) maps.push_back(std::move(s));
  }
  return maps;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.batch < 1) throw UsageError("--batch must be at least 1");
  if (o.configs.size() != o.weights.size()) {
    throw UsageError("every --config needs a matching --weights");
  }
  const RunManifest manifest = load_manifest(o.manifest);

  std::vector<LoadedModel> models;
  for (std::size_t i = 0; i < o.configs.size(); ++i) {
    models.push_back(load_model(o.configs[i], o.weights[i], std::nullopt));
  }
  std::string variant = o.variant;
  if (variant.empty()) {
    if (models.size() == 2) variant = "e";
    else if (models.size() == 1) variant = models[0].variant == ModelVariant::kVinetS ? "s" : "a";
  }
  const LoadedModel* ms = nullptr;
  const LoadedModel* ma = nullptr;
  for (const auto& m : models) (m.variant == ModelVariant::kVinetS ? ms : ma) = &m;
  if (variant == "e") {
    if (models.size() != 2 || ms == nullptr || ma == nullptr) {
      throw UsageError("--variant e needs one ViNet-S and one ViNet-A --config/--weights pair");
    }
  } else if (variant == "s" || variant == "a") {
    const LoadedModel* m = variant == "s" ? ms : ma;
    if (models.size() != 1 || m == nullptr) {
      throw UsageError("--variant " + variant + " needs exactly one matching --config/--weights");
    }
  } else {
    throw UsageError("--variant must be s, a or e");
  }

  std::vector<Tensor> frames;
  for (const auto& p : manifest.frames) frames.push_back(read_frame(p));

  std::vector<SaliencyMap> maps;
  if (variant == "e") {
    auto s_maps = predict_video(*ms, frames, o.batch);
    auto a_maps = predict_video(*ma, frames, o.batch);
    for (std::size_t i = 0; i < frames.size(); ++i) maps.push_back(ensemble(s_maps[i], a_maps[i]));
  } else {
    maps = predict_video(variant == "s" ? *ms : *ma, frames, o.batch);
  }

  fs::create_directories(o.out_dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Tensor map = resize_map(maps[i].values, frames[i].dim(1), frames[i].dim(2));
    const fs::path stem = fs::path(o.out_dir) / (manifest.frames[i].stem().string() + "_sal");
    write_pgm(fs::path(stem).concat(".pgm"), map);
    if (o.raw) write_tensor_file(fs::path(stem).concat(".vnts"), map);
  }
  err << "wrote " << frames.size() << " saliency maps to " << o.out_dir << "\n";
  (void)out;
  return kOk;
}

Tensor load_map(const fs::path& p) {
  Tensor t = read_pnm(p);
  if (t.rank() != 2) throw FormatError(p.string() + ": expected a grayscale PGM");
  return t;
}

MetricReport eval_split(const fs::path& pred_dir, const fs::path& manifest_path,
                        std::ostream& err, bool& warned) {
  const RunManifest m = load_manifest(manifest_path);
  if (m.saliency.empty() && m.fixations.empty()) {
    throw UsageError(manifest_path.string() + ": no saliency or fixation maps to evaluate");
  }
  if (!warned && m.fixations.empty()) {
    err << "warning: " << manifest_path.string() << " has no fixation maps; NSS and AUC-J skipped\n";
    warned = true;
  }
  if (!warned && m.saliency.empty()) {
    err << "warning: " << manifest_path.string()
        << " has no saliency maps; CC, SIM and KLDIV skipped\n";
    warned = true;
  }

  std::vector<fs::path> preds;
  std::vector<std::string> missing;
  for (const auto& f : m.frames) {
    preds.push_back(pred_dir / (f.stem().string() + "_sal.pgm"));
    if (!fs::exists(preds.back())) missing.push_back(preds.back().string());
  }
  if (!missing.empty()) {
    std::string msg = "missing predictions (" + std::to_string(missing.size()) + "):";
    for (const auto& p : missing) msg += "\n  " + p;
    throw Error(msg);
  }

  std::vector<FrameScores> rows;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    Tensor pred = load_map(preds[i]);
    std::optional<Tensor> gt;
    std::optional<FixationMap> fix;
    if (!m.saliency.empty()) gt = load_map(m.saliency[i]);
    if (!m.fixations.empty()) fix = FixationMap::from_tensor(load_map(m.fixations[i]));
    const Tensor& ref = gt ? *gt : fix->points;
    if (pred.dims() != ref.dims()) {
      pred = resize_map(pred.reshape({1, 1, pred.dim(0), pred.dim(1)}), ref.dim(0), ref.dim(1))
                 .reshape(ref.dims());
    }
    try {
      FrameScores s = score_frame(pred, gt ? &*gt : nullptr, fix ? &*fix : nullptr);
      s.frame = m.frames[i].stem().string();
      rows.push_back(std::move(s));
    } catch (const Error& e) {
      throw Error(preds[i].string() + ": " + e.what());
    }
  }
  return aggregate(std::move(rows));
}

ordered_json scores_json(const FrameScores& s) {
  ordered_json j;
  j["frame"] = s.frame;
  const auto v = metric_values(s);
  for (std::size_t m = 0; m < 5; ++m) {
    j[kMetricNames[m]] = v[m] ? ordered_json(*v[m]) : ordered_json(nullptr);
  }
  return j;
}

void print_scores_row(std::ostream& out, const FrameScores& s) {
  out << std::left << std::setw(16) << s.frame << std::right;
  for (const auto& v : metric_values(s)) out << std::setw(10) << (v ? fmt(*v) : "-");
  out << "\n";
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.pred_dirs.size() != o.manifests.size() || o.pred_dirs.empty()) {
    throw UsageError("give one --pred-dir per --manifest");
  }
  std::vector<MetricReport> splits;
  bool warned = false;
  for (std::size_t i = 0; i < o.pred_dirs.size(); ++i) {
    splits.push_back(eval_split(o.pred_dirs[i], o.manifests[i], err, warned));
  }
  const MetricReport report = splits.size() == 1 ? splits[0] : average_splits(splits);

  if (o.json) {
    ordered_json j;
    j["splits"] = splits.size();
    j["frames_evaluated"] = report.frames.size();
    ordered_json mean = scores_json(report.mean);
    mean.erase("frame");
    j["mean"] = mean;
    if (splits.size() > 1) {
      j["split_means"] = ordered_json::array();
      for (const auto& s : splits) {
        ordered_json sm = scores_json(s.mean);
        sm.erase("frame");
        j["split_means"].push_back(sm);
      }
    }
    j["frames"] = ordered_json::array();
    for (const auto& f : report.frames) j["frames"].push_back(scores_json(f));
    out << j.dump(2) << "\n";
    return kOk;
  }
  out << std::left << std::setw(16) << "frame" << std::right;
  for (const char* name : kMetricNames) out << std::setw(10) << name;
  out << "\n";
  if (o.per_frame) {
    for (const auto& f : report.frames) print_scores_row(out, f);
  }
  if (splits.size() > 1) {
    for (std::size_t i = 0; i < splits.size(); ++i) {
      FrameScores s = splits[i].mean;
      s.frame = "split" + std::to_string(i + 1);
      print_scores_row(out, s);
    }
  }
  print_scores_row(out, report.mean);
  return kOk;
}

int cmd_params(const Options& o, std::ostream& out, std::ostream&) {
  const Graph graph = build(load_graph_config(o.config));
  const ParameterCount pc = count_parameters(graph);
  // The backbone is everything outside the decoder: encoder plus neck.
  const std::int64_t backbone = pc.subgraph("encoder") + pc.subgraph("neck");

  std::vector<std::pair<std::string, std::int64_t>> rows;
  for (const char* sg : {"encoder", "neck", "decoder"}) {
    if (pc.per_subgraph.contains(sg)) rows.emplace_back(sg, pc.subgraph(sg));
  }
  for (const auto& [sg, n] : pc.per_subgraph) {
    if (sg != "encoder" && sg != "neck" && sg != "decoder") rows.emplace_back(sg, n);
  }
  rows.emplace_back("backbone", backbone);
  rows.emplace_back("total", pc.total);

  if (o.json) {
    ordered_json j;
    j["model"] = graph.config().name;
    j["variant"] = graph.config().variant ? ordered_json(std::string(to_string(*graph.config().variant)))
                                          : ordered_json(nullptr);
    j["learnable_layers"] = pc.per_layer.size();
    for (const auto& [name, n] : rows) {
      j[name] = {{"params", n}, {"millions", static_cast<double>(n) / 1e6},
                 {"size_mib", static_cast<double>(n) * 4.0 / kMiB}};
    }
    out << j.dump(2) << "\n";
    return kOk;
  }
  out << graph.config().name << " (" << pc.per_layer.size() << " learnable layers)\n";
  out << std::left << std::setw(10) << "part" << std::right << std::setw(14) << "params"
      << std::setw(12) << "millions" << std::setw(12) << "size_mib" << "\n";
  for (const auto& [name, n] : rows) {
    out << std::left << std::setw(10) << name << std::right << std::setw(14) << n << std::setw(12)
        << fmt(static_cast<double>(n) / 1e6, 3) << std::setw(12)
        << fmt(static_cast<double>(n) * 4.0 / kMiB, 2) << "\n";
  }
  return kOk;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream&) {
  if (o.iters < 1) throw UsageError("--iters must be at least 1");
  if (o.batch < 1) throw UsageError("--batch must be at least 1");
  if (o.weights_file.empty() == !o.random_seed) {
    throw UsageError("give exactly one of --weights or --random-weights");
  }
  const LoadedModel m =
      load_model(o.config,
                 o.weights_file.empty() ? std::nullopt : std::optional<std::string>(o.weights_file),
                 o.random_seed);
  const BenchReport r = bench(m.model, o.batch, o.iters, o.warmup);
  if (o.json) {
    ordered_json j;
    j["model"] = r.model;
    j["batch"] = r.batch;
    j["iters"] = r.iters;
    j["warmup"] = r.warmup;
    j["threads"] = r.threads;
    j["valid"] = r.valid;
    j["mean_fps"] = r.mean_fps;
    j["stddev_fps"] = r.stddev_fps;
    j["fps"] = r.fps;
    out << j.dump(2) << "\n";
    return kOk;
  }
  out << r.model << ": batch " << r.batch << ", " << r.iters << " iters (" << r.warmup
      << " warmup), " << r.threads << " threads: " << fmt(r.mean_fps, 2) << " +/- "
      << fmt(r.stddev_fps, 2) << " fps\n";
  return kOk;
}

int cmd_init_weights(const Options& o, std::ostream&, std::ostream& err) {
  const Graph graph = build(load_graph_config(o.config));
  const WeightStore store =
      random_init(graph, o.seed, o.fan_in ? InitScheme::kFanIn : InitScheme::kUniform);
  write_container(store, o.out);
  err << "wrote " << store.size() << " tensors (" << store.total_params() << " params) to "
      << o.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video saliency inference and evaluation", "salengine"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--threads", o.threads,
                 "Worker threads (default: SALENGINE_THREADS, else one per core)")
      ->check(CLI::PositiveNumber);

  auto* predict = app.add_subcommand("predict", "Predict saliency maps for a video manifest");
  predict->add_option("--config", o.configs, "Graph config (twice for --variant e)")->required();
  predict->add_option("--weights", o.weights, "VNWT weights, one per --config")->required();
  predict->add_option("--manifest", o.manifest, "Video manifest (JSON)")->required();
  predict->add_option("--out-dir", o.out_dir, "Output directory")->required();
  predict->add_option("--variant", o.variant, "s, a or e (default: from the config)")
      ->check(CLI::IsMember({"s", "a", "e"}));
  predict->add_option("--batch", o.batch, "Windows per forward batch");
  predict->add_flag("--raw", o.raw, "Also write VNTS tensors");

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred-dir", o.pred_dirs, "Prediction directory (repeat per split)")
      ->required();
  eval->add_option("--manifest", o.manifests, "Ground-truth manifest (repeat per split)")
      ->required();
  eval->add_flag("--per-frame", o.per_frame, "List every frame in the table");
  eval->add_flag("--json", o.json, "Machine-readable output");

  auto* params = app.add_subcommand("params", "Parameter and size audit of a config");
  params->add_option("--config", o.config, "Graph config")->required();
  params->add_flag("--json", o.json, "Machine-readable output");

  auto* benchcmd = app.add_subcommand("bench", "Throughput of end-to-end prediction");
  benchcmd->add_option("--config", o.config, "Graph config")->required();
  benchcmd->add_option("--weights", o.weights_file, "VNWT weights");
  benchcmd->add_option("--random-weights", o.random_seed, "Seed for random weights instead");
  benchcmd->add_option("--batch", o.batch, "Windows per batch (1 and 8 are the usual presets)");
  benchcmd->add_option("--iters", o.iters, "Timed iterations");
  benchcmd->add_option("--warmup", o.warmup, "Untimed warmup iterations");
  benchcmd->add_flag("--json", o.json, "Machine-readable output");

  auto* init = app.add_subcommand("init-weights", "Write seeded random weights for a config");
  init->add_option("--config", o.config, "Graph config")->required();
  init->add_option("--out", o.out, "Output VNWT file")->required();
  init->add_option("--seed", o.seed, "Generator seed");
  init->add_flag("--fan-in", o.fan_in, "Scale each layer's range by sqrt(6 / fan_in)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  set_num_threads(o.threads > 0 ? o.threads : threads_from_env(0));
  try {
    if (*predict) return cmd_predict(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*params) return cmd_params(o, out, err);
    if (*benchcmd) return cmd_bench(o, out, err);
    if (*init) return cmd_init_weights(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace salengine::cli
