// Acceptance checks: one PASS/FAIL line per criterion. Arguments are the unit
// test executables, rerun here to time the whole suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "oracles.hpp"
#include "salengine/graph.hpp"
#include "salengine/metrics.hpp"
#include "salengine/ops.hpp"
#include "salengine/pipeline.hpp"
#include "salengine/weights.hpp"

namespace se = salengine;
namespace fs = std::filesystem;
using nlohmann::json;
using se::Shape;
using se::Tensor;

namespace {

const fs::path kConfigs = fs::path(SALENGINE_SOURCE_DIR) / "configs";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects the first few failure messages of one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
};

json cli_json(std::vector<std::string> args, int& code) {
  std::ostringstream out, err;
  code = se::cli::run(args, out, err);
  return code == 0 ? json::parse(out.str()) : json();
}

double rel_err(double got, double want) { return std::abs(got - want) / want; }

void shape_anchor(Check& c) {
  const auto t0 = Clock::now();
  const se::Graph g = se::build(se::load_graph_config(kConfigs / "vinet_a.json"));
  const double dt = seconds_since(t0);
  c.expect(g.input_shape() == Shape{3, 32, 256, 464}, "input " + se::to_string(g.input_shape()));
  c.expect(g.tap_shape("X_slowfast") == Shape{1536, 8, 16, 29},
           "X_slowfast " + se::to_string(g.tap_shape("X_slowfast")));
  c.expect(dt < 1.0, "took " + std::to_string(dt) + " s");
}

void parameter_audit(Check& c) {
  const auto t0 = Clock::now();
  int code = 0;
  const json a = cli_json({"params", "--config", (kConfigs / "vinet_a.json").string(), "--json"}, code);
  c.expect(code == 0, "params vinet_a exit " + std::to_string(code));
  const json s = cli_json({"params", "--config", (kConfigs / "vinet_s.json").string(), "--json"}, code);
  c.expect(code == 0, "params vinet_s exit " + std::to_string(code));
  if (!c.failures.empty()) return;
  const double a_total = a["total"]["params"], a_backbone = a["backbone"]["params"];
  const double a_decoder = a["decoder"]["params"], s_total = s["total"]["params"];
  c.expect(rel_err(a_total, 38.69e6) <= 0.10, "ViNet-A total " + std::to_string(a_total));
  c.expect(rel_err(a_backbone, 37e6) <= 0.10, "backbone " + std::to_string(a_backbone));
  c.expect(rel_err(s_total, 9.5e6) <= 0.15, "ViNet-S total " + std::to_string(s_total));
  c.expect(rel_err(a_decoder, 1.6e6) <= 0.25, "ViNet-A decoder " + std::to_string(a_decoder));
  c.expect(seconds_since(t0) < 5.0, "took " + std::to_string(seconds_since(t0)) + " s");
}

void group_schedule(Check& c) {
  for (const char* file : {"vinet_a.json", "vinet_s.json"}) {
    const se::Graph g = se::build(se::load_graph_config(kConfigs / file));
    c.expect(g.decoder_groups() == std::vector<std::int64_t>{32, 16, 8, 8, 4, 2},
             std::string(file) + ": decoder groups");
    for (int b = 1; b <= 6; ++b) {
      const std::string conv = "dec.b" + std::to_string(b) + ".conv";
      const std::string shuffle = "dec.b" + std::to_string(b) + ".shuffle";
      const auto idx = g.find(shuffle);
      c.expect(idx.has_value() == (b <= 3), std::string(file) + ": " + shuffle);
      if (idx) {
        const auto& layer = g.layers()[*idx];
        c.expect(layer.inputs == std::vector<std::string>{conv},
                 std::string(file) + ": " + shuffle + " follows " + conv);
      }
    }
  }
}

void kernel_oracles(Check& c) {
  std::mt19937 rng(101);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int trial = 0; trial < 50; ++trial) {
    static const int kGroups[] = {1, 2, 4, 8};
    se::Conv3dParams p;
    p.groups = kGroups[pick(0, 3)];
    p.in_ch = p.groups * pick(1, 8 / p.groups);
    p.out_ch = p.groups * pick(1, 8 / p.groups);
    Shape in{p.in_ch};
    for (int i = 0; i < 3; ++i) {
      p.kernel[i] = pick(1, 3);
      p.padding[i] = pick(0, 1);
      p.stride[i] = pick(1, 2);
      in.push_back(pick(std::max<int>(1, static_cast<int>(p.kernel[i] - 2 * p.padding[i])), 5));
    }
    const Tensor x = oracle::uniform(rng, in, -1, 1);
    const Tensor w = oracle::uniform(rng, p.weight_dims(), -1, 1);
    const Tensor b = oracle::uniform(rng, {p.out_ch}, -1, 1);
    se::Conv3dParams dense = p;
    dense.groups = 1;
    const Tensor got = se::conv3d(x, w, &b, p);
    const Tensor want = se::conv3d(x, oracle::block_diagonal(w, p), &b, dense);
    float diff = 0;
    for (std::size_t i = 0; i < got.data().size(); ++i) diff = std::max(diff, std::abs(got[i] - want[i]));
    c.expect(got.dims() == want.dims() && diff <= 1e-5f,
             "conv trial " + std::to_string(trial) + " diff " + std::to_string(diff));
  }
  for (std::int64_t ch = 1; ch <= 64; ++ch) {
    for (std::int64_t g = 1; g <= ch; ++g) {
      if (ch % g != 0) continue;
      auto perm = se::channel_shuffle_permutation(ch, g);
      std::sort(perm.begin(), perm.end());
      bool ok = static_cast<std::int64_t>(perm.size()) == ch;
      for (std::int64_t i = 0; ok && i < ch; ++i) ok = perm[static_cast<std::size_t>(i)] == i;
      c.expect(ok, "shuffle C=" + std::to_string(ch) + " g=" + std::to_string(g));
    }
  }
  const Tensor up = se::trilinear_upsample_scale(Tensor({1, 1, 1, 2}, {0, 1}), {1, 1, 2});
  const float hand[] = {0.0f, 0.25f, 0.75f, 1.0f};
  c.expect(up.dims() == Shape{1, 1, 1, 4}, "ramp dims");
  for (std::size_t i = 0; i < 4 && up.numel() == 4; ++i) {
    c.expect(std::abs(up[i] - hand[i]) <= 1e-6f, "ramp value " + std::to_string(i));
  }
}

void metric_oracles(Check& c) {
  std::mt19937 rng(102);
  std::uniform_int_distribution<int> side(4, 8);
  for (int i = 0; i < 100; ++i) {
    const Shape dims{side(rng), side(rng)};
    const Tensor p = oracle::uniform(rng, dims, 0.01f, 1), q = oracle::uniform(rng, dims, 0.01f, 1);
    Tensor fix(dims);
    for (float& v : fix.mutable_data()) v = std::bernoulli_distribution(0.3)(rng) ? 1.0f : 0.0f;
    fix[0] = 1.0f;
    fix[1] = 0.0f;
    const auto f = se::FixationMap::from_tensor(fix);
    const std::string at = " instance " + std::to_string(i);
    c.expect(std::abs(se::cc(p, q) - oracle::cc(p, q)) <= 1e-6, "CC" + at);
    c.expect(std::abs(se::nss(p, f) - oracle::nss(p, fix)) <= 1e-6, "NSS" + at);
    c.expect(std::abs(se::sim(p, q) - oracle::sim(p, q)) <= 1e-6, "SIM" + at);
    c.expect(std::abs(se::kldiv(p, q) - oracle::kldiv(p, q)) <= 1e-5, "KLDiv" + at);
    c.expect(std::abs(se::auc_judd(p, f) - oracle::auc_judd(p, fix)) <= 1e-6, "AUC-J" + at);
    c.expect(std::abs(se::cc(p, p) - 1.0) <= 1e-9, "CC(P,P)" + at);
    c.expect(std::abs(se::sim(p, p) - 1.0) <= 1e-9, "SIM(P,P)" + at);
    c.expect(std::abs(se::kldiv(p, p)) <= 1e-5, "KLDiv(P,P)" + at);
    c.expect(std::abs(se::loss(p, p) + 1.0) <= 1e-5, "Loss(P,P)" + at);
  }
}

void auc_rank_invariance(Check& c) {
  std::mt19937 rng(103);
  std::uniform_real_distribution<float> scale(0.1f, 10.0f), shift(-5.0f, 5.0f);
  std::uniform_int_distribution<int> level(1, 16), power(1, 3);
  for (int i = 0; i < 20; ++i) {
    Tensor p({8, 8}), fix({8, 8});
    for (float& v : p.mutable_data()) v = static_cast<float>(level(rng)) / 16.0f;
    for (float& v : fix.mutable_data()) v = std::bernoulli_distribution(0.25)(rng) ? 1.0f : 0.0f;
    fix[0] = 1.0f;
    fix[1] = 0.0f;
    const auto f = se::FixationMap::from_tensor(fix);
    const float a = scale(rng), b = shift(rng);
    const int e = power(rng);
    Tensor t = p;
    for (float& v : t.mutable_data()) v = a * std::pow(v, static_cast<float>(e)) + b;
    // Distinct grid values must stay distinct for the transform to be strictly
    // increasing after rounding.
    std::set<float> before(p.data().begin(), p.data().end()), after(t.data().begin(), t.data().end());
    c.expect(before.size() == after.size(), "transform " + std::to_string(i) + " merged values");
    c.expect(se::auc_judd(t, f) == se::auc_judd(p, f), "transform " + std::to_string(i));
  }
}

void windowing(Check& c) {
  for (auto v : {se::ModelVariant::kVinetS, se::ModelVariant::kVinetA}) {
    const std::string name(se::to_string(v));
    for (std::int64_t len : {1, 31, 32, 100}) {
      const auto plans = se::make_windows(len, v);
      std::vector<int> hits(static_cast<std::size_t>(len), 0);
      bool in_range = true;
      for (const auto& p : plans) {
        if (p.target >= 0 && p.target < len) ++hits[static_cast<std::size_t>(p.target)];
        in_range = in_range && p.frames.size() == 32;
        for (auto f : p.frames) in_range = in_range && f >= 0 && f < len;
      }
      c.expect(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }),
               name + " len " + std::to_string(len) + ": targets");
      c.expect(in_range, name + " len " + std::to_string(len) + ": frame indices");
    }
  }
  const std::int64_t len = 100;
  for (std::int64_t t = 32; t + 30 < len; ++t) {
    const auto plan = se::window_for(t, len, se::ModelVariant::kVinetA);
    bool ok = plan.frames.size() == 32;
    for (std::int64_t k = 0; ok && k < 32; ++k) ok = plan.frames[static_cast<std::size_t>(k)] == t - 32 + 2 * k;
    c.expect(ok, "ViNet-A interior t=" + std::to_string(t));
  }
}

void ensemble(Check& c) {
  std::mt19937 rng(104);
  const se::SaliencyMap m{oracle::uniform(rng, {1, 1, 16, 29}, 0, 1), 5};
  c.expect(se::ensemble(m, m).values == m.values, "ensemble(m, m) != m");
  const se::SaliencyMap ms{Tensor::full({1, 1, 7, 12}, 0.2f), 5};
  const se::SaliencyMap ma{Tensor::full({1, 1, 16, 29}, 0.6f), 5};
  const Tensor e = se::ensemble(ms, ma).values;
  c.expect(e.dims() == ma.values.dims(), "dims " + se::to_string(e.dims()));
  const float want = (0.2f + 0.6f) / 2.0f;
  c.expect(std::all_of(e.data().begin(), e.data().end(), [&](float v) { return v == want; }),
           "constant maps");
}

void end_to_end(Check& c, const std::vector<std::string>& suite) {
  auto g = std::make_shared<const se::Graph>(se::build(se::load_graph_config(kConfigs / "vinet_s_tiny.json")));
  const se::WeightStore store = se::random_init(*g, 7, se::InitScheme::kFanIn);
  const std::string bytes = se::encode_container(store);
  const se::WeightStore back = se::decode_container(bytes);
  c.expect(back == store && se::encode_container(back) == bytes, "VNWT roundtrip");

  const auto model = se::bind(g, back);
  std::mt19937 rng(105);
  const se::FrameWindow w{oracle::uniform(rng, g->input_shape(), 0, 1), 0, se::ModelVariant::kVinetS};
  const Tensor first = se::predict(model, w).values;
  const Tensor second = se::predict(model, w).values;
  c.expect(first == second, "predict not bit-identical");
  const auto [lo, hi] = std::minmax_element(first.data().begin(), first.data().end());
  c.expect(*lo < *hi, "constant saliency map");

  const auto t0 = Clock::now();
  for (const auto& exe : suite) {
    const std::string cmd = "\"" + exe + "\" > /dev/null 2>&1";
    c.expect(std::system(cmd.c_str()) == 0, exe + " failed");
  }
  const double dt = seconds_since(t0);
  c.expect(!suite.empty(), "no test executables given");
  c.expect(dt < 120.0, "suite took " + std::to_string(dt) + " s");
}

void bench_protocols(Check& c) {
  for (const char* batch : {"1", "8"}) {
    int code = 0;
    const json r = cli_json({"bench", "--config", (kConfigs / "vinet_s_tiny.json").string(),
                             "--random-weights", "3", "--batch", batch, "--iters", "2",
                             "--warmup", "1", "--json"},
                            code);
    const std::string at = std::string("batch ") + batch;
    c.expect(code == 0, at + ": exit " + std::to_string(code));
    if (code != 0) continue;
    c.expect(r["valid"] == true, at + ": report not valid");
    c.expect(r["batch"] == std::stoi(batch), at + ": batch field");
    c.expect(r["fps"].size() == 2, at + ": fps samples");
    c.expect(r["mean_fps"].get<double>() > 0, at + ": mean fps");
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> suite(argv + 1, argv + argc);
  const std::vector<std::pair<const char*, std::function<void(Check&)>>> criteria{
      {"shape anchor", shape_anchor},
      {"parameter audit", parameter_audit},
      {"group schedule", group_schedule},
      {"kernel oracles", kernel_oracles},
      {"metric oracles", metric_oracles},
      {"AUC-J rank invariance", auc_rank_invariance},
      {"windowing", windowing},
      {"ensemble", ensemble},
      {"end-to-end determinism", [&](Check& c) { end_to_end(c, suite); }},
      {"bench harness", bench_protocols},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    if (c.failures.empty()) {
      std::cout << "PASS " << name << "\n";
    } else {
      ++failed;
      std::cout << "FAIL " << name;
      for (const auto& f : c.failures) std::cout << "\n  " << f;
      std::cout << "\n";
    }
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
