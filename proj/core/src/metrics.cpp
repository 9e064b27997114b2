#include "salengine/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "salengine/error.hpp"

namespace salengine {

namespace {

Shape plane_dims(const Shape& d) {
  auto it = d.begin();
  while (d.end() - it > 2 && *it == 1) ++it;
  return Shape(it, d.end());
}

void check_same(const char* op, const Tensor& a, const Tensor& b) {
  if (plane_dims(a.dims()) != plane_dims(b.dims())) {
    throw DimensionError(std::string(op) + ": " + to_string(a.dims()) + " vs " +
                         to_string(b.dims()));
  }
}

double sum_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s;
}

double mean_of(std::span<const float> v) { return sum_of(v) / static_cast<double>(v.size()); }

// Population standard deviation about `mean`.
double std_of(std::span<const float> v, double mean) {
  double ss = 0.0;
  for (float x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double normalized_sum(const char* op, const Tensor& t) {
  const double s = sum_of(t.data());
  if (!(s > 0.0)) throw DegenerateMapError(std::string(op) + ": map sums to zero");
  return s;
}

void check_fixations(const char* op, const Tensor& p, const FixationMap& f) {
  check_same(op, p, f.points);
  if (f.count < 1) throw DegenerateMapError(std::string(op) + ": no fixations");
}

}  // namespace

FixationMap FixationMap::from_tensor(const Tensor& t) {
  FixationMap f{Tensor(t.dims()), 0};
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (t[k] != 0.0f) {
      f.points[k] = 1.0f;
      ++f.count;
    }
  }
  return f;
}

double cc(const Tensor& p, const Tensor& q) {
  check_same("cc", p, q);
  if (p.empty()) return 0.0;
  const double mp = mean_of(p.data());
  const double mq = mean_of(q.data());
  double spq = 0.0, spp = 0.0, sqq = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double a = p[k] - mp;
    const double b = q[k] - mq;
    spq += a * b;
    spp += a * a;
    sqq += b * b;
  }
  if (spp == 0.0 || sqq == 0.0) return 0.0;
  return spq / std::sqrt(spp * sqq);
}

double kldiv(const Tensor& p, const Tensor& q) {
  check_same("kldiv", p, q);
  const double sp = normalized_sum("kldiv", p);
  const double sq = normalized_sum("kldiv", q);
  double d = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double qn = q[k] / sq;
    if (qn <= 0.0) continue;
    d += qn * std::log(qn / (p[k] / sp + kKlEpsilon));
  }
  return d;
}

double sim(const Tensor& p, const Tensor& q) {
  check_same("sim", p, q);
  const double sp = normalized_sum("sim", p);
  const double sq = normalized_sum("sim", q);
  double s = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    s += std::min(p[k] / sp, q[k] / sq);
  }
  return s;
}

double nss(const Tensor& p, const FixationMap& f) {
  check_fixations("nss", p, f);
  const double m = mean_of(p.data());
  const double sd = std_of(p.data(), m);
  if (sd == 0.0) return 0.0;
  double s = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (f.points[k] != 0.0f) s += (p[k] - m) / sd;
  }
  return s / static_cast<double>(f.count);
}

double auc_judd(const Tensor& p, const FixationMap& f) {
  check_fixations("auc_judd", p, f);
  const std::int64_t n = p.numel();
  const std::int64_t n_fix = f.count;
  const std::int64_t n_other = n - n_fix;
  if (n_other < 1) throw DegenerateMapError("auc_judd: every pixel is fixated");

  std::vector<float> fix, other;
  fix.reserve(static_cast<std::size_t>(n_fix));
  other.reserve(static_cast<std::size_t>(n_other));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    (f.points[k] != 0.0f ? fix : other).push_back(p[k]);
  }
  std::sort(fix.begin(), fix.end(), std::greater<>());
  std::sort(other.begin(), other.end(), std::greater<>());

  // Sweep the distinct fixation values from high to low; the counts of
  // values >= threshold only grow.
  double area = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  std::size_t tp = 0, fp = 0;
  while (tp < fix.size()) {
    const float theta = fix[tp];
    while (tp < fix.size() && fix[tp] >= theta) ++tp;
    while (fp < other.size() && other[fp] >= theta) ++fp;
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_fix);
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_other);
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  area += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
  return area;
}

double loss(const Tensor& p, const Tensor& q) { return kldiv(p, q) - cc(p, q); }

FrameScores score_frame(const Tensor& prediction, const Tensor* saliency,
                        const FixationMap* fixations) {
  FrameScores s;
  if (saliency != nullptr) {
    s.cc = cc(prediction, *saliency);
    s.sim = sim(prediction, *saliency);
    s.kldiv = kldiv(prediction, *saliency);
  }
  if (fixations != nullptr) {
    s.nss = nss(prediction, *fixations);
    s.auc_j = auc_judd(prediction, *fixations);
  }
  return s;
}

std::array<std::optional<double>, 5> metric_values(const FrameScores& s) {
  return {s.cc, s.nss, s.auc_j, s.sim, s.kldiv};
}

namespace {

FrameScores mean_of_scores(std::span<const FrameScores> rows) {
  std::array<double, 5> sum{};
  std::array<int, 5> count{};
  for (const auto& r : rows) {
    const auto v = metric_values(r);
    for (std::size_t m = 0; m < 5; ++m) {
      if (v[m]) {
        sum[m] += *v[m];
        ++count[m];
      }
    }
  }
  auto avg = [&](std::size_t m) -> std::optional<double> {
    if (count[m] == 0) return std::nullopt;
    return sum[m] / count[m];
  };
  FrameScores out;
  out.frame = "mean";
  out.cc = avg(0);
  out.nss = avg(1);
  out.auc_j = avg(2);
  out.sim = avg(3);
  out.kldiv = avg(4);
  return out;
}

}  // namespace

MetricReport aggregate(std::vector<FrameScores> frames) {
  MetricReport r;
  r.mean = mean_of_scores(frames);
  r.frames = std::move(frames);
  return r;
}

MetricReport average_splits(std::span<const MetricReport> splits) {
  MetricReport r;
  std::vector<FrameScores> means;
  for (const auto& s : splits) {
    r.frames.insert(r.frames.end(), s.frames.begin(), s.frames.end());
    means.push_back(s.mean);
  }
  r.mean = mean_of_scores(means);
  return r;
}

}  // namespace salengine
