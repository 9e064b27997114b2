#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salengine/tensor.hpp"

namespace salengine {

/// Binary ground-truth fixations over one frame. Any nonzero input value
/// counts as a fixation.
struct FixationMap {
  Tensor points;  // values in {0, 1}
  std::int64_t count = 0;

  static FixationMap from_tensor(const Tensor& t);
};

// Maps may carry leading singleton axes ([H, W], [1, H, W], [1, 1, H, W]);
// two maps are compatible when their dims agree after dropping them.
// All reductions run in double.

/// Pearson correlation of the flattened maps; 0 if either is constant.
double cc(const Tensor& p, const Tensor& q);

/// Both maps normalized to unit sum, then sum of Q * log(Q / (P + eps)) over
/// bins with Q > 0. Throws DegenerateMapError if either map sums to <= 0.
double kldiv(const Tensor& p, const Tensor& q);
inline constexpr double kKlEpsilon = 1e-7;

/// Histogram intersection of the unit-sum normalized maps.
double sim(const Tensor& p, const Tensor& q);

/// Mean z-score (population std) of P at fixations; 0 if P is constant.
/// Throws DegenerateMapError without fixations.
double nss(const Tensor& p, const FixationMap& f);

/// ROC area with thresholds at the saliency values of fixated pixels,
/// TPR/FPR counted with >=, trapezoids closed at (0,0) and (1,1). Throws
/// DegenerateMapError without fixations or without non-fixated pixels.
double auc_judd(const Tensor& p, const FixationMap& f);

/// kldiv(p, q) - cc(p, q).
double loss(const Tensor& p, const Tensor& q);

/// Scores of one frame. Distribution metrics need a ground-truth map,
/// fixation metrics need a fixation map; absent inputs leave them empty.
struct FrameScores {
  std::string frame;
  std::optional<double> cc, nss, auc_j, sim, kldiv;
};

FrameScores score_frame(const Tensor& prediction, const Tensor* saliency,
                        const FixationMap* fixations);

/// Column order of every report: CC, NSS, AUC-J, SIM, KLDIV.
inline constexpr const char* kMetricNames[5] = {"CC", "NSS", "AUC-J", "SIM", "KLDIV"};

struct MetricReport {
  std::vector<FrameScores> frames;
  FrameScores mean;  // unweighted over the frames that have each metric
};

MetricReport aggregate(std::vector<FrameScores> frames);

/// Mean of several split reports (cross-validation). Per-frame lists are
/// concatenated; the mean is taken over split means, not frames.
MetricReport average_splits(std::span<const MetricReport> splits);

/// Metric values of a FrameScores in kMetricNames order.
std::array<std::optional<double>, 5> metric_values(const FrameScores& s);

}  // namespace salengine
