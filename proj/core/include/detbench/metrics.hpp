#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "detbench/geometry.hpp"

namespace detbench {

/// Outcome of one prediction after matching, with one flag per IoU threshold.
struct PredictionOutcome {
  double confidence = 0.0;
  int class_id = -1;
  std::vector<char> tp;         // parallel to MatchResult::thresholds
  std::vector<int> matched_gt;  // global ground-truth index, -1 when unmatched
};

/// Matching state, mergeable across images. Outcomes keep input order so
/// confidence ties stay deterministic downstream.
struct MatchResult {
  std::vector<double> thresholds;  // ascending, each in (0,1]
  std::vector<PredictionOutcome> outcomes;
  std::vector<std::int64_t> gt_per_class;  // grows as class ids appear
  std::int64_t gt_total = 0;

  int threshold_index(double tau) const;  // BadConfig if absent
  std::int64_t gt_count(int class_id) const {
    return class_id >= 0 && class_id < static_cast<int>(gt_per_class.size())
               ? gt_per_class[static_cast<std::size_t>(class_id)]
               : 0;
  }
  void merge(const MatchResult& other);  // appends, offsetting gt indices
};

/// Greedy confidence-descending one-to-one matching, class-gated. Per
/// threshold, a prediction is TP iff its best-IoU unmatched same-class ground
/// truth clears the threshold. Confidence ties break by input order, IoU ties
/// by lowest ground-truth index.
MatchResult match_predictions(const std::vector<BoundingBox>& gts,
                              const std::vector<BoundingBox>& preds,
                              const std::vector<double>& iou_thresholds);

double precision(std::int64_t tp, std::int64_t fp);  // 1.0 when tp+fp == 0
double recall(std::int64_t tp, std::int64_t fn, bool* no_support = nullptr);
double f1(double p, double r);

/// 101-point interpolated AP for one class at one threshold. Empty when the
/// class has no ground truth (callers drop it from means).
std::optional<double> average_precision(const MatchResult& match, int class_id,
                                        double iou_threshold);

double mean_ap(const std::vector<double>& per_class_aps);  // EmptyList when empty

struct CurveSample {
  double confidence_threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct SweepCurves {
  std::vector<double> thresholds;                   // ascending, deduplicated
  std::vector<std::vector<CurveSample>> per_class;  // [class][threshold index]
  std::vector<CurveSample> all_classes;             // pooled TP/FP/FN counts
  double best_f1 = 0.0;            // argmax over all_classes, ties -> lowest
  double best_f1_threshold = 0.0;  //   threshold
};

/// P/R/F1 versus confidence threshold at a fixed IoU threshold. Thresholds are
/// n_points uniform samples of [0,1] plus, optionally, every distinct
/// confidence so breakpoints land exactly.
SweepCurves sweep_curves(const MatchResult& match, double iou_threshold, int n_points = 1000,
                         bool include_breakpoints = true);

/// (C+1)x(C+1) counts; row = true class, column = predicted class, index C is
/// the background bucket.
struct ConfusionMatrix {
  int class_count = 0;
  double conf_threshold = 0.25;
  double iou_threshold = 0.45;
  std::vector<std::int64_t> counts;  // row-major, side class_count + 1

  std::int64_t at(int true_class, int predicted_class) const;
  std::int64_t& at(int true_class, int predicted_class);
  /// Row-normalized copy; rows without support stay all-zero.
  std::vector<double> normalized() const;
};

ConfusionMatrix make_confusion_matrix(int class_count, double conf_threshold = 0.25,
                                      double iou_threshold = 0.45);

/// One image's contribution: drop low-confidence predictions, match greedily
/// ignoring class, then bin matches and leftovers.
void accumulate_confusion(ConfusionMatrix& cm, const std::vector<BoundingBox>& gts,
                          const std::vector<BoundingBox>& preds);

ConfusionMatrix confusion_matrix(const std::vector<BoundingBox>& gts,
                                 const std::vector<BoundingBox>& preds, int class_count,
                                 double conf_threshold = 0.25, double iou_threshold = 0.45);

struct TimingStats {
  std::vector<double> latencies_ms;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double fps = 0.0;
};

TimingStats timing_stats(std::vector<double> latencies_ms);

}  // namespace detbench
