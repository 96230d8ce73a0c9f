#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detbench/dataset.hpp"
#include "detbench/metrics.hpp"

namespace detbench {

struct PerClassMetrics {
  int class_id = 0;
  std::string name;
  std::int64_t ground_truth = 0;
  std::optional<double> ap50;    // absent when the class has no ground truth
  std::optional<double> ap75;
  std::optional<double> ap5095;  // mean over the IoU grid
};

struct EvaluationOptions {
  std::vector<double> iou_grid;  // empty -> {0.50, 0.55, ..., 0.95}
  int sweep_points = 1000;
  double confusion_conf_threshold = 0.25;
  double confusion_iou_threshold = 0.45;
  std::uint64_t seed = 0;
  int threads = 1;  // per-image matching fan-out
  std::optional<std::vector<double>> latencies_ms;
};

struct EvaluationReport {
  std::string dataset_id;
  std::uint64_t seed = 0;
  std::vector<double> iou_grid;
  ClassMap classes;
  std::vector<PerClassMetrics> per_class;
  std::optional<double> map50;
  std::optional<double> map75;
  std::optional<double> map5095;
  SweepCurves curves;  // at IoU 0.5
  ConfusionMatrix confusion;
  std::optional<TimingStats> timing;
};

std::vector<double> default_iou_grid();  // {0.50 .. 0.95} step 0.05

EvaluationReport build_report(const Dataset& dataset, const PredictionSet& predictions,
                              const EvaluationOptions& options);

/// Deterministic serializations: sorted keys, shortest-round-trip doubles.
std::string report_to_json(const EvaluationReport& report);

/// All-class sweep, "threshold,precision,recall,f1" lines, 4 decimals.
std::string curves_to_csv(const SweepCurves& curves);

/// Count matrix with a background row/column plus the normalized rows.
std::string confusion_to_csv(const ConfusionMatrix& cm, const ClassMap& classes);

struct ComparisonRow {
  std::string model;
  std::optional<double> map50, map75, map5095;
  std::optional<double> fps;  // absent renders as "n/a"
};

std::string comparison_to_json(const std::vector<ComparisonRow>& rows);
std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);

}  // namespace detbench
