#pragma once

#include <string>

#include "detbench/dataset.hpp"
#include "detbench/metrics.hpp"

namespace detbench {

enum class CurveKind { pr, f1, precision, recall };

/// Standalone SVG: unit axes, one polyline per class plus the all-class
/// aggregate, legend, and an argmax annotation like "all classes 0.71 at
/// 0.610". TooFewSamples below 2 samples.
std::string render_curve_svg(const SweepCurves& curves, const ClassMap& classes, CurveKind kind);

/// Row-normalized heatmap with a background row/column.
std::string render_confusion_svg(const ConfusionMatrix& cm, const ClassMap& classes);

}  // namespace detbench
