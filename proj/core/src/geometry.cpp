#include "detbench/geometry.hpp"

#include <algorithm>
#include <string>

#include "detbench/errors.hpp"

namespace detbench {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = std::max(0.0, ix) * std::max(0.0, iy);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

BoundingBox to_absolute(const NormalizedBox& n, double img_w, double img_h) {
  if (img_w <= 0.0 || img_h <= 0.0) {
    raise(Errc::out_of_range, "to_absolute: image dimensions must be positive, got " +
                                  std::to_string(img_w) + "x" + std::to_string(img_h));
  }
  const auto clamp = [](double v, double hi) { return std::clamp(v, 0.0, hi); };
  BoundingBox b;
  b.x_min = clamp((n.x_center - n.width / 2.0) * img_w, img_w);
  b.y_min = clamp((n.y_center - n.height / 2.0) * img_h, img_h);
  b.x_max = clamp((n.x_center + n.width / 2.0) * img_w, img_w);
  b.y_max = clamp((n.y_center + n.height / 2.0) * img_h, img_h);
  b.class_id = n.class_id;
  b.confidence = n.confidence;
  return b;
}

NormalizedBox to_normalized(const BoundingBox& b, double img_w, double img_h) {
  if (img_w <= 0.0 || img_h <= 0.0) {
    raise(Errc::out_of_range, "to_normalized: image dimensions must be positive");
  }
  if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > img_w || b.y_max > img_h || !b.valid()) {
    raise(Errc::out_of_range, "to_normalized: box outside image bounds");
  }
  NormalizedBox n;
  n.x_center = (b.x_min + b.x_max) / 2.0 / img_w;
  n.y_center = (b.y_min + b.y_max) / 2.0 / img_h;
  n.width = (b.x_max - b.x_min) / img_w;
  n.height = (b.y_max - b.y_min) / img_h;
  n.class_id = b.class_id;
  n.confidence = b.confidence;
  return n;
}

}  // namespace detbench
