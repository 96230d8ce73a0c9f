#pragma once

#include <optional>

namespace detbench {

/// Axis-aligned box in absolute pixel coordinates, corner form.
/// Corner form is canonical everywhere inside the toolkit; the normalized
/// center/size form exists only at the label-file boundary.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  int class_id = 0;
  std::optional<double> confidence;  // absent on ground truth

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const {
    return x_min <= x_max && y_min <= y_max &&
           (!confidence || (*confidence >= 0.0 && *confidence <= 1.0));
  }
};

/// Center/size box with all geometric fields as fractions of the image.
struct NormalizedBox {
  double x_center = 0.0;
  double y_center = 0.0;
  double width = 0.0;
  double height = 0.0;
  int class_id = 0;
  std::optional<double> confidence;
};

/// Intersection over union. Degenerate boxes (zero area) are legal values
/// and score 0 against everything; a zero-area union also yields 0.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Corner box from a normalized box, clamped to [0,img_w] x [0,img_h].
/// Rejects non-positive image dimensions.
BoundingBox to_absolute(const NormalizedBox& n, double img_w, double img_h);

/// Inverse of to_absolute up to floating rounding. Rejects boxes that fall
/// outside the image or non-positive dimensions.
NormalizedBox to_normalized(const BoundingBox& b, double img_w, double img_h);

}  // namespace detbench
