#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "detbench/geometry.hpp"
#include "detbench/image.hpp"

namespace detbench {

class Rng;

struct ImageSample {
  std::string image_id;
  Image pixels;
  std::vector<BoundingBox> boxes;
};

struct AugmentationConfig {
  double hsv_h = 0.015;  // additive hue shift, fraction of the wheel
  double hsv_s = 0.7;    // multiplicative saturation gain range
  double hsv_v = 0.4;    // multiplicative value gain range
  double degrees = 180.0;
  double translate = 0.1;  // fraction of each dimension
  double scale = 0.5;      // scale drawn from [1-scale, 1+scale]
  double shear = 180.0;    // degrees; |shear| > 45 draws a warning
  double perspective = 0.001;
  double flipud = 0.0;
  double fliplr = 0.5;
  double mosaic = 1.0;
  double min_box_area_fraction = 1e-4;
  std::uint64_t seed = 0;
};

/// Raises BadConfig on hard violations, returns soft warnings (e.g. shear
/// ranges that produce near-degenerate warps).
std::vector<std::string> validate_config(const AugmentationConfig& cfg);

/// Field names match the JSON config fragment exactly (hsv_h ... mosaic).
AugmentationConfig augmentation_config_from_json_text(std::string_view text);

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mat3_identity();
Mat3 matmul(const Mat3& a, const Mat3& b);
Mat3 mat3_inverse(const Mat3& m);  // DegenerateTransform when singular

/// Rotation/scale/shear about the image center, then translation by fractions
/// of the image size, as one matrix.
Mat3 affine_matrix(double theta_deg, double translate_x, double translate_y, double scale,
                   double shear_x_deg, double shear_y_deg, int width, int height);
/// Projective warp with bottom row (px, py, 1).
Mat3 perspective_matrix(double px, double py);

constexpr std::uint8_t kBorderFill = 114;

/// Inverse-maps each output pixel center and samples bilinearly; source points
/// outside the input are the border fill.
Image warp_image(const Image& in, const Mat3& forward, std::uint8_t border = kBorderFill);

/// 4-corner transform, axis-aligned hull, clamp to [0,w]x[0,h]; empty when the
/// clamped area is below min_area_fraction of the image.
std::optional<BoundingBox> transform_box(const BoundingBox& box, const Mat3& forward, int width,
                                         int height, double min_area_fraction);

ImageSample warp_sample(const ImageSample& s, const Mat3& forward, double min_area_fraction);

ImageSample adjust_hsv(const ImageSample& s, double gain_h, double gain_s, double gain_v);

ImageSample affine(const ImageSample& s, double theta_deg, double translate_x, double translate_y,
                   double scale, double shear_x_deg, double shear_y_deg,
                   double min_area_fraction = 1e-4);

ImageSample perspective(const ImageSample& s, double px, double py,
                        double min_area_fraction = 1e-4);

enum class FlipAxis { horizontal, vertical };
ImageSample flip(const ImageSample& s, FlipAxis axis);

/// Aspect-preserving bilinear resize with edge clamping (letterbox helper).
Image resize_bilinear(const Image& in, int out_w, int out_h);

/// Four samples onto one out_size x out_size canvas split at `center`
/// (which must lie in the central half). Quadrant order: TL, TR, BL, BR.
ImageSample mosaic(const std::vector<ImageSample>& samples, int out_size, double center_x,
                   double center_y, double min_area_fraction = 1e-4);

class CompanionSampler {
public:
  virtual ~CompanionSampler() = default;
  virtual ImageSample sample(Rng& rng) = 0;
};

/// Uniform draws from a fixed pool.
class PoolSampler : public CompanionSampler {
public:
  explicit PoolSampler(std::vector<ImageSample> pool);
  ImageSample sample(Rng& rng) override;

private:
  std::vector<ImageSample> pool_;
};

/// Everything the pipeline drew, for preview logs and reproducibility checks.
struct AugmentParams {
  bool mosaic_applied = false;
  double mosaic_center_x = 0.0, mosaic_center_y = 0.0;
  std::vector<std::string> companion_ids;
  double theta_deg = 0.0;
  double translate_x = 0.0, translate_y = 0.0;
  double scale = 1.0;
  double shear_x_deg = 0.0, shear_y_deg = 0.0;
  double perspective_x = 0.0, perspective_y = 0.0;
  double gain_h = 0.0, gain_s = 0.0, gain_v = 0.0;
  bool flipped_ud = false, flipped_lr = false;
};

struct AugmentResult {
  ImageSample sample;
  AugmentParams params;
};

/// mosaic -> affine+perspective (one combined warp) -> HSV -> flips, all
/// drawn from one generator seeded by (cfg.seed, image_id).
AugmentResult apply_pipeline(const ImageSample& s, const AugmentationConfig& cfg,
                             CompanionSampler& pool);

}  // namespace detbench
