#include "detbench/augment.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "detbench/errors.hpp"
#include "detbench/rng.hpp"

namespace detbench {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
double deg2rad(double d) { return d * kPi / 180.0; }
}  // namespace

std::vector<std::string> validate_config(const AugmentationConfig& cfg) {
  const auto prob = [](double p, const char* name) {
    if (p < 0.0 || p > 1.0) raise(Errc::bad_config, std::string(name) + " must lie in [0,1]");
  };
  prob(cfg.flipud, "flipud");
  prob(cfg.fliplr, "fliplr");
  prob(cfg.mosaic, "mosaic");
  const auto mag = [](double v, const char* name) {
    if (v < 0.0) raise(Errc::bad_config, std::string(name) + " must be >= 0");
  };
  mag(cfg.hsv_h, "hsv_h");
  mag(cfg.hsv_s, "hsv_s");
  mag(cfg.hsv_v, "hsv_v");
  mag(cfg.translate, "translate");
  mag(cfg.scale, "scale");
  mag(cfg.perspective, "perspective");
  mag(cfg.min_box_area_fraction, "min_box_area_fraction");
  if (cfg.degrees < 0.0 || cfg.degrees > 180.0) {
    raise(Errc::bad_config, "degrees must lie in [0,180]");
  }
  if (cfg.shear < 0.0 || cfg.shear > 180.0) raise(Errc::bad_config, "shear must lie in [0,180]");
  if (cfg.scale >= 1.0) raise(Errc::bad_config, "scale gain must be < 1 (draws from [1-s,1+s])");

  std::vector<std::string> warnings;
  if (cfg.shear > 45.0) {
    warnings.push_back("shear range " + std::to_string(cfg.shear) +
                       " deg exceeds 45; draws near 90 deg degenerate");
  }
  return warnings;
}

AugmentationConfig augmentation_config_from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::bad_config, std::string("augmentation config: ") + e.what());
  }
  AugmentationConfig cfg;
  const auto get = [&](const char* key, double& field) {
    if (j.contains(key)) {
      if (!j.at(key).is_number()) {
        raise(Errc::bad_config, std::string("augmentation field '") + key + "' must be a number");
      }
      field = j.at(key).get<double>();
    }
  };
  get("hsv_h", cfg.hsv_h);
  get("hsv_s", cfg.hsv_s);
  get("hsv_v", cfg.hsv_v);
  get("degrees", cfg.degrees);
  get("translate", cfg.translate);
  get("scale", cfg.scale);
  get("shear", cfg.shear);
  get("perspective", cfg.perspective);
  get("flipud", cfg.flipud);
  get("fliplr", cfg.fliplr);
  get("mosaic", cfg.mosaic);
  get("min_box_area_fraction", cfg.min_box_area_fraction);
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  validate_config(cfg);
  return cfg;
}

Mat3 mat3_identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
      r[i][j] = s;
    }
  }
  return r;
}

Mat3 mat3_inverse(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-12) raise(Errc::degenerate_transform, "singular warp matrix");
  Mat3 r;
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

Mat3 affine_matrix(double theta_deg, double translate_x, double translate_y, double scale,
                   double shear_x_deg, double shear_y_deg, int width, int height) {
  if (scale <= 0.0) raise(Errc::degenerate_transform, "scale must be positive");
  const double cx = static_cast<double>(width) / 2.0;
  const double cy = static_cast<double>(height) / 2.0;
  const double c = std::cos(deg2rad(theta_deg));
  const double s = std::sin(deg2rad(theta_deg));

  const Mat3 to_origin{{{1, 0, -cx}, {0, 1, -cy}, {0, 0, 1}}};
  const Mat3 shear{{{1, std::tan(deg2rad(shear_x_deg)), 0},
                    {std::tan(deg2rad(shear_y_deg)), 1, 0},
                    {0, 0, 1}}};
  const Mat3 rot_scale{{{scale * c, -scale * s, 0}, {scale * s, scale * c, 0}, {0, 0, 1}}};
  const Mat3 back{{{1, 0, cx}, {0, 1, cy}, {0, 0, 1}}};
  const Mat3 translate{{{1, 0, translate_x * static_cast<double>(width)},
                        {0, 1, translate_y * static_cast<double>(height)},
                        {0, 0, 1}}};
  return matmul(translate, matmul(back, matmul(rot_scale, matmul(shear, to_origin))));
}

Mat3 perspective_matrix(double px, double py) {
  return {{{1, 0, 0}, {0, 1, 0}, {px, py, 1}}};
}

namespace {

// Homogeneous application with perspective divide.
std::pair<double, double> apply_mat(const Mat3& m, double x, double y) {
  const double w = m[2][0] * x + m[2][1] * y + m[2][2];
  if (std::abs(w) < 1e-12) raise(Errc::degenerate_transform, "point maps to infinity");
  return {(m[0][0] * x + m[0][1] * y + m[0][2]) / w,
          (m[1][0] * x + m[1][1] * y + m[1][2]) / w};
}

std::uint8_t round_channel(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace

Image warp_image(const Image& in, const Mat3& forward, std::uint8_t border) {
  const Mat3 inv = mat3_inverse(forward);
  Image out(in.width, in.height, border);
  const double w = in.width, h = in.height;
  for (int oy = 0; oy < out.height; ++oy) {
    for (int ox = 0; ox < out.width; ++ox) {
      const auto [sx, sy] = apply_mat(inv, ox + 0.5, oy + 0.5);
      if (sx < 0.0 || sx > w || sy < 0.0 || sy > h) continue;  // border fill
      // bilinear over pixel centers
      const double u = sx - 0.5, v = sy - 0.5;
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(v));
      const double fx = u - x0, fy = v - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const auto fetch = [&](int yy, int xx) -> double {
          if (xx < 0 || xx >= in.width || yy < 0 || yy >= in.height) return border;
          return in.at(yy, xx, ch);
        };
        const double top = fetch(y0, x0) * (1.0 - fx) + fetch(y0, x0 + 1) * fx;
        const double bot = fetch(y0 + 1, x0) * (1.0 - fx) + fetch(y0 + 1, x0 + 1) * fx;
        out.at(oy, ox, ch) = round_channel(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return out;
}

std::optional<BoundingBox> transform_box(const BoundingBox& box, const Mat3& forward, int width,
                                         int height, double min_area_fraction) {
  const double xs[2] = {box.x_min, box.x_max};
  const double ys[2] = {box.y_min, box.y_max};
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const double x : xs) {
    for (const double y : ys) {
      const auto [tx, ty] = apply_mat(forward, x, y);
      min_x = std::min(min_x, tx);
      max_x = std::max(max_x, tx);
      min_y = std::min(min_y, ty);
      max_y = std::max(max_y, ty);
    }
  }
  BoundingBox out = box;
  out.x_min = std::clamp(min_x, 0.0, static_cast<double>(width));
  out.x_max = std::clamp(max_x, 0.0, static_cast<double>(width));
  out.y_min = std::clamp(min_y, 0.0, static_cast<double>(height));
  out.y_max = std::clamp(max_y, 0.0, static_cast<double>(height));
  if (!out.valid()) return std::nullopt;
  if (out.area() < min_area_fraction * width * height) return std::nullopt;
  return out;
}

ImageSample warp_sample(const ImageSample& s, const Mat3& forward, double min_area_fraction) {
  ImageSample out;
  out.image_id = s.image_id;
  out.pixels = warp_image(s.pixels, forward);
  for (const auto& b : s.boxes) {
    if (auto t = transform_box(b, forward, s.pixels.width, s.pixels.height, min_area_fraction)) {
      out.boxes.push_back(*t);
    }
  }
  return out;
}

namespace {

// h in [0,1) as wheel fraction, s/v in [0,1]
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double cmax = std::max({r, g, b});
  const double cmin = std::min({r, g, b});
  const double delta = cmax - cmin;
  v = cmax;
  s = cmax <= 0.0 ? 0.0 : delta / cmax;
  if (delta <= 0.0) {
    h = 0.0;
  } else if (cmax == r) {
    h = (g - b) / delta;
    if (h < 0.0) h += 6.0;
  } else if (cmax == g) {
    h = (b - r) / delta + 2.0;
  } else {
    h = (r - g) / delta + 4.0;
  }
  h /= 6.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double h6 = h * 6.0;
  const int i = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

ImageSample adjust_hsv(const ImageSample& s, double gain_h, double gain_s, double gain_v) {
  ImageSample out = s;
  for (int y = 0; y < out.pixels.height; ++y) {
    for (int x = 0; x < out.pixels.width; ++x) {
      double r = out.pixels.at(y, x, 0) / 255.0;
      double g = out.pixels.at(y, x, 1) / 255.0;
      double b = out.pixels.at(y, x, 2) / 255.0;
      double h, sat, val;
      rgb_to_hsv(r, g, b, h, sat, val);
      h += gain_h;
      h -= std::floor(h);  // wrap to [0,1)
      sat = std::clamp(sat * (1.0 + gain_s), 0.0, 1.0);
      val = std::clamp(val * (1.0 + gain_v), 0.0, 1.0);
      hsv_to_rgb(h, sat, val, r, g, b);
      out.pixels.at(y, x, 0) = round_channel(r * 255.0);
      out.pixels.at(y, x, 1) = round_channel(g * 255.0);
      out.pixels.at(y, x, 2) = round_channel(b * 255.0);
    }
  }
  return out;
}

ImageSample affine(const ImageSample& s, double theta_deg, double translate_x, double translate_y,
                   double scale, double shear_x_deg, double shear_y_deg,
                   double min_area_fraction) {
  const Mat3 m = affine_matrix(theta_deg, translate_x, translate_y, scale, shear_x_deg,
                               shear_y_deg, s.pixels.width, s.pixels.height);
  return warp_sample(s, m, min_area_fraction);
}

ImageSample perspective(const ImageSample& s, double px, double py, double min_area_fraction) {
  return warp_sample(s, perspective_matrix(px, py), min_area_fraction);
}

ImageSample flip(const ImageSample& s, FlipAxis axis) {
  ImageSample out;
  out.image_id = s.image_id;
  out.pixels = Image(s.pixels.width, s.pixels.height);
  const int w = s.pixels.width, h = s.pixels.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sy = axis == FlipAxis::vertical ? h - 1 - y : y;
      const int sx = axis == FlipAxis::horizontal ? w - 1 - x : x;
      for (int ch = 0; ch < 3; ++ch) out.pixels.at(y, x, ch) = s.pixels.at(sy, sx, ch);
    }
  }
  for (BoundingBox b : s.boxes) {
    if (axis == FlipAxis::horizontal) {
      const double x0 = b.x_min, x1 = b.x_max;
      b.x_min = w - x1;
      b.x_max = w - x0;
    } else {
      const double y0 = b.y_min, y1 = b.y_max;
      b.y_min = h - y1;
      b.y_max = h - y0;
    }
    out.boxes.push_back(b);
  }
  return out;
}

Image resize_bilinear(const Image& in, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) raise(Errc::shape_mismatch, "resize target must be >= 1");
  Image out(out_w, out_h);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const double u = (ox + 0.5) * static_cast<double>(in.width) / out_w - 0.5;
      const double v = (oy + 0.5) * static_cast<double>(in.height) / out_h - 0.5;
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(v));
      const double fx = u - x0, fy = v - y0;
      const auto cl = [](int a, int lo, int hi) { return std::clamp(a, lo, hi); };
      for (int ch = 0; ch < 3; ++ch) {
        const auto fetch = [&](int yy, int xx) -> double {
          return in.at(cl(yy, 0, in.height - 1), cl(xx, 0, in.width - 1), ch);
        };
        const double top = fetch(y0, x0) * (1.0 - fx) + fetch(y0, x0 + 1) * fx;
        const double bot = fetch(y0 + 1, x0) * (1.0 - fx) + fetch(y0 + 1, x0 + 1) * fx;
        out.at(oy, ox, ch) = round_channel(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return out;
}

ImageSample mosaic(const std::vector<ImageSample>& samples, int out_size, double center_x,
                   double center_y, double min_area_fraction) {
  if (samples.size() != 4) {
    raise(Errc::wrong_arity, "mosaic takes exactly 4 samples, got " +
                                 std::to_string(samples.size()));
  }
  if (out_size < 2) raise(Errc::bad_config, "mosaic canvas too small");
  const double q = static_cast<double>(out_size);
  if (center_x < q * 0.25 || center_x > q * 0.75 || center_y < q * 0.25 || center_y > q * 0.75) {
    raise(Errc::bad_config, "mosaic center outside the central half of the canvas");
  }

  ImageSample out;
  out.image_id = samples[0].image_id;
  out.pixels = Image(out_size, out_size, kBorderFill);

  const int cx = static_cast<int>(std::lround(center_x));
  const int cy = static_cast<int>(std::lround(center_y));
  // quadrants: {x0, y0, x1, y1}
  const int quads[4][4] = {{0, 0, cx, cy},
                           {cx, 0, out_size, cy},
                           {0, cy, cx, out_size},
                           {cx, cy, out_size, out_size}};

  for (int qi = 0; qi < 4; ++qi) {
    const auto& s = samples[static_cast<std::size_t>(qi)];
    const int qx0 = quads[qi][0], qy0 = quads[qi][1];
    const int qw = quads[qi][2] - qx0, qh = quads[qi][3] - qy0;
    if (qw < 1 || qh < 1) continue;  // degenerate cell: contributes nothing

    const int iw = s.pixels.width, ih = s.pixels.height;
    const double fit = std::min(static_cast<double>(qw) / iw, static_cast<double>(qh) / ih);
    const int sw = std::max(1, static_cast<int>(std::lround(iw * fit)));
    const int sh = std::max(1, static_cast<int>(std::lround(ih * fit)));
    const int dx = qx0 + (qw - sw) / 2;  // letterbox offsets
    const int dy = qy0 + (qh - sh) / 2;

    const Image scaled = resize_bilinear(s.pixels, sw, sh);
    for (int y = 0; y < sh; ++y) {
      for (int x = 0; x < sw; ++x) {
        for (int ch = 0; ch < 3; ++ch) out.pixels.at(dy + y, dx + x, ch) = scaled.at(y, x, ch);
      }
    }

    for (const auto& b : s.boxes) {
      BoundingBox t = b;
      // realized per-axis scale keeps full-image boxes exactly on the
      // placed rectangle
      t.x_min = dx + b.x_min * sw / iw;
      t.x_max = dx + b.x_max * sw / iw;
      t.y_min = dy + b.y_min * sh / ih;
      t.y_max = dy + b.y_max * sh / ih;
      t.x_min = std::clamp(t.x_min, static_cast<double>(qx0), static_cast<double>(qx0 + qw));
      t.x_max = std::clamp(t.x_max, static_cast<double>(qx0), static_cast<double>(qx0 + qw));
      t.y_min = std::clamp(t.y_min, static_cast<double>(qy0), static_cast<double>(qy0 + qh));
      t.y_max = std::clamp(t.y_max, static_cast<double>(qy0), static_cast<double>(qy0 + qh));
      if (!t.valid()) continue;
      if (t.area() < min_area_fraction * q * q) continue;
      out.boxes.push_back(t);
    }
  }
  return out;
}

PoolSampler::PoolSampler(std::vector<ImageSample> pool) : pool_(std::move(pool)) {
  if (pool_.empty()) raise(Errc::empty_list, "companion pool is empty");
}

ImageSample PoolSampler::sample(Rng& rng) {
  return pool_[static_cast<std::size_t>(rng.below(pool_.size()))];
}

AugmentResult apply_pipeline(const ImageSample& s, const AugmentationConfig& cfg,
                             CompanionSampler& pool) {
  validate_config(cfg);
  Rng rng(mix_seed(cfg.seed, fnv1a64(s.image_id)));
  AugmentResult res;
  res.sample = s;
  auto& p = res.params;

  p.mosaic_applied = rng.bernoulli(cfg.mosaic);
  if (p.mosaic_applied) {
    const int out_size = 2 * std::max(s.pixels.width, s.pixels.height);
    p.mosaic_center_x = rng.uniform(out_size * 0.25, out_size * 0.75);
    p.mosaic_center_y = rng.uniform(out_size * 0.25, out_size * 0.75);
    std::vector<ImageSample> four{res.sample};
    for (int i = 0; i < 3; ++i) {
      four.push_back(pool.sample(rng));
      p.companion_ids.push_back(four.back().image_id);
    }
    res.sample = mosaic(four, out_size, p.mosaic_center_x, p.mosaic_center_y,
                        cfg.min_box_area_fraction);
    res.sample.image_id = s.image_id;
  }

  p.theta_deg = rng.uniform(-cfg.degrees, cfg.degrees);
  p.translate_x = rng.uniform(-cfg.translate, cfg.translate);
  p.translate_y = rng.uniform(-cfg.translate, cfg.translate);
  p.scale = rng.uniform(1.0 - cfg.scale, 1.0 + cfg.scale);
  p.shear_x_deg = rng.uniform(-cfg.shear, cfg.shear);
  p.shear_y_deg = rng.uniform(-cfg.shear, cfg.shear);
  p.perspective_x = rng.uniform(-cfg.perspective, cfg.perspective);
  p.perspective_y = rng.uniform(-cfg.perspective, cfg.perspective);
  const Mat3 warp = matmul(
      perspective_matrix(p.perspective_x, p.perspective_y),
      affine_matrix(p.theta_deg, p.translate_x, p.translate_y, p.scale, p.shear_x_deg,
                    p.shear_y_deg, res.sample.pixels.width, res.sample.pixels.height));
  res.sample = warp_sample(res.sample, warp, cfg.min_box_area_fraction);

  p.gain_h = rng.uniform(-cfg.hsv_h, cfg.hsv_h);
  p.gain_s = rng.uniform(-cfg.hsv_s, cfg.hsv_s);
  p.gain_v = rng.uniform(-cfg.hsv_v, cfg.hsv_v);
  res.sample = adjust_hsv(res.sample, p.gain_h, p.gain_s, p.gain_v);

  p.flipped_ud = rng.bernoulli(cfg.flipud);
  if (p.flipped_ud) res.sample = flip(res.sample, FlipAxis::vertical);
  p.flipped_lr = rng.bernoulli(cfg.fliplr);
  if (p.flipped_lr) res.sample = flip(res.sample, FlipAxis::horizontal);
  return res;
}

}  // namespace detbench
