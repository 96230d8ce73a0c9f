#include "detbench/blocks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "detbench/rng.hpp"

namespace detbench {

namespace {

float silu(float v) { return v / (1.0f + std::exp(-v)); }
float logistic(float v) { return 1.0f / (1.0f + std::exp(-v)); }

void fill_xavier(std::vector<float>& w, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w) v = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

ConvSpec ConvSpec::seeded(int in_ch, int out_ch, int kernel, int stride, int pad,
                          std::uint64_t seed, Activation act) {
  return seeded_asym(in_ch, out_ch, kernel, stride, pad, pad, pad, pad, seed, act);
}

ConvSpec ConvSpec::seeded_asym(int in_ch, int out_ch, int kernel, int stride, int pad_top,
                               int pad_left, int pad_bottom, int pad_right, std::uint64_t seed,
                               Activation act) {
  if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad_top < 0 || pad_left < 0 ||
      pad_bottom < 0 || pad_right < 0) {
    raise(Errc::bad_config, "invalid convolution geometry");
  }
  ConvSpec s;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.pad_top = pad_top;
  s.pad_left = pad_left;
  s.pad_bottom = pad_bottom;
  s.pad_right = pad_right;
  s.activation = act;
  s.weights.resize(static_cast<std::size_t>(out_ch) * static_cast<std::size_t>(in_ch) *
                   static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel));
  s.bias.assign(static_cast<std::size_t>(out_ch), 0.0f);
  Rng rng(seed);
  fill_xavier(s.weights, in_ch * kernel * kernel, out_ch * kernel * kernel, rng);
  return s;
}

Tensor4 conv2d(const Tensor4& x, const ConvSpec& spec) {
  if (x.c != spec.in_channels) {
    raise(Errc::channel_mismatch, "conv expects " + std::to_string(spec.in_channels) +
                                      " channels, got " + std::to_string(x.c));
  }
  const std::size_t want = static_cast<std::size_t>(spec.out_channels) *
                           static_cast<std::size_t>(spec.in_channels) *
                           static_cast<std::size_t>(spec.kernel) *
                           static_cast<std::size_t>(spec.kernel);
  if (spec.weights.size() != want ||
      spec.bias.size() != static_cast<std::size_t>(spec.out_channels)) {
    raise(Errc::shape_mismatch, "conv weight buffer does not match its geometry");
  }
  const int k = spec.kernel;
  const int oh = (x.h + spec.pad_top + spec.pad_bottom - k) / spec.stride + 1;
  const int ow = (x.w + spec.pad_left + spec.pad_right - k) / spec.stride + 1;
  if (oh < 1 || ow < 1) raise(Errc::too_small, "input too small for kernel");

  Tensor4 y(x.n, spec.out_channels, oh, ow);
  for (int in = 0; in < x.n; ++in) {
    for (int oc = 0; oc < spec.out_channels; ++oc) {
      const float* w_oc = spec.weights.data() +
                          static_cast<std::size_t>(oc) * static_cast<std::size_t>(x.c) *
                              static_cast<std::size_t>(k) * static_cast<std::size_t>(k);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float acc = spec.bias[static_cast<std::size_t>(oc)];
          const int y0 = oy * spec.stride - spec.pad_top;
          const int x0 = ox * spec.stride - spec.pad_left;
          for (int ic = 0; ic < x.c; ++ic) {
            const float* w_ic =
                w_oc + static_cast<std::size_t>(ic) * static_cast<std::size_t>(k * k);
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y0 + ky;
              if (iy < 0 || iy >= x.h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x0 + kx;
                if (ix < 0 || ix >= x.w) continue;
                acc += x.at(in, ic, iy, ix) * w_ic[ky * k + kx];
              }
            }
          }
          y.at(in, oc, oy, ox) = spec.activation == Activation::silu ? silu(acc) : acc;
        }
      }
    }
  }
  return y;
}

Tensor4 maxpool2d_same(const Tensor4& x, int kernel) {
  if (kernel < 1) raise(Errc::bad_config, "pool kernel must be >= 1");
  const int pad = kernel / 2;
  Tensor4 y(x.n, x.c, x.h, x.w);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      for (int oy = 0; oy < x.h; ++oy) {
        for (int ox = 0; ox < x.w; ++ox) {
          float best = -std::numeric_limits<float>::infinity();
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy - pad + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox - pad + kx;
              if (ix < 0 || ix >= x.w) continue;
              best = std::max(best, x.at(in, ic, iy, ix));
            }
          }
          y.at(in, ic, oy, ox) = best;
        }
      }
    }
  }
  return y;
}

Tensor4 upsample_nearest2x(const Tensor4& x) {
  Tensor4 y(x.n, x.c, x.h * 2, x.w * 2);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      for (int oy = 0; oy < y.h; ++oy) {
        for (int ox = 0; ox < y.w; ++ox) {
          y.at(in, ic, oy, ox) = x.at(in, ic, oy / 2, ox / 2);
        }
      }
    }
  }
  return y;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    raise(Errc::shape_mismatch, "concat requires matching batch and spatial dims");
  }
  Tensor4 y(a.n, a.c + b.c, a.h, a.w);
  for (int in = 0; in < a.n; ++in) {
    for (int ic = 0; ic < a.c; ++ic) {
      std::copy_n(&a.data[a.index(in, ic, 0, 0)], static_cast<std::size_t>(a.h) * a.w,
                  &y.data[y.index(in, ic, 0, 0)]);
    }
    for (int ic = 0; ic < b.c; ++ic) {
      std::copy_n(&b.data[b.index(in, ic, 0, 0)], static_cast<std::size_t>(b.h) * b.w,
                  &y.data[y.index(in, a.c + ic, 0, 0)]);
    }
  }
  return y;
}

Tensor4 sppf_forward(const Tensor4& x) {
  if (x.h < 5 || x.w < 5) raise(Errc::too_small, "SPPF needs spatial dims >= 5");
  return concat_channels(concat_channels(maxpool2d_same(x, 5), maxpool2d_same(x, 3)),
                         maxpool2d_same(x, 1));
}

namespace {

Tensor4 slice_channels(const Tensor4& x, int from, int count) {
  Tensor4 y(x.n, count, x.h, x.w);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < count; ++ic) {
      std::copy_n(&x.data[x.index(in, from + ic, 0, 0)], static_cast<std::size_t>(x.h) * x.w,
                  &y.data[y.index(in, ic, 0, 0)]);
    }
  }
  return y;
}

}  // namespace

C3k2Block::C3k2Block(int in_channels, int out_channels, int n_bottlenecks, std::uint64_t seed)
    : in_channels_(in_channels) {
  if (in_channels % 2 != 0) raise(Errc::odd_channels, "C3k2 needs an even channel count");
  if (n_bottlenecks < 1) raise(Errc::bad_config, "C3k2 needs at least one bottleneck");
  const int half = in_channels / 2;
  for (int i = 0; i < 2 * n_bottlenecks; ++i) {
    // k=2 keeps spatial dims via 0 top/left, 1 bottom/right padding
    bottlenecks_.push_back(
        ConvSpec::seeded_asym(half, half, 2, 1, 0, 0, 1, 1, mix_seed(seed, 0x100u + i)));
  }
  proj_ = ConvSpec::seeded(in_channels, out_channels, 1, 1, 0, mix_seed(seed, 0x200u));
}

Tensor4 C3k2Block::forward(const Tensor4& x) const {
  if (x.c != in_channels_) {
    raise(Errc::channel_mismatch, "C3k2 expects " + std::to_string(in_channels_) + " channels");
  }
  const int half = in_channels_ / 2;
  const Tensor4 keep = slice_channels(x, 0, half);
  Tensor4 branch = slice_channels(x, half, half);
  for (const auto& conv : bottlenecks_) branch = conv2d(branch, conv);
  return conv2d(concat_channels(keep, branch), proj_);
}

C2psaBlock::C2psaBlock(int channels, std::uint64_t seed) {
  if (channels % 2 != 0) raise(Errc::odd_channels, "C2PSA needs an even channel count");
  const int half = channels / 2;
  path1_ = ConvSpec::seeded(channels, half, 1, 1, 0, mix_seed(seed, 1));
  path2_ = ConvSpec::seeded(channels, half, 1, 1, 0, mix_seed(seed, 2));
  attention_ = ConvSpec::seeded(channels, 1, 1, 1, 0, mix_seed(seed, 3), Activation::linear);
  proj_ = ConvSpec::seeded(channels, channels, 1, 1, 0, mix_seed(seed, 4));
}

Tensor4 C2psaBlock::attention_map(const Tensor4& x) const {
  const Tensor4 z = concat_channels(conv2d(x, path1_), conv2d(x, path2_));
  Tensor4 a = conv2d(z, attention_);
  for (auto& v : a.data) v = logistic(v);
  return a;
}

Tensor4 C2psaBlock::forward(const Tensor4& x) const {
  const Tensor4 z = concat_channels(conv2d(x, path1_), conv2d(x, path2_));
  Tensor4 a = conv2d(z, attention_);
  for (auto& v : a.data) v = logistic(v);
  Tensor4 m(z.n, z.c, z.h, z.w);
  for (int in = 0; in < z.n; ++in) {
    for (int ic = 0; ic < z.c; ++ic) {
      for (int iy = 0; iy < z.h; ++iy) {
        for (int ix = 0; ix < z.w; ++ix) {
          m.at(in, ic, iy, ix) = z.at(in, ic, iy, ix) * a.at(in, 0, iy, ix);
        }
      }
    }
  }
  return conv2d(m, proj_);
}

NeckBlock::NeckBlock(int c3, int c4, int c5, std::uint64_t seed)
    : refine_p4_(c5 + c4, c4, 1, mix_seed(seed, 54)),
      refine_p3_(c4 + c3, c3, 1, mix_seed(seed, 43)) {}

FeaturePyramid NeckBlock::forward(const FeaturePyramid& p) const {
  const Tensor4 up5 = upsample_nearest2x(p.p5);
  if (up5.h != p.p4.h || up5.w != p.p4.w) {
    raise(Errc::shape_mismatch, "upsampled P5 does not align with P4");
  }
  FeaturePyramid out;
  out.p4 = refine_p4_.forward(concat_channels(up5, p.p4));
  const Tensor4 up4 = upsample_nearest2x(out.p4);
  if (up4.h != p.p3.h || up4.w != p.p3.w) {
    raise(Errc::shape_mismatch, "upsampled P4 does not align with P3");
  }
  out.p3 = refine_p3_.forward(concat_channels(up4, p.p3));
  out.p5 = p.p5;
  return out;
}

DetectHead::DetectHead(int c3, int c4, int c5, int num_classes, std::uint64_t seed)
    : num_classes_(num_classes) {
  if (num_classes < 1) raise(Errc::bad_config, "need at least one class");
  const int outs = 4 + num_classes;
  level_convs_.push_back(
      ConvSpec::seeded(c3, outs, 1, 1, 0, mix_seed(seed, 3), Activation::linear));
  level_convs_.push_back(
      ConvSpec::seeded(c4, outs, 1, 1, 0, mix_seed(seed, 4), Activation::linear));
  level_convs_.push_back(
      ConvSpec::seeded(c5, outs, 1, 1, 0, mix_seed(seed, 5), Activation::linear));
}

std::vector<BoundingBox> DetectHead::forward(const FeaturePyramid& p, double conf_threshold,
                                             double nms_iou) const {
  if (conf_threshold <= 0.0 || conf_threshold >= 1.0 || nms_iou <= 0.0 || nms_iou >= 1.0) {
    raise(Errc::bad_config, "detect thresholds must lie in (0,1)");
  }
  const Tensor4* levels[3] = {&p.p3, &p.p4, &p.p5};
  std::vector<BoundingBox> candidates;
  for (int li = 0; li < 3; ++li) {
    const Tensor4& f = *levels[li];
    if (f.n != 1) raise(Errc::shape_mismatch, "detect head decodes a single image");
    const Tensor4 y = conv2d(f, level_convs_[static_cast<std::size_t>(li)]);
    const double s = strides_[static_cast<std::size_t>(li)];
    for (int cy = 0; cy < y.h; ++cy) {
      for (int cx = 0; cx < y.w; ++cx) {
        const double center_x = (cx + 0.5) * s;
        const double center_y = (cy + 0.5) * s;
        const double l = std::max(0.0f, y.at(0, 0, cy, cx)) * s;
        const double t = std::max(0.0f, y.at(0, 1, cy, cx)) * s;
        const double r = std::max(0.0f, y.at(0, 2, cy, cx)) * s;
        const double b = std::max(0.0f, y.at(0, 3, cy, cx)) * s;
        for (int c = 0; c < num_classes_; ++c) {
          const double score = logistic(y.at(0, 4 + c, cy, cx));
          if (score > conf_threshold) {
            BoundingBox box;
            box.x_min = center_x - l;
            box.y_min = center_y - t;
            box.x_max = center_x + r;
            box.y_max = center_y + b;
            box.class_id = c;
            box.confidence = score;
            if (box.valid()) candidates.push_back(box);
          }
        }
      }
    }
  }
  return nms(std::move(candidates), nms_iou);
}

std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, double iou_threshold) {
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return *boxes[static_cast<std::size_t>(a)].confidence >
           *boxes[static_cast<std::size_t>(b)].confidence;
  });
  std::vector<char> dead(boxes.size(), 0);
  std::vector<BoundingBox> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto a = static_cast<std::size_t>(order[i]);
    if (dead[a]) continue;
    kept.push_back(boxes[a]);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const auto b = static_cast<std::size_t>(order[j]);
      if (dead[b] || boxes[b].class_id != boxes[a].class_id) continue;
      if (iou(boxes[a], boxes[b]) > iou_threshold) dead[b] = 1;
    }
  }
  return kept;
}

ToyDetector::ToyDetector(int num_classes, std::uint64_t seed)
    : stem1_(ConvSpec::seeded(3, 16, 3, 2, 1, mix_seed(seed, 10))),
      stem2_(ConvSpec::seeded(16, 32, 3, 2, 1, mix_seed(seed, 11))),
      stage_(32, 32, 1, mix_seed(seed, 12)),
      down3_(ConvSpec::seeded(32, 64, 3, 2, 1, mix_seed(seed, 13))),
      down4_(ConvSpec::seeded(64, 96, 3, 2, 1, mix_seed(seed, 14))),
      down5_(ConvSpec::seeded(96, 128, 3, 2, 1, mix_seed(seed, 15))),
      sppf_proj_(ConvSpec::seeded(384, 128, 1, 1, 0, mix_seed(seed, 16))),
      psa_(128, mix_seed(seed, 17)),
      neck_(64, 96, 128, mix_seed(seed, 18)),
      head_(64, 96, 128, num_classes, mix_seed(seed, 19)) {}

FeaturePyramid ToyDetector::pyramid(const Tensor4& image) const {
  const Tensor4 s1 = conv2d(image, stem1_);
  const Tensor4 s2 = conv2d(s1, stem2_);
  const Tensor4 s3 = stage_.forward(s2);
  FeaturePyramid base;
  base.p3 = conv2d(s3, down3_);
  base.p4 = conv2d(base.p3, down4_);
  const Tensor4 raw5 = conv2d(base.p4, down5_);
  const Tensor4 pooled = conv2d(sppf_forward(raw5), sppf_proj_);
  base.p5 = psa_.forward(pooled);
  return neck_.forward(base);
}

std::vector<BoundingBox> ToyDetector::detect(const Tensor4& image, double conf_threshold,
                                             double nms_iou) const {
  return head_.forward(pyramid(image), conf_threshold, nms_iou);
}

std::vector<ToyDetector::NamedTensorRef> ToyDetector::named_tensors() {
  std::vector<NamedTensorRef> out;
  const auto add_conv = [&](const std::string& name, ConvSpec& c) {
    out.push_back({name + ".weight", &c.weights});
    out.push_back({name + ".bias", &c.bias});
  };
  const auto add_c3k2 = [&](const std::string& name, C3k2Block& b) {
    for (std::size_t i = 0; i < b.bottlenecks_.size(); ++i) {
      add_conv(name + ".bottleneck" + std::to_string(i), b.bottlenecks_[i]);
    }
    add_conv(name + ".proj", b.proj_);
  };
  add_conv("stem1", stem1_);
  add_conv("stem2", stem2_);
  add_c3k2("stage", stage_);
  add_conv("down3", down3_);
  add_conv("down4", down4_);
  add_conv("down5", down5_);
  add_conv("sppf.proj", sppf_proj_);
  add_conv("psa.path1", psa_.path1_);
  add_conv("psa.path2", psa_.path2_);
  add_conv("psa.attention", psa_.attention_);
  add_conv("psa.proj", psa_.proj_);
  add_c3k2("neck.p4", neck_.refine_p4_);
  add_c3k2("neck.p3", neck_.refine_p3_);
  for (std::size_t i = 0; i < head_.level_convs_.size(); ++i) {
    add_conv("head.level" + std::to_string(i), head_.level_convs_[i]);
  }
  return out;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t& off) {
  if (off + 4 > buf.size()) raise(Errc::decode_error, "truncated weight file");
  const auto b = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])); };
  const std::uint32_t v = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
  off += 4;
  return v;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::string buf;
  buf += "DBWT";
  put_u32(buf, 1);
  for (const auto& t : tensors) {
    std::size_t count = 1;
    for (const auto d : t.dims) count *= d;
    if (count != t.values.size()) {
      raise(Errc::shape_mismatch, "tensor '" + t.name + "' dims do not match value count");
    }
    put_u32(buf, static_cast<std::uint32_t>(t.name.size()));
    buf += t.name;
    put_u32(buf, static_cast<std::uint32_t>(t.dims.size()));
    for (const auto d : t.dims) put_u32(buf, d);
    for (const float v : t.values) put_u32(buf, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<NamedTensor> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::missing_file, "cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 || buf.compare(0, 4, "DBWT") != 0) {
    raise(Errc::decode_error, "not a weight file: " + path.string());
  }
  std::size_t off = 4;
  const std::uint32_t version = get_u32(buf, off);
  if (version != 1) raise(Errc::decode_error, "unsupported weight file version");

  std::vector<NamedTensor> tensors;
  while (off < buf.size()) {
    NamedTensor t;
    const std::uint32_t name_len = get_u32(buf, off);
    if (name_len > (1u << 16) || off + name_len > buf.size()) {
      raise(Errc::decode_error, "bad tensor name length");
    }
    t.name.assign(buf, off, name_len);
    off += name_len;
    const std::uint32_t rank = get_u32(buf, off);
    if (rank > 8) raise(Errc::decode_error, "bad tensor rank");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.dims.push_back(get_u32(buf, off));
      count *= t.dims.back();
    }
    if (count > (1u << 28)) raise(Errc::decode_error, "tensor too large");
    t.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      t.values.push_back(std::bit_cast<float>(get_u32(buf, off)));
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace detbench
