#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "detbench/geometry.hpp"
#include "detbench/tensor.hpp"

namespace detbench {

enum class Activation { silu, linear };

struct ConvSpec {
  int in_channels = 0, out_channels = 0, kernel = 1, stride = 1;
  int pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
  Activation activation = Activation::silu;
  std::vector<float> weights;  // [out][in][ky][kx]
  std::vector<float> bias;     // [out]

  /// Xavier-uniform weights, zero bias, drawn from a generator seeded with
  /// `seed` so fixtures are reproducible.
  static ConvSpec seeded(int in_ch, int out_ch, int kernel, int stride, int pad,
                         std::uint64_t seed, Activation act = Activation::silu);
  /// Same but with explicit asymmetric padding (k=2 blocks need 0/1 splits).
  static ConvSpec seeded_asym(int in_ch, int out_ch, int kernel, int stride, int pad_top,
                              int pad_left, int pad_bottom, int pad_right, std::uint64_t seed,
                              Activation act = Activation::silu);
};

Tensor4 conv2d(const Tensor4& x, const ConvSpec& spec);
Tensor4 maxpool2d_same(const Tensor4& x, int kernel);  // stride 1, pad k/2
Tensor4 upsample_nearest2x(const Tensor4& x);
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);

/// Parallel max-pools with kernels 5, 3, 1 concatenated channel-wise (3C out).
Tensor4 sppf_forward(const Tensor4& x);

/// Split channels in half, run one half through n pairs of k=2 convolutions,
/// concatenate with the untouched half, project 1x1 to out_channels.
class C3k2Block {
public:
  C3k2Block(int in_channels, int out_channels, int n_bottlenecks, std::uint64_t seed);
  Tensor4 forward(const Tensor4& x) const;
  int out_channels() const { return proj_.out_channels; }

  std::vector<ConvSpec> bottlenecks_;  // 2*n convs, each half->half
  ConvSpec proj_;

private:
  int in_channels_;
};

/// Two 1x1 paths concatenated, weighted by a one-channel logistic spatial map,
/// projected back to the input width. Shape-preserving.
class C2psaBlock {
public:
  C2psaBlock(int channels, std::uint64_t seed);
  Tensor4 forward(const Tensor4& x) const;
  /// The [0,1] map alone, for range checks and ablations.
  Tensor4 attention_map(const Tensor4& x) const;

  ConvSpec path1_, path2_;
  ConvSpec attention_;  // C -> 1, linear; logistic applied in forward
  ConvSpec proj_;
};

struct FeaturePyramid {
  Tensor4 p3, p4, p5;  // strides 8, 16, 32
};

/// Top-down aggregation: upsample the coarser level, concatenate with the
/// finer one, refine with C3k2. P5 passes through unchanged.
class NeckBlock {
public:
  NeckBlock(int c3, int c4, int c5, std::uint64_t seed);
  FeaturePyramid forward(const FeaturePyramid& p) const;

  C3k2Block refine_p4_;  // (c5 + c4) -> c4
  C3k2Block refine_p3_;  // (c4 + c3) -> c3
};

/// Anchor-free decode: per cell, 4 non-negative distances from the cell center
/// scaled by the level stride, plus per-class logistic scores; per-class
/// greedy NMS on candidates above the confidence threshold.
class DetectHead {
public:
  DetectHead(int c3, int c4, int c5, int num_classes, std::uint64_t seed);
  std::vector<BoundingBox> forward(const FeaturePyramid& p, double conf_threshold,
                                   double nms_iou) const;
  int num_classes() const { return num_classes_; }

  std::vector<ConvSpec> level_convs_;  // one per level, 1x1 linear, 4+classes out
  std::vector<int> strides_{8, 16, 32};

private:
  int num_classes_;
};

/// Greedy per-class NMS: keep in descending confidence, suppress boxes of the
/// same class overlapping a kept box with IoU strictly above the threshold.
std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, double iou_threshold);

/// Backbone + SPPF + C2PSA + neck + head, forward-only with seeded weights.
class ToyDetector {
public:
  explicit ToyDetector(int num_classes = 5, std::uint64_t seed = 0);

  FeaturePyramid pyramid(const Tensor4& image) const;  // image: Nx3xHxW
  std::vector<BoundingBox> detect(const Tensor4& image, double conf_threshold = 0.25,
                                  double nms_iou = 0.45) const;

  struct NamedTensorRef {
    std::string name;
    std::vector<float>* values;
  };
  std::vector<NamedTensorRef> named_tensors();  // weights+biases, fixed order

  ConvSpec stem1_, stem2_;  // stride-2 halvings
  C3k2Block stage_;
  ConvSpec down3_, down4_, down5_;
  ConvSpec sppf_proj_;
  C2psaBlock psa_;
  NeckBlock neck_;
  DetectHead head_;
};

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

/// Flat binary weight container: "DBWT" magic, u32 version, then per-tensor
/// records (u32 name length, name, u32 rank, u32 dims, f32 data), all
/// little-endian.
void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_weights(const std::filesystem::path& path);

}  // namespace detbench
