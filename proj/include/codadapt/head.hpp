#pragma once

// Dense detection head. `upernet` runs a pyramid pooling module on the
// stride-32 level before the top-down FPN; `fpn_plain` uses a lateral
// projection there instead. Both map a FeaturePyramid to a stride-4 logit map.

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "codadapt/adapter.hpp"
#include "codadapt/config.hpp"

namespace codadapt {

class PyramidPoolingImpl : public torch::nn::Module {
 public:
  PyramidPoolingImpl(std::int64_t in_channels, std::int64_t out_channels,
                     std::vector<std::int64_t> scales);

  /// Pool, project, upsample each scale; concatenate with the input; fuse with a 3x3 conv.
  torch::Tensor forward(const torch::Tensor& x);

  /// Adaptive average pool to scale x scale and bilinear upsample back (no projection).
  static torch::Tensor pooled_branch(const torch::Tensor& x, std::int64_t scale);

  void reset_weights(at::Generator& gen);

  torch::nn::ModuleList branches{nullptr};
  torch::nn::Sequential bottleneck{nullptr};

 private:
  std::vector<std::int64_t> scales_;
};
TORCH_MODULE(PyramidPooling);

class DetectionHeadImpl : public torch::nn::Module {
 public:
  DetectionHeadImpl(std::int64_t in_channels, const HeadConfig& cfg);

  /// Coarsest-level context: PPM for upernet, lateral 1x1 conv for fpn_plain.
  torch::Tensor top(const torch::Tensor& p32);

  /// Top-down fusion of all levels into a (B, fpn_channels, H/4, W/4) map.
  torch::Tensor fpn_fuse(const FeaturePyramid& pyramid);

  /// 1-channel logits at the fused resolution.
  torch::Tensor logits(const torch::Tensor& fused);

  torch::Tensor forward(const FeaturePyramid& pyramid) { return logits(fpn_fuse(pyramid)); }

  /// logits -> bilinear resize to `size` -> sigmoid, in double precision.
  /// Throws InvalidArgument for nonpositive sizes.
  torch::Tensor predict(const torch::Tensor& fused, std::pair<std::int64_t, std::int64_t> size);

  void reset_weights(std::uint64_t seed);
  const HeadConfig& config() const { return cfg_; }

  PyramidPooling ppm{nullptr};
  torch::nn::ModuleList lateral{nullptr};  ///< 1x1 projections for p4, p8, p16 (+ p32 for fpn_plain)
  torch::nn::ModuleList smooth{nullptr};   ///< 3x3 convs for p4, p8, p16
  torch::nn::Sequential fuse{nullptr};     ///< concat of 4 levels -> fpn_channels
  torch::nn::Conv2d classifier{nullptr};

 private:
  HeadConfig cfg_;
};
TORCH_MODULE(DetectionHead);

/// Bilinear resize of a (B, 1, h, w) logit map followed by a sigmoid whose
/// result is kept strictly inside (0, 1). Output is float64.
torch::Tensor logits_to_probabilities(const torch::Tensor& logits,
                                      std::pair<std::int64_t, std::int64_t> size);

}  // namespace codadapt
