#pragma once

#include <cstdint>
#include <utility>

#include <torch/torch.h>

#include "codadapt/adapter.hpp"
#include "codadapt/archive.hpp"
#include "codadapt/backbone.hpp"
#include "codadapt/config.hpp"
#include "codadapt/head.hpp"

namespace codadapt {

/// Frozen backbone + adapter + detection head. Parameter names are prefixed
/// "backbone.", "adapter." and "head.".
class CodModelImpl : public torch::nn::Module {
 public:
  explicit CodModelImpl(const ExperimentConfig& cfg);

  /// Stride-4 logits, (B, 1, H/4, W/4), for a normalized (B, 3, H, W) batch.
  torch::Tensor forward(const torch::Tensor& image);

  InteractionResult features(const torch::Tensor& image);

  /// Probabilities at `size`, float64, strictly inside (0, 1).
  torch::Tensor predict(const torch::Tensor& image, std::pair<std::int64_t, std::int64_t> size);

  void set_frozen_backbone(bool frozen);

  /// Re-draws adapter and head weights from `seed`; the backbone is untouched.
  void reset_trainable(std::uint64_t seed);

  TensorMap parameter_map() const;
  /// Adapter and head parameters only.
  TensorMap adapter_head_map() const;
  std::vector<torch::Tensor> trainable_parameters() const;
  std::int64_t trainable_parameter_count() const;

  const ExperimentConfig& config() const { return cfg_; }

  VisionTransformer backbone{nullptr};
  Adapter adapter{nullptr};
  DetectionHead head{nullptr};

 private:
  ExperimentConfig cfg_;
};
TORCH_MODULE(CodModel);

}  // namespace codadapt
