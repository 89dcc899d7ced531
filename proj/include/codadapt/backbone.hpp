#pragma once

// Plain pre-norm vision transformer used as the (frozen) foundation model.
// Images are NCHW float tensors already normalized with the configured
// per-channel mean/std.

#include <cstdint>
#include <filesystem>

#include <torch/torch.h>

#include "codadapt/archive.hpp"
#include "codadapt/config.hpp"

namespace codadapt {

/// (B, 1 + grid_h*grid_w, D) token matrix. Row 0 is CLS, the remaining rows
/// are patch tokens in row-major grid order.
struct TokenSequence {
  torch::Tensor tokens;
  std::int64_t grid_h = 0;
  std::int64_t grid_w = 0;

  std::int64_t count() const { return 1 + grid_h * grid_w; }
  torch::Tensor cls() const { return tokens.narrow(1, 0, 1); }
  torch::Tensor spatial() const { return tokens.narrow(1, 1, grid_h * grid_w); }
  /// Spatial tokens as a (B, D, grid_h, grid_w) map.
  torch::Tensor spatial_map() const;
};

class SelfAttentionImpl : public torch::nn::Module {
 public:
  SelfAttentionImpl(std::int64_t dim, std::int64_t heads);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear qkv{nullptr};
  torch::nn::Linear proj{nullptr};

 private:
  std::int64_t heads_;
};
TORCH_MODULE(SelfAttention);

class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t mlp_ratio);
  torch::Tensor forward(const torch::Tensor& x);
  void reset_weights(at::Generator& gen);

  torch::nn::LayerNorm norm1{nullptr};
  SelfAttention attn{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};
};
TORCH_MODULE(EncoderBlock);

class VisionTransformerImpl : public torch::nn::Module {
 public:
  explicit VisionTransformerImpl(ViTConfig cfg);

  const ViTConfig& config() const { return cfg_; }

  /// Patchify, prepend CLS and add positional embeddings. Throws InvalidInput
  /// unless the image is (B, 3, image_size, image_size).
  TokenSequence patch_embed(const torch::Tensor& image);

  /// Applies layers [g*L/N, (g+1)*L/N). Throws InvalidArgument for g outside [0, N).
  TokenSequence encode_group(const TokenSequence& tokens, std::int64_t group);

  /// All L layers in one pass (no group bookkeeping).
  TokenSequence encode_all(const TokenSequence& tokens);

  /// patch_embed followed by encode_all.
  TokenSequence forward(const torch::Tensor& image);

  /// Frozen parameters never require grad and carry no gradient.
  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

  /// Re-draws every parameter from `seed` (stand-in for pre-trained weights).
  void reset_weights(std::uint64_t seed);

  void save(const std::filesystem::path& path) const;

  /// Overwrites matching parameters from an archive; keys may carry a
  /// "backbone." prefix. Shape mismatch throws LoadError naming the key.
  LoadReport load_pretrained(const std::filesystem::path& path);

  TensorMap parameter_map() const;
  std::int64_t parameter_count() const;

  torch::nn::Conv2d patch_proj{nullptr};
  torch::Tensor cls_token;
  torch::Tensor pos_embed;
  torch::nn::ModuleList blocks{nullptr};

 private:
  torch::Tensor positional_for(std::int64_t grid_h, std::int64_t grid_w) const;

  ViTConfig cfg_;
  bool frozen_ = false;
};
TORCH_MODULE(VisionTransformer);

}  // namespace codadapt
