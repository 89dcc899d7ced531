#pragma once

// Trainable branch running in parallel to the frozen backbone: a convolutional
// spatial prior, N injector/extractor interaction rounds and the assembly of
// a stride 4/8/16/32 feature pyramid.

#include <cstdint>

#include <torch/torch.h>

#include "codadapt/backbone.hpp"
#include "codadapt/config.hpp"

namespace codadapt {

struct SpatialPriorFeatures {
  torch::Tensor f8;   ///< (B, C, H/8, W/8)
  torch::Tensor f16;  ///< (B, C, H/16, W/16)
  torch::Tensor f32;  ///< (B, C, H/32, W/32)

  /// The three maps flattened row-major and concatenated: (B, n8 + n16 + n32, C).
  torch::Tensor tokens() const;
};

struct FeaturePyramid {
  torch::Tensor p4;
  torch::Tensor p8;
  torch::Tensor p16;
  torch::Tensor p32;
};

class SpatialPriorImpl : public torch::nn::Module {
 public:
  explicit SpatialPriorImpl(std::int64_t channels);
  /// Throws InvalidInput unless H and W are divisible by 32.
  SpatialPriorFeatures forward(const torch::Tensor& image);
  void reset_weights(at::Generator& gen);

 private:
  torch::nn::Sequential stem{nullptr}, down8{nullptr}, down16{nullptr}, down32{nullptr};
  torch::nn::Conv2d out8{nullptr}, out16{nullptr}, out32{nullptr};
};
TORCH_MODULE(SpatialPrior);

/// Pre-normalized multi-head attention from a query sequence onto a context
/// sequence of possibly different width.
class CrossAttentionImpl : public torch::nn::Module {
 public:
  CrossAttentionImpl(std::int64_t query_dim, std::int64_t context_dim, std::int64_t inner_dim,
                     std::int64_t heads);
  torch::Tensor forward(const torch::Tensor& query, const torch::Tensor& context);
  void reset_weights(at::Generator& gen);

  std::int64_t query_dim() const { return query_dim_; }
  std::int64_t context_dim() const { return context_dim_; }

  torch::nn::LayerNorm query_norm{nullptr}, context_norm{nullptr};
  torch::nn::Linear to_q{nullptr}, to_k{nullptr}, to_v{nullptr}, to_out{nullptr};

 private:
  std::int64_t query_dim_, context_dim_, heads_;
};
TORCH_MODULE(CrossAttention);

/// vit' = vit + gamma * CrossAttn(vit spatial tokens -> adapter tokens); CLS untouched.
class InjectorImpl : public torch::nn::Module {
 public:
  InjectorImpl(std::int64_t vit_dim, std::int64_t adapter_dim, std::int64_t heads);
  TokenSequence forward(const TokenSequence& vit, const torch::Tensor& adapter_tokens);
  void reset_weights(at::Generator& gen);

  CrossAttention attn{nullptr};
  torch::Tensor gamma;  ///< scalar gate, zero at initialization
};
TORCH_MODULE(Injector);

/// c' = c + CrossAttn(c -> vit spatial tokens); c'' = c' + FFN(LN(c')).
class ExtractorImpl : public torch::nn::Module {
 public:
  ExtractorImpl(std::int64_t adapter_dim, std::int64_t vit_dim, std::int64_t heads,
                double ffn_ratio);
  torch::Tensor forward(const torch::Tensor& adapter_tokens, const TokenSequence& vit);
  void reset_weights(at::Generator& gen);

  CrossAttention attn{nullptr};
  torch::nn::LayerNorm ffn_norm{nullptr};
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(Extractor);

class InteractionBlockImpl : public torch::nn::Module {
 public:
  InteractionBlockImpl(std::int64_t vit_dim, std::int64_t adapter_dim, std::int64_t heads,
                       double ffn_ratio);
  Injector injector{nullptr};
  Extractor extractor{nullptr};
};
TORCH_MODULE(InteractionBlock);

/// Free-function forms of the two interaction halves.
TokenSequence inject(const TokenSequence& vit_tokens, const torch::Tensor& adapter_tokens,
                     InteractionBlock& block);
torch::Tensor extract(const torch::Tensor& adapter_tokens, const TokenSequence& vit_tokens,
                      InteractionBlock& block);

struct InteractionResult {
  FeaturePyramid pyramid;
  TokenSequence vit;  ///< final backbone tokens after the last group
};

class AdapterImpl : public torch::nn::Module {
 public:
  AdapterImpl(const ViTConfig& vit, const AdapterConfig& cfg);

  /// inject -> encode_group(i) -> extract for i = 0..N-1, then pyramid assembly.
  InteractionResult run_interactions(const torch::Tensor& image, VisionTransformer& backbone);

  void reset_weights(std::uint64_t seed);
  void set_trainable(bool trainable);

  std::int64_t trainable_parameter_count() const;
  const AdapterConfig& config() const { return cfg_; }

  SpatialPrior spatial_prior{nullptr};
  torch::Tensor level_embed;  ///< (3, C), added per stride segment of the adapter tokens
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Linear vit_proj{nullptr};
  torch::nn::ConvTranspose2d upsample4{nullptr};
  torch::nn::ModuleList out_norms{nullptr};

 private:
  AdapterConfig cfg_;
  std::int64_t vit_dim_;
  std::int64_t groups_;
};
TORCH_MODULE(Adapter);

/// (trainable adapter parameters) / (backbone parameters).
double trainable_ratio(const AdapterImpl& adapter, const VisionTransformerImpl& backbone);
double trainable_ratio(std::int64_t adapter_trainable, std::int64_t backbone_total);

}  // namespace codadapt
