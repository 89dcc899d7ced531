#include "codadapt/adapter.hpp"

#include <cmath>
#include <sstream>

#include "codadapt/errors.hpp"
#include "nn_init.hpp"

namespace codadapt {

namespace F = torch::nn::functional;
namespace nn = torch::nn;

namespace {

nn::Sequential conv_gn_relu(std::int64_t in, std::int64_t out, std::int64_t stride) {
  return nn::Sequential(
      nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)),
      nn::GroupNorm(nn::GroupNormOptions(detail::norm_groups(out), out)), nn::ReLU());
}

torch::Tensor resize_to(const torch::Tensor& x, std::int64_t h, std::int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

torch::Tensor SpatialPriorFeatures::tokens() const {
  auto flat = [](const torch::Tensor& m) { return m.flatten(2).transpose(1, 2); };
  return torch::cat({flat(f8), flat(f16), flat(f32)}, 1);
}

// ---------------------------------------------------------------------------
// Spatial prior

SpatialPriorImpl::SpatialPriorImpl(std::int64_t channels) {
  const auto m = std::max<std::int64_t>(channels / 4, 8);
  stem = register_module("stem", nn::Sequential());
  stem->extend(*conv_gn_relu(3, m, 2));
  stem->extend(*conv_gn_relu(m, m, 1));
  stem->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  down8 = register_module("down8", conv_gn_relu(m, 2 * m, 2));
  down16 = register_module("down16", conv_gn_relu(2 * m, 4 * m, 2));
  down32 = register_module("down32", conv_gn_relu(4 * m, 4 * m, 2));
  out8 = register_module("out8", nn::Conv2d(nn::Conv2dOptions(2 * m, channels, 1)));
  out16 = register_module("out16", nn::Conv2d(nn::Conv2dOptions(4 * m, channels, 1)));
  out32 = register_module("out32", nn::Conv2d(nn::Conv2dOptions(4 * m, channels, 1)));
}

void SpatialPriorImpl::reset_weights(at::Generator& gen) { detail::reset_conv_tree(*this, gen); }

SpatialPriorFeatures SpatialPriorImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3 || image.size(2) % 32 != 0 ||
      image.size(3) % 32 != 0) {
    std::ostringstream os;
    os << "spatial_prior: expected (B, 3, H, W) with H, W divisible by 32, got " << image.sizes();
    throw InvalidInput(os.str());
  }
  auto c4 = stem->forward(image);
  auto c8 = down8->forward(c4);
  auto c16 = down16->forward(c8);
  auto c32 = down32->forward(c16);
  return {out8(c8), out16(c16), out32(c32)};
}

// ---------------------------------------------------------------------------
// Cross attention

CrossAttentionImpl::CrossAttentionImpl(std::int64_t query_dim, std::int64_t context_dim,
                                       std::int64_t inner_dim, std::int64_t heads)
    : query_dim_(query_dim), context_dim_(context_dim), heads_(heads) {
  if (inner_dim % heads != 0) throw ConfigError("cross-attention: inner_dim % heads != 0");
  query_norm = register_module("query_norm", nn::LayerNorm(nn::LayerNormOptions({query_dim}).eps(1e-6)));
  context_norm =
      register_module("context_norm", nn::LayerNorm(nn::LayerNormOptions({context_dim}).eps(1e-6)));
  to_q = register_module("to_q", nn::Linear(query_dim, inner_dim));
  to_k = register_module("to_k", nn::Linear(context_dim, inner_dim));
  to_v = register_module("to_v", nn::Linear(context_dim, inner_dim));
  to_out = register_module("to_out", nn::Linear(inner_dim, query_dim));
}

void CrossAttentionImpl::reset_weights(at::Generator& gen) {
  detail::init_layer_norm(query_norm);
  detail::init_layer_norm(context_norm);
  detail::init_linear(to_q, gen);
  detail::init_linear(to_k, gen);
  detail::init_linear(to_v, gen);
  detail::init_linear(to_out, gen);
}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& query, const torch::Tensor& context) {
  if (query.size(-1) != query_dim_ || context.size(-1) != context_dim_) {
    throw ConfigError("cross-attention: token widths (" + std::to_string(query.size(-1)) + ", " +
                      std::to_string(context.size(-1)) + ") do not match projections (" +
                      std::to_string(query_dim_) + ", " + std::to_string(context_dim_) + ")");
  }
  const auto b = query.size(0);
  const auto nq = query.size(1);
  const auto nk = context.size(1);
  auto ctx = context_norm(context);
  auto q = to_q(query_norm(query));
  auto k = to_k(ctx);
  auto v = to_v(ctx);
  const auto inner = q.size(2);
  const auto hd = inner / heads_;
  q = q.reshape({b, nq, heads_, hd}).transpose(1, 2);
  k = k.reshape({b, nk, heads_, hd}).transpose(1, 2);
  v = v.reshape({b, nk, heads_, hd}).transpose(1, 2);
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(double(hd)), -1);
  auto out = torch::matmul(attn, v).transpose(1, 2).reshape({b, nq, inner});
  return to_out(out);
}

// ---------------------------------------------------------------------------
// Injector / extractor

InjectorImpl::InjectorImpl(std::int64_t vit_dim, std::int64_t adapter_dim, std::int64_t heads) {
  attn = register_module("attn", CrossAttention(vit_dim, adapter_dim, adapter_dim, heads));
  gamma = register_parameter("gamma", torch::zeros({1}));
}

void InjectorImpl::reset_weights(at::Generator& gen) {
  attn->reset_weights(gen);
  detail::zero_init(gamma);
}

TokenSequence InjectorImpl::forward(const TokenSequence& vit, const torch::Tensor& adapter_tokens) {
  auto spatial = vit.spatial();
  auto update = attn(spatial, adapter_tokens);
  auto tokens = torch::cat({vit.cls(), spatial + gamma * update}, 1);
  return {tokens, vit.grid_h, vit.grid_w};
}

ExtractorImpl::ExtractorImpl(std::int64_t adapter_dim, std::int64_t vit_dim, std::int64_t heads,
                             double ffn_ratio) {
  const auto hidden = std::max<std::int64_t>(1, std::llround(adapter_dim * ffn_ratio));
  attn = register_module("attn", CrossAttention(adapter_dim, vit_dim, adapter_dim, heads));
  ffn_norm = register_module("ffn_norm", nn::LayerNorm(nn::LayerNormOptions({adapter_dim}).eps(1e-6)));
  fc1 = register_module("fc1", nn::Linear(adapter_dim, hidden));
  fc2 = register_module("fc2", nn::Linear(hidden, adapter_dim));
}

void ExtractorImpl::reset_weights(at::Generator& gen) {
  attn->reset_weights(gen);
  detail::init_layer_norm(ffn_norm);
  detail::init_linear(fc1, gen);
  detail::init_linear(fc2, gen);
}

torch::Tensor ExtractorImpl::forward(const torch::Tensor& adapter_tokens, const TokenSequence& vit) {
  auto c = adapter_tokens + attn(adapter_tokens, vit.spatial());
  return c + fc2(torch::gelu(fc1(ffn_norm(c))));
}

InteractionBlockImpl::InteractionBlockImpl(std::int64_t vit_dim, std::int64_t adapter_dim,
                                           std::int64_t heads, double ffn_ratio) {
  injector = register_module("injector", Injector(vit_dim, adapter_dim, heads));
  extractor = register_module("extractor", Extractor(adapter_dim, vit_dim, heads, ffn_ratio));
}

TokenSequence inject(const TokenSequence& vit_tokens, const torch::Tensor& adapter_tokens,
                     InteractionBlock& block) {
  return block->injector->forward(vit_tokens, adapter_tokens);
}

torch::Tensor extract(const torch::Tensor& adapter_tokens, const TokenSequence& vit_tokens,
                      InteractionBlock& block) {
  return block->extractor->forward(adapter_tokens, vit_tokens);
}

// ---------------------------------------------------------------------------
// Adapter

AdapterImpl::AdapterImpl(const ViTConfig& vit, const AdapterConfig& cfg)
    : cfg_(cfg), vit_dim_(vit.embed_dim), groups_(vit.interaction_groups) {
  cfg_.validate();
  const auto c = cfg_.channels;
  spatial_prior = register_module("spatial_prior", SpatialPrior(c));
  level_embed = register_parameter("level_embed", torch::zeros({3, c}));
  blocks = register_module("blocks", nn::ModuleList());
  for (std::int64_t i = 0; i < groups_; ++i) {
    blocks->push_back(InteractionBlock(vit_dim_, c, cfg_.num_heads, cfg_.ffn_ratio));
  }
  if (cfg_.fuse_vit) vit_proj = register_module("vit_proj", nn::Linear(vit_dim_, c));
  upsample4 = register_module(
      "upsample4", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c, c, 2).stride(2)));
  out_norms = register_module("out_norms", nn::ModuleList());
  for (int i = 0; i < 4; ++i) {
    out_norms->push_back(nn::GroupNorm(nn::GroupNormOptions(detail::norm_groups(c), c)));
  }
  reset_weights(0);
}

void AdapterImpl::reset_weights(std::uint64_t seed) {
  auto gen = detail::make_generator(seed);
  spatial_prior->reset_weights(gen);
  detail::normal_init(level_embed, 0.02, gen);
  for (auto& m : *blocks) {
    auto* blk = m->as<InteractionBlockImpl>();
    blk->injector->reset_weights(gen);
    blk->extractor->reset_weights(gen);
  }
  if (vit_proj) detail::init_linear(vit_proj, gen);
  detail::init_conv(upsample4->weight, upsample4->bias, gen);
  for (auto& m : *out_norms) {
    auto* gn = m->as<nn::GroupNormImpl>();
    detail::one_init(gn->weight);
    detail::zero_init(gn->bias);
  }
}

void AdapterImpl::set_trainable(bool trainable) {
  for (auto& p : parameters()) {
    p.set_requires_grad(trainable);
    if (!trainable) p.mutable_grad() = torch::Tensor();
  }
}

std::int64_t AdapterImpl::trainable_parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) {
    if (p.requires_grad()) n += p.numel();
  }
  return n;
}

InteractionResult AdapterImpl::run_interactions(const torch::Tensor& image,
                                                VisionTransformer& backbone) {
  if (backbone->config().interaction_groups != groups_ || backbone->config().embed_dim != vit_dim_) {
    throw ConfigError("adapter: built for " + std::to_string(groups_) + " groups of width " +
                      std::to_string(vit_dim_) + ", backbone has " +
                      std::to_string(backbone->config().interaction_groups) + " of width " +
                      std::to_string(backbone->config().embed_dim));
  }
  auto prior = spatial_prior->forward(image);
  const auto b = image.size(0);
  const auto c = cfg_.channels;
  const std::array<std::int64_t, 3> h{prior.f8.size(2), prior.f16.size(2), prior.f32.size(2)};
  const std::array<std::int64_t, 3> w{prior.f8.size(3), prior.f16.size(3), prior.f32.size(3)};

  std::vector<torch::Tensor> segments;
  {
    const std::array<torch::Tensor, 3> maps{prior.f8, prior.f16, prior.f32};
    for (int i = 0; i < 3; ++i) {
      segments.push_back(maps[i].flatten(2).transpose(1, 2) + level_embed[i]);
    }
  }
  auto tokens = torch::cat(segments, 1);

  auto vit = backbone->patch_embed(image);
  for (std::int64_t i = 0; i < groups_; ++i) {
    auto& blk = blocks[i]->as<InteractionBlockImpl>()->injector;
    vit = blk->forward(vit, tokens);
    vit = backbone->encode_group(vit, i);
    tokens = blocks[i]->as<InteractionBlockImpl>()->extractor->forward(tokens, vit);
  }

  std::array<torch::Tensor, 3> maps;
  std::int64_t offset = 0;
  for (int i = 0; i < 3; ++i) {
    const auto n = h[i] * w[i];
    maps[i] = tokens.narrow(1, offset, n).transpose(1, 2).reshape({b, c, h[i], w[i]});
    offset += n;
  }

  if (cfg_.fuse_vit) {
    auto v = vit_proj(vit.spatial()).transpose(1, 2).reshape({b, c, vit.grid_h, vit.grid_w});
    v = resize_to(v, h[1], w[1]);
    maps[0] = maps[0] + resize_to(v, h[0], w[0]);
    maps[1] = maps[1] + v;
    maps[2] = maps[2] + F::max_pool2d(v, F::MaxPool2dFuncOptions(2).stride(2));
  }

  FeaturePyramid pyr;
  pyr.p4 = out_norms[0]->as<nn::GroupNorm>()->forward(upsample4(maps[0]));
  pyr.p8 = out_norms[1]->as<nn::GroupNorm>()->forward(maps[0]);
  pyr.p16 = out_norms[2]->as<nn::GroupNorm>()->forward(maps[1]);
  pyr.p32 = out_norms[3]->as<nn::GroupNorm>()->forward(maps[2]);
  return {pyr, vit};
}

double trainable_ratio(std::int64_t adapter_trainable, std::int64_t backbone_total) {
  if (backbone_total <= 0) return 0.0;
  return static_cast<double>(adapter_trainable) / static_cast<double>(backbone_total);
}

double trainable_ratio(const AdapterImpl& adapter, const VisionTransformerImpl& backbone) {
  return trainable_ratio(adapter.trainable_parameter_count(), backbone.parameter_count());
}

}  // namespace codadapt
