#include "codadapt/backbone.hpp"

#include <cmath>
#include <sstream>

#include "codadapt/errors.hpp"
#include "nn_init.hpp"

namespace codadapt {

namespace F = torch::nn::functional;

torch::Tensor TokenSequence::spatial_map() const {
  const auto b = tokens.size(0);
  const auto d = tokens.size(2);
  return spatial().transpose(1, 2).reshape({b, d, grid_h, grid_w});
}

SelfAttentionImpl::SelfAttentionImpl(std::int64_t dim, std::int64_t heads) : heads_(heads) {
  qkv = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj = register_module("proj", torch::nn::Linear(dim, dim));
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0);
  const auto n = x.size(1);
  const auto d = x.size(2);
  const auto hd = d / heads_;
  auto qkv_out = qkv(x).reshape({b, n, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
  auto q = qkv_out[0];
  auto k = qkv_out[1];
  auto v = qkv_out[2];
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(double(hd)), -1);
  auto out = torch::matmul(attn, v).transpose(1, 2).reshape({b, n, d});
  return proj(out);
}

EncoderBlockImpl::EncoderBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t mlp_ratio) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)));
  attn = register_module("attn", SelfAttention(dim, heads));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)));
  fc1 = register_module("fc1", torch::nn::Linear(dim, dim * mlp_ratio));
  fc2 = register_module("fc2", torch::nn::Linear(dim * mlp_ratio, dim));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& x) {
  auto h = x + attn(norm1(x));
  return h + fc2(torch::gelu(fc1(norm2(h))));
}

void EncoderBlockImpl::reset_weights(at::Generator& gen) {
  detail::init_layer_norm(norm1);
  detail::init_layer_norm(norm2);
  detail::init_linear(attn->qkv, gen);
  detail::init_linear(attn->proj, gen);
  detail::init_linear(fc1, gen);
  detail::init_linear(fc2, gen);
}

VisionTransformerImpl::VisionTransformerImpl(ViTConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto d = cfg_.embed_dim;
  const auto p = cfg_.patch_size;
  const auto pre_grid = cfg_.pretrain_size / p;
  patch_proj = register_module(
      "patch_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, d, p).stride(p)));
  cls_token = register_parameter("cls_token", torch::zeros({1, 1, d}));
  pos_embed = register_parameter("pos_embed", torch::zeros({1, 1 + pre_grid * pre_grid, d}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (std::int64_t i = 0; i < cfg_.depth; ++i) {
    blocks->push_back(EncoderBlock(d, cfg_.num_heads, cfg_.mlp_ratio));
  }
  reset_weights(cfg_.init_seed);
}

void VisionTransformerImpl::reset_weights(std::uint64_t seed) {
  auto gen = detail::make_generator(seed);
  detail::init_conv(patch_proj->weight, patch_proj->bias, gen);
  detail::normal_init(cls_token, 0.02, gen);
  detail::normal_init(pos_embed, 0.02, gen);
  for (auto& m : *blocks) m->as<EncoderBlock>()->reset_weights(gen);
}

torch::Tensor VisionTransformerImpl::positional_for(std::int64_t grid_h, std::int64_t grid_w) const {
  const auto pre = cfg_.pretrain_size / cfg_.patch_size;
  if (grid_h == pre && grid_w == pre) return pos_embed;
  const auto d = cfg_.embed_dim;
  auto cls_pos = pos_embed.narrow(1, 0, 1);
  auto grid = pos_embed.narrow(1, 1, pre * pre).reshape({1, pre, pre, d}).permute({0, 3, 1, 2});
  grid = F::interpolate(grid, F::InterpolateFuncOptions()
                                  .size(std::vector<std::int64_t>{grid_h, grid_w})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
  grid = grid.permute({0, 2, 3, 1}).reshape({1, grid_h * grid_w, d});
  return torch::cat({cls_pos, grid}, 1);
}

TokenSequence VisionTransformerImpl::patch_embed(const torch::Tensor& image) {
  const auto s = cfg_.image_size;
  if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != s || image.size(3) != s) {
    std::ostringstream os;
    os << "patch_embed: expected input of shape (B, 3, " << s << ", " << s << "), got "
       << image.sizes();
    throw InvalidInput(os.str());
  }
  auto x = patch_proj(image);  // (B, D, g, g)
  const auto b = x.size(0);
  const auto gh = x.size(2);
  const auto gw = x.size(3);
  x = x.flatten(2).transpose(1, 2);
  x = torch::cat({cls_token.expand({b, 1, cfg_.embed_dim}), x}, 1);
  x = x + positional_for(gh, gw);
  return {x, gh, gw};
}

TokenSequence VisionTransformerImpl::encode_group(const TokenSequence& tokens, std::int64_t group) {
  if (group < 0 || group >= cfg_.interaction_groups) {
    throw InvalidArgument("encode_group: group index " + std::to_string(group) +
                          " outside [0, " + std::to_string(cfg_.interaction_groups) + ")");
  }
  const auto per = cfg_.layers_per_group();
  auto x = tokens.tokens;
  for (std::int64_t i = group * per; i < (group + 1) * per; ++i) {
    x = blocks[i]->as<EncoderBlock>()->forward(x);
  }
  return {x, tokens.grid_h, tokens.grid_w};
}

TokenSequence VisionTransformerImpl::encode_all(const TokenSequence& tokens) {
  auto x = tokens.tokens;
  for (auto& m : *blocks) x = m->as<EncoderBlock>()->forward(x);
  return {x, tokens.grid_h, tokens.grid_w};
}

TokenSequence VisionTransformerImpl::forward(const torch::Tensor& image) {
  return encode_all(patch_embed(image));
}

void VisionTransformerImpl::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : parameters()) {
    p.set_requires_grad(!frozen);
    if (frozen) p.mutable_grad() = torch::Tensor();
  }
}

TensorMap VisionTransformerImpl::parameter_map() const {
  TensorMap out;
  for (const auto& item : named_parameters()) out.emplace(item.key(), item.value());
  return out;
}

std::int64_t VisionTransformerImpl::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

void VisionTransformerImpl::save(const std::filesystem::path& path) const {
  nlohmann::json manifest = {{"kind", "backbone"},
                             {"config", cfg_.architecture_string()},
                             {"config_hash", fnv1a_hex(cfg_.architecture_string())}};
  write_archive(path, parameter_map(), manifest);
}

LoadReport VisionTransformerImpl::load_pretrained(const std::filesystem::path& path) {
  auto archive = read_archive(path);
  TensorMap source;
  const std::string prefix = "backbone.";
  for (auto& [name, t] : archive.tensors) {
    auto key = name.rfind(prefix, 0) == 0 ? name.substr(prefix.size()) : name;
    source.emplace(std::move(key), std::move(t));
  }
  auto targets = parameter_map();
  return assign_tensors(targets, source);
}

}  // namespace codadapt
