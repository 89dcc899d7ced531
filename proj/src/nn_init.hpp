#pragma once

// Weight initialisation helpers that draw from an explicit generator so model
// construction never touches the global RNG.

#include <cmath>
#include <cstdint>

#include <torch/torch.h>

namespace codadapt::detail {

inline at::Generator make_generator(std::uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

inline void normal_init(torch::Tensor t, double std, at::Generator& gen) {
  torch::NoGradGuard g;
  t.normal_(0.0, std, gen);
}

inline void uniform_init(torch::Tensor t, double bound, at::Generator& gen) {
  torch::NoGradGuard g;
  t.uniform_(-bound, bound, gen);
}

inline void zero_init(torch::Tensor t) {
  torch::NoGradGuard g;
  t.zero_();
}

inline void one_init(torch::Tensor t) {
  torch::NoGradGuard g;
  t.fill_(1.0);
}

inline void init_linear(torch::nn::Linear& l, at::Generator& gen, double std = 0.02) {
  normal_init(l->weight, std, gen);
  if (l->bias.defined()) zero_init(l->bias);
}

inline void init_layer_norm(torch::nn::LayerNorm& ln) {
  one_init(ln->weight);
  zero_init(ln->bias);
}

// He-uniform over fan_in for convolutions feeding ReLUs.
inline void init_conv(torch::Tensor weight, torch::Tensor bias, at::Generator& gen) {
  const auto fan_in = weight.size(1) * (weight.dim() > 2 ? weight[0][0].numel() : 1);
  uniform_init(weight, std::sqrt(6.0 / static_cast<double>(fan_in)), gen);
  if (bias.defined()) zero_init(bias);
}

inline void init_group_norm(torch::nn::GroupNorm& gn) {
  one_init(gn->weight);
  zero_init(gn->bias);
}

// Re-initialises every convolution and group norm below `root`.
inline void reset_conv_tree(torch::nn::Module& root, at::Generator& gen) {
  for (const auto& m : root.modules(/*include_self=*/false)) {
    if (auto* c = m->as<torch::nn::Conv2dImpl>()) {
      init_conv(c->weight, c->bias, gen);
    } else if (auto* t = m->as<torch::nn::ConvTranspose2dImpl>()) {
      init_conv(t->weight, t->bias, gen);
    } else if (auto* g = m->as<torch::nn::GroupNormImpl>()) {
      one_init(g->weight);
      zero_init(g->bias);
    }
  }
}

inline std::int64_t norm_groups(std::int64_t channels) {
  for (std::int64_t g : {8, 4, 2}) {
    if (channels % g == 0) return g;
  }
  return 1;
}

}  // namespace codadapt::detail
