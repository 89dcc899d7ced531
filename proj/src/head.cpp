#include "codadapt/head.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "codadapt/errors.hpp"
#include "nn_init.hpp"

namespace codadapt {

namespace F = torch::nn::functional;
namespace nn = torch::nn;

namespace {

nn::Sequential conv_module(std::int64_t in, std::int64_t out, std::int64_t k) {
  return nn::Sequential(
      nn::Conv2d(nn::Conv2dOptions(in, out, k).padding(k / 2).bias(false)),
      nn::GroupNorm(nn::GroupNormOptions(detail::norm_groups(out), out)), nn::ReLU());
}

torch::Tensor resize_bilinear(const torch::Tensor& x, std::int64_t h, std::int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

PyramidPoolingImpl::PyramidPoolingImpl(std::int64_t in_channels, std::int64_t out_channels,
                                       std::vector<std::int64_t> scales)
    : scales_(std::move(scales)) {
  branches = register_module("branches", nn::ModuleList());
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    branches->push_back(conv_module(in_channels, out_channels, 1));
  }
  const auto cat_channels = in_channels + static_cast<std::int64_t>(scales_.size()) * out_channels;
  bottleneck = register_module("bottleneck", conv_module(cat_channels, out_channels, 3));
}

torch::Tensor PyramidPoolingImpl::pooled_branch(const torch::Tensor& x, std::int64_t scale) {
  auto pooled = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions({scale, scale}));
  return resize_bilinear(pooled, x.size(2), x.size(3));
}

torch::Tensor PyramidPoolingImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> parts{x};
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    auto pooled = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions({scales_[i], scales_[i]}));
    auto projected = branches[i]->as<nn::Sequential>()->forward(pooled);
    parts.push_back(resize_bilinear(projected, x.size(2), x.size(3)));
  }
  return bottleneck->forward(torch::cat(parts, 1));
}

void PyramidPoolingImpl::reset_weights(at::Generator& gen) { detail::reset_conv_tree(*this, gen); }

DetectionHeadImpl::DetectionHeadImpl(std::int64_t in_channels, const HeadConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto fc = cfg_.fpn_channels;
  lateral = register_module("lateral", nn::ModuleList());
  smooth = register_module("smooth", nn::ModuleList());
  for (int i = 0; i < 3; ++i) {
    lateral->push_back(conv_module(in_channels, fc, 1));
    smooth->push_back(conv_module(fc, fc, 3));
  }
  if (cfg_.kind == HeadKind::UperNet) {
    ppm = register_module("ppm", PyramidPooling(in_channels, fc, cfg_.ppm_scales));
  } else {
    lateral->push_back(conv_module(in_channels, fc, 1));
  }
  fuse = register_module("fuse", conv_module(4 * fc, fc, 3));
  classifier = register_module("classifier", nn::Conv2d(nn::Conv2dOptions(fc, 1, 1)));
  reset_weights(0);
}

void DetectionHeadImpl::reset_weights(std::uint64_t seed) {
  auto gen = detail::make_generator(seed);
  detail::reset_conv_tree(*this, gen);
  // small classifier so initial probabilities sit near 0.5
  detail::normal_init(classifier->weight, 0.01, gen);
  detail::zero_init(classifier->bias);
}

torch::Tensor DetectionHeadImpl::top(const torch::Tensor& p32) {
  if (cfg_.kind == HeadKind::UperNet) return ppm->forward(p32);
  return lateral[3]->as<nn::Sequential>()->forward(p32);
}

torch::Tensor DetectionHeadImpl::fpn_fuse(const FeaturePyramid& pyramid) {
  const std::array<torch::Tensor, 3> inputs{pyramid.p4, pyramid.p8, pyramid.p16};
  std::array<torch::Tensor, 4> lat;
  for (int i = 0; i < 3; ++i) lat[i] = lateral[i]->as<nn::Sequential>()->forward(inputs[i]);
  lat[3] = top(pyramid.p32);
  for (int i = 3; i > 0; --i) {
    lat[i - 1] = lat[i - 1] + resize_bilinear(lat[i], lat[i - 1].size(2), lat[i - 1].size(3));
  }
  const auto h = lat[0].size(2);
  const auto w = lat[0].size(3);
  std::vector<torch::Tensor> outs;
  for (int i = 0; i < 3; ++i) {
    outs.push_back(resize_bilinear(smooth[i]->as<nn::Sequential>()->forward(lat[i]), h, w));
  }
  outs.push_back(resize_bilinear(lat[3], h, w));
  return fuse->forward(torch::cat(outs, 1));
}

torch::Tensor DetectionHeadImpl::logits(const torch::Tensor& fused) { return classifier(fused); }

torch::Tensor DetectionHeadImpl::predict(const torch::Tensor& fused,
                                         std::pair<std::int64_t, std::int64_t> size) {
  if (size.first <= 0 || size.second <= 0) {
    throw InvalidArgument("predict: original size must be positive, got " +
                          std::to_string(size.first) + "x" + std::to_string(size.second));
  }
  return logits_to_probabilities(logits(fused), size);
}

torch::Tensor logits_to_probabilities(const torch::Tensor& logits,
                                      std::pair<std::int64_t, std::int64_t> size) {
  if (size.first <= 0 || size.second <= 0) {
    throw InvalidArgument("predict: original size must be positive, got " +
                          std::to_string(size.first) + "x" + std::to_string(size.second));
  }
  auto x = resize_bilinear(logits.to(torch::kFloat64), size.first, size.second);
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return torch::sigmoid(x).clamp(lo, hi);
}

}  // namespace codadapt
