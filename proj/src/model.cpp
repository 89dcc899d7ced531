#include "codadapt/model.hpp"

namespace codadapt {

CodModelImpl::CodModelImpl(const ExperimentConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  backbone = register_module("backbone", VisionTransformer(cfg_.vit));
  if (!cfg_.vit.checkpoint.empty()) backbone->load_pretrained(cfg_.vit.checkpoint);
  adapter = register_module("adapter", Adapter(cfg_.vit, cfg_.adapter));
  head = register_module("head", DetectionHead(cfg_.adapter.channels, cfg_.head));
  reset_trainable(cfg_.train.seed);
  set_frozen_backbone(cfg_.train.freeze_backbone);
}

void CodModelImpl::reset_trainable(std::uint64_t seed) {
  adapter->reset_weights(seed);
  head->reset_weights(seed ^ 0x9e3779b97f4a7c15ULL);
}

InteractionResult CodModelImpl::features(const torch::Tensor& image) {
  return adapter->run_interactions(image, backbone);
}

torch::Tensor CodModelImpl::forward(const torch::Tensor& image) {
  return head->forward(features(image).pyramid);
}

torch::Tensor CodModelImpl::predict(const torch::Tensor& image,
                                    std::pair<std::int64_t, std::int64_t> size) {
  return head->predict(head->fpn_fuse(features(image).pyramid), size);
}

void CodModelImpl::set_frozen_backbone(bool frozen) {
  cfg_.train.freeze_backbone = frozen;
  backbone->set_frozen(frozen);
}

TensorMap CodModelImpl::parameter_map() const {
  TensorMap out;
  for (const auto& item : named_parameters()) out.emplace(item.key(), item.value());
  return out;
}

TensorMap CodModelImpl::adapter_head_map() const {
  TensorMap out;
  for (const auto& item : named_parameters()) {
    if (item.key().rfind("adapter.", 0) == 0 || item.key().rfind("head.", 0) == 0) {
      out.emplace(item.key(), item.value());
    }
  }
  return out;
}

std::vector<torch::Tensor> CodModelImpl::trainable_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& p : parameters()) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

std::int64_t CodModelImpl::trainable_parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : trainable_parameters()) n += p.numel();
  return n;
}

}  // namespace codadapt
