#pragma once

// Hard-pixel weighted BCE + IoU objective. Maps are (H, W) or (B, 1, H, W);
// batched inputs are reduced per sample and then averaged over the batch.

#include <torch/torch.h>

#include "codadapt/config.hpp"

namespace codadapt {

/// k x k local mean with symmetric (edge-including mirror) padding, so
/// constant maps stay constant up to the border.
torch::Tensor symmetric_box_mean(const torch::Tensor& map, std::int64_t k);

/// w = 1 + gain * |boxmean_k(gt) - gt|. Throws InvalidInput for non-binary gt.
torch::Tensor pixel_weights(const torch::Tensor& gt, const LossConfig& cfg);

/// sum(w * BCE(sigmoid(logits), gt)) / sum(w), evaluated in logit space.
torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& gt,
                           const torch::Tensor& w);

/// 1 - (sum(w p g) + eps) / (sum(w (p + g - p g)) + eps).
torch::Tensor weighted_iou(const torch::Tensor& probs, const torch::Tensor& gt,
                           const torch::Tensor& w, double eps = 1e-6);

/// weighted_bce + weighted_iou with weights derived from gt.
torch::Tensor total_loss(const torch::Tensor& logits, const torch::Tensor& gt,
                         const LossConfig& cfg);

}  // namespace codadapt
