#include "codadapt/loss.hpp"

#include <sstream>

#include "codadapt/errors.hpp"

namespace codadapt {

namespace F = torch::nn::functional;

namespace {

torch::Tensor as_batch(const torch::Tensor& t, const char* what) {
  if (t.dim() == 2) return t.unsqueeze(0).unsqueeze(0);
  if (t.dim() == 4 && t.size(1) == 1) return t;
  std::ostringstream os;
  os << what << ": expected (H, W) or (B, 1, H, W), got " << t.sizes();
  throw InvalidInput(os.str());
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
    throw InvalidInput(os.str());
  }
}

void require_binary(const torch::Tensor& gt) {
  if (!torch::logical_or(gt == 0, gt == 1).all().item<bool>()) {
    throw InvalidInput("pixel_weights: ground truth must be binary {0, 1}");
  }
}

// numpy-style "symmetric" reflection of an index into [0, n)
torch::Tensor mirror_index(std::int64_t n, std::int64_t pad) {
  std::vector<std::int64_t> idx;
  idx.reserve(n + 2 * pad);
  const std::int64_t period = 2 * n;
  for (std::int64_t i = -pad; i < n + pad; ++i) {
    const auto m = ((i % period) + period) % period;
    idx.push_back(m < n ? m : period - 1 - m);
  }
  return torch::tensor(idx, torch::kInt64);
}

}  // namespace

torch::Tensor symmetric_box_mean(const torch::Tensor& map, std::int64_t k) {
  auto x = as_batch(map, "symmetric_box_mean");
  const auto pad = k / 2;
  x = x.index_select(2, mirror_index(x.size(2), pad)).index_select(3, mirror_index(x.size(3), pad));
  auto mean = F::avg_pool2d(x, F::AvgPool2dFuncOptions(k).stride(1).padding(0));
  return map.dim() == 2 ? mean.squeeze(0).squeeze(0) : mean;
}

torch::Tensor pixel_weights(const torch::Tensor& gt, const LossConfig& cfg) {
  cfg.validate();
  require_binary(gt);
  return 1.0 + cfg.weight_gain * (symmetric_box_mean(gt, cfg.weight_window) - gt).abs();
}

torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& gt,
                           const torch::Tensor& w) {
  require_same_shape(logits, gt, "weighted_bce");
  require_same_shape(logits, w, "weighted_bce");
  auto x = as_batch(logits, "weighted_bce");
  auto g = as_batch(gt, "weighted_bce");
  auto wb = as_batch(w, "weighted_bce");
  auto bce = x.clamp_min(0) - x * g + torch::log1p(torch::exp(-x.abs()));
  auto per_sample = (wb * bce).sum({1, 2, 3}) / wb.sum({1, 2, 3});
  return per_sample.mean();
}

torch::Tensor weighted_iou(const torch::Tensor& probs, const torch::Tensor& gt,
                           const torch::Tensor& w, double eps) {
  require_same_shape(probs, gt, "weighted_iou");
  require_same_shape(probs, w, "weighted_iou");
  auto p = as_batch(probs, "weighted_iou");
  auto g = as_batch(gt, "weighted_iou");
  auto wb = as_batch(w, "weighted_iou");
  auto inter = (wb * p * g).sum({1, 2, 3});
  auto uni = (wb * (p + g - p * g)).sum({1, 2, 3});
  return (1.0 - (inter + eps) / (uni + eps)).mean();
}

torch::Tensor total_loss(const torch::Tensor& logits, const torch::Tensor& gt,
                         const LossConfig& cfg) {
  require_same_shape(logits, gt, "total_loss");
  auto w = pixel_weights(gt, cfg);
  return weighted_bce(logits, gt, w) + weighted_iou(torch::sigmoid(logits), gt, w, cfg.eps);
}

}  // namespace codadapt
