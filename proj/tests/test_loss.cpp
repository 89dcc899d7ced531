#include <gtest/gtest.h>

#include <cmath>

#include "codadapt/errors.hpp"
#include "codadapt/loss.hpp"

using namespace codadapt;

namespace {

auto f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

torch::Tensor random_gt(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return (torch::rand({h, w}, gen, f64()) > 0.6).to(torch::kFloat64);
}

}  // namespace

TEST(PixelWeights, ConstantMapsGiveOne) {
  LossConfig cfg;
  EXPECT_TRUE(torch::equal(pixel_weights(torch::zeros({40, 40}, f64()), cfg), torch::ones({40, 40}, f64())));
  EXPECT_TRUE(torch::equal(pixel_weights(torch::ones({40, 40}, f64()), cfg), torch::ones({40, 40}, f64())));
}

TEST(PixelWeights, InteriorOfLargeObjectIsOne) {
  auto gt = torch::zeros({80, 80}, f64());
  gt.slice(0, 0, 60).slice(1, 0, 60).fill_(1);
  const auto w = pixel_weights(gt, LossConfig{});
  EXPECT_DOUBLE_EQ(w[20][20].item<double>(), 1.0);
  EXPECT_GT(w[59][59].item<double>(), 1.0);
  EXPECT_GE(w.min().item<double>(), 1.0);
}

TEST(PixelWeights, SinglePixelHandValue) {
  auto gt = torch::zeros({9, 9}, f64());
  gt[4][4] = 1;
  LossConfig cfg;
  cfg.weight_window = 3;
  const auto w = pixel_weights(gt, cfg);
  EXPECT_NEAR(w[4][4].item<double>(), 1 + 5.0 * 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(w[3][3].item<double>(), 1 + 5.0 / 9.0, 1e-12);
  EXPECT_DOUBLE_EQ(w[0][0].item<double>(), 1.0);
}

TEST(PixelWeights, SymmetricPaddingAtBorder) {
  // foreground column at the border: mirrored padding repeats the edge value
  auto gt = torch::zeros({5, 5}, f64());
  gt.select(1, 0).fill_(1);
  const auto m = symmetric_box_mean(gt, 3);
  EXPECT_NEAR(m[2][0].item<double>(), 6.0 / 9.0, 1e-12);
  EXPECT_NEAR(m[2][1].item<double>(), 3.0 / 9.0, 1e-12);
}

TEST(PixelWeights, RejectsNonBinary) {
  auto gt = torch::zeros({4, 4}, f64());
  gt[0][0] = 0.5;
  EXPECT_THROW(pixel_weights(gt, LossConfig{}), InvalidInput);
}

TEST(WeightedBce, HandValues) {
  const auto gt = torch::tensor({1.0, 0.0}, f64()).view({2, 1});
  const auto w = torch::tensor({2.0, 1.0}, f64()).view({2, 1});
  EXPECT_NEAR(weighted_bce(torch::zeros({2, 1}, f64()), gt, w).item<double>(), std::log(2.0), 1e-12);
  const auto g = random_gt(6, 6, 1);
  const auto ones = torch::ones({6, 6}, f64());
  EXPECT_NEAR(weighted_bce(torch::zeros({6, 6}, f64()), g, ones).item<double>(), std::log(2.0), 1e-12);
  EXPECT_LT(weighted_bce(80 * g - 40, g, ones).item<double>(), 1e-10);
}

TEST(WeightedBce, ShapeMismatch) {
  EXPECT_THROW(weighted_bce(torch::zeros({3, 3}), torch::zeros({3, 4}), torch::ones({3, 3})), InvalidInput);
}

TEST(WeightedIou, HandValues) {
  const auto ones = torch::ones({4, 4}, f64());
  EXPECT_NEAR(weighted_iou(torch::full({4, 4}, 0.5, f64()), ones, ones).item<double>(), 0.5, 1e-6);
  EXPECT_NEAR(weighted_iou(torch::zeros({4, 4}, f64()), ones, ones).item<double>(), 1.0, 1e-6);
  const auto g = random_gt(6, 6, 2);
  EXPECT_LT(weighted_iou(g, g, torch::ones({6, 6}, f64())).item<double>(), 1e-9);
  EXPECT_THROW(weighted_iou(torch::zeros({2, 2}), torch::zeros({2, 3}), torch::ones({2, 2})), InvalidInput);
}

TEST(TotalLoss, PerfectPredictionVanishes) {
  const auto g = random_gt(16, 16, 3);
  EXPECT_LT(total_loss(80 * g - 40, g, LossConfig{}).item<double>(), 1e-6);
}

TEST(TotalLoss, DominatesEachTerm) {
  const auto g = random_gt(12, 12, 4);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(5);
  const auto x = torch::randn({12, 12}, gen, f64());
  LossConfig cfg;
  const auto w = pixel_weights(g, cfg);
  const double b = weighted_bce(x, g, w).item<double>();
  const double i = weighted_iou(torch::sigmoid(x), g, w, cfg.eps).item<double>();
  EXPECT_GE(b, 0);
  EXPECT_GE(i, 0);
  EXPECT_NEAR(total_loss(x, g, cfg).item<double>(), b + i, 1e-12);
}

TEST(TotalLoss, MonotoneAlongCorrectToInverted) {
  const auto g = random_gt(10, 10, 6);
  const auto good = 6 * g - 3;
  double prev = -1;
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    const auto x = (1 - t) * good + t * (-good);
    const double v = total_loss(x, g, LossConfig{}).item<double>();
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(TotalLoss, BatchIsMeanOfSamples) {
  const auto g1 = random_gt(8, 8, 7), g2 = random_gt(8, 8, 8);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(9);
  const auto x1 = torch::randn({8, 8}, gen, f64()), x2 = torch::randn({8, 8}, gen, f64());
  LossConfig cfg;
  const auto batched =
      total_loss(torch::stack({x1, x2}).unsqueeze(1), torch::stack({g1, g2}).unsqueeze(1), cfg);
  const double expect = (total_loss(x1, g1, cfg).item<double>() + total_loss(x2, g2, cfg).item<double>()) / 2;
  EXPECT_NEAR(batched.item<double>(), expect, 1e-12);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  LossConfig cfg;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto g = random_gt(8, 8, 100 + seed);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(200 + seed);
    auto x = (2 * torch::randn({8, 8}, gen, f64())).requires_grad_(true);
    total_loss(x, g, cfg).backward();
    const auto analytic = x.grad().clone();
    auto numeric = torch::zeros_like(analytic);
    const double h = 1e-6;
    torch::NoGradGuard ng;
    for (int i = 0; i < 64; ++i) {
      auto xp = x.detach().clone(), xm = x.detach().clone();
      xp.view(-1)[i] += h;
      xm.view(-1)[i] -= h;
      numeric.view(-1)[i] =
          (total_loss(xp, g, cfg).item<double>() - total_loss(xm, g, cfg).item<double>()) / (2 * h);
    }
    const double rel = (analytic - numeric).norm().item<double>() / numeric.norm().item<double>();
    EXPECT_LT(rel, 1e-3) << "seed " << seed;
  }
}
