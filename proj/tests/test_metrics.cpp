#include <gtest/gtest.h>

#include <fstream>
#include <numeric>

#include "codadapt/errors.hpp"
#include "codadapt/metrics.hpp"
#include "support.hpp"

using namespace codadapt;
using testutil::GrayMap;
namespace oracle = testutil::oracle;

namespace {

GrayMap make(std::int64_t h, std::int64_t w, std::vector<double> v) {
  GrayMap m(h, w);
  m.values = std::move(v);
  return m;
}

}  // namespace

TEST(Score, TableRows) {
  EXPECT_NEAR(score(0.883, 0.943, 0.836, 0.016), 2.646, 1e-12);
  EXPECT_NEAR(score(0.909, 0.959, 0.891, 0.018), 2.741, 1e-12);
  EXPECT_EQ(score(0, 0, 0, 0), 0.0);
}

TEST(Mae, HandValues) {
  const auto gt = make(2, 2, {1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(mae(make(2, 2, {1, 0.5, 0, 0}), gt), 0.125);
  EXPECT_DOUBLE_EQ(mae(gt, gt), 0.0);
  EXPECT_DOUBLE_EQ(mae(GrayMap(3, 3, 1.0), GrayMap(3, 3, 0.0)), 1.0);
  EXPECT_THROW(mae(GrayMap(2, 3), GrayMap(3, 2)), InvalidInput);
}

TEST(SMeasure, DegenerateBranches) {
  EXPECT_DOUBLE_EQ(s_measure(GrayMap(4, 4, 0.0), GrayMap(4, 4, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(s_measure(GrayMap(4, 4, 0.25), GrayMap(4, 4, 0.0)), 0.75);
  EXPECT_DOUBLE_EQ(s_measure(GrayMap(4, 4, 0.25), GrayMap(4, 4, 1.0)), 0.25);
}

TEST(SMeasure, InvertedIsWorse) {
  std::mt19937_64 rng(3);
  const auto gt = testutil::random_gt(16, 16, rng);
  GrayMap inv = gt;
  for (auto& v : inv.values) v = 1.0 - v;
  EXPECT_NEAR(s_measure(gt, gt), 1.0, 1e-6);
  EXPECT_LT(s_measure(inv, gt), s_measure(gt, gt));
  EXPECT_NEAR(s_measure(inv, gt), oracle::s_measure(inv, gt), 1e-10);
}

TEST(EMeasure, BinaryPerfectIsOne) {
  std::mt19937_64 rng(4);
  const auto gt = testutil::random_gt(12, 17, rng);
  EXPECT_NEAR(e_measure_mean(gt, gt), 1.0, 1e-12);
}

TEST(EMeasure, HalfGrayStable) {
  GrayMap gt(8, 8);
  for (std::int64_t r = 0; r < 4; ++r) {
    for (std::int64_t c = 0; c < 8; ++c) gt.at(r, c) = 1.0;
  }
  const GrayMap pred(8, 8, 0.5);
  const double a = e_measure_mean(pred, gt);
  EXPECT_EQ(a, e_measure_mean(pred, gt));
  EXPECT_NEAR(a, oracle::e_measure_mean(pred, gt), 1e-12);
}

TEST(EMeasure, CorruptionNeverHelps) {
  std::mt19937_64 rng(5);
  const auto gt = testutil::random_gt(16, 16, rng);
  const double perfect = e_measure_mean(gt, gt);
  for (int k : {1, 4, 16}) {
    auto pred = gt;
    std::vector<std::size_t> idx(pred.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < k; ++i) pred.values[idx[i]] = 1.0 - pred.values[idx[i]];
    EXPECT_LE(e_measure_mean(pred, gt), perfect) << "k=" << k;
  }
}

TEST(EMeasure, DegenerateGt) {
  EXPECT_DOUBLE_EQ(e_measure_mean(GrayMap(4, 4, 0.0), GrayMap(4, 4, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(e_measure_mean(GrayMap(4, 4, 1.0), GrayMap(4, 4, 1.0)), 1.0);
  EXPECT_DOUBLE_EQ(e_measure_mean(GrayMap(4, 4, 1.0), GrayMap(4, 4, 0.0)), 0.0);
}

TEST(WeightedF, Extremes) {
  std::mt19937_64 rng(6);
  const auto gt = testutil::random_gt(16, 16, rng);
  EXPECT_NEAR(weighted_fmeasure(gt, gt), 1.0, 1e-9);
  // error smoothing lets boundary pixels borrow from correct neighbours, so an
  // empty prediction scores low but not zero
  const GrayMap empty(16, 16, 0.0);
  EXPECT_NEAR(weighted_fmeasure(empty, gt), oracle::weighted_fmeasure(empty, gt), 1e-12);
  EXPECT_LT(weighted_fmeasure(empty, gt), 0.5);
  EXPECT_EQ(weighted_fmeasure(GrayMap(4, 4, 0.3), GrayMap(4, 4, 0.0)), 0.0);
}

TEST(Metrics, OracleAgreementOnRandomPairs) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const auto h = 8 + static_cast<std::int64_t>(rng() % 12);
    const auto w = 8 + static_cast<std::int64_t>(rng() % 12);
    const auto gt = testutil::random_gt(h, w, rng);
    const auto pred = testutil::random_pred(h, w, rng);
    EXPECT_NEAR(mae(pred, gt), oracle::mae(pred, gt), 1e-12);
    EXPECT_NEAR(s_measure(pred, gt), oracle::s_measure(pred, gt), 1e-10);
    EXPECT_NEAR(e_measure_mean(pred, gt), oracle::e_measure_mean(pred, gt), 1e-10);
    EXPECT_NEAR(weighted_fmeasure(pred, gt), oracle::weighted_fmeasure(pred, gt), 1e-10);
  }
}

TEST(Metrics, RangeOnRandomPairs) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const auto gt = testutil::random_gt(10, 10, rng);
    const auto pred = testutil::random_pred(10, 10, rng);
    const auto m = evaluate_pair(pred, gt);
    for (double v : {m.s_alpha, m.e_phi, m.f_w_beta, m.mae}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Report, AggregateAndSerialize) {
  std::vector<SampleMetrics> s{{0.8, 0.9, 0.7, 0.1}, {0.6, 0.7, 0.5, 0.3}};
  const auto r = aggregate(s);
  EXPECT_DOUBLE_EQ(r.s_alpha, 0.7);
  EXPECT_DOUBLE_EQ(r.mae, 0.2);
  EXPECT_NEAR(r.score, r.s_alpha + r.e_phi + r.f_w_beta - r.mae, 1e-12);
  EXPECT_EQ(r.n_samples, 2u);
  const auto back = MetricReport::from_json(r.to_json());
  EXPECT_EQ(back.score, r.score);
  EXPECT_EQ(MetricReport::csv_header(), "s_alpha,e_phi,f_w_beta,mae,score,n_samples");
}

class DatasetDir : public ::testing::Test {
 protected:
  void SetUp() override {
    root = testutil::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(root / "pred");
    std::filesystem::create_directories(root / "gt");
  }
  std::filesystem::path root;
};

TEST_F(DatasetDir, PerfectSetScoresThree) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 3; ++i) {
    const auto gt = testutil::random_gt(20, 24, rng);
    write_gray_map(root / "gt" / ("s" + std::to_string(i) + ".png"), gt);
    write_gray_map(root / "pred" / ("s" + std::to_string(i) + ".png"), gt);
  }
  const auto ev = evaluate_dataset(root / "pred", root / "gt");
  EXPECT_EQ(ev.report.n_samples, 3u);
  EXPECT_NEAR(ev.report.s_alpha, 1, 1e-6);
  EXPECT_NEAR(ev.report.e_phi, 1, 1e-6);
  EXPECT_NEAR(ev.report.f_w_beta, 1, 1e-6);
  EXPECT_NEAR(ev.report.mae, 0, 1e-6);
  EXPECT_NEAR(ev.report.score, 3, 1e-6);
}

TEST_F(DatasetDir, MeansOfPerSampleOracles) {
  std::mt19937_64 rng(10);
  double s = 0, e = 0, f = 0, m = 0;
  for (int i = 0; i < 3; ++i) {
    const auto gt = testutil::random_gt(16, 16, rng);
    auto pred = testutil::random_pred(16, 16, rng);
    for (auto& v : pred.values) v = std::round(v * 255) / 255;  // what an 8-bit file holds
    write_gray_map(root / "gt" / ("s" + std::to_string(i) + ".png"), gt);
    write_gray_map(root / "pred" / ("s" + std::to_string(i) + ".png"), pred);
    s += oracle::s_measure(pred, gt) / 3;
    e += oracle::e_measure_mean(pred, gt) / 3;
    f += oracle::weighted_fmeasure(pred, gt) / 3;
    m += oracle::mae(pred, gt) / 3;
  }
  const auto r = evaluate_dataset(root / "pred", root / "gt").report;
  EXPECT_NEAR(r.s_alpha, s, 1e-9);
  EXPECT_NEAR(r.e_phi, e, 1e-9);
  EXPECT_NEAR(r.f_w_beta, f, 1e-9);
  EXPECT_NEAR(r.mae, m, 1e-9);
}

TEST_F(DatasetDir, EmptyIntersectionListsNames) {
  write_gray_map(root / "gt" / "alpha.png", GrayMap(4, 4, 1.0));
  write_gray_map(root / "pred" / "beta.png", GrayMap(4, 4, 1.0));
  try {
    evaluate_dataset(root / "pred", root / "gt");
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("alpha"), std::string::npos);
    EXPECT_NE(msg.find("beta"), std::string::npos);
  }
}

TEST_F(DatasetDir, SizeMismatchIsPerSampleError) {
  write_gray_map(root / "gt" / "a.png", GrayMap(4, 4, 1.0));
  write_gray_map(root / "pred" / "a.png", GrayMap(4, 5, 1.0));
  GrayMap g(4, 4, 0.0);
  g.at(1, 1) = 1;
  write_gray_map(root / "gt" / "b.png", g);
  write_gray_map(root / "pred" / "b.png", g);
  const auto ev = evaluate_dataset(root / "pred", root / "gt");
  ASSERT_EQ(ev.sample_errors.size(), 1u);
  EXPECT_EQ(ev.sample_errors[0].first, "a");
  EXPECT_EQ(ev.report.n_samples, 1u);
}
