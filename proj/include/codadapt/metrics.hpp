#pragma once

// Camouflaged-object evaluation metrics. Predictions are maps in [0, 1];
// ground truth maps are binary (any value > 0.5 counts as foreground).

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "codadapt/gray_map.hpp"
#include "json.hpp"

namespace codadapt {

/// Mean absolute error.
double mae(const GrayMap& pred, const GrayMap& gt);

/// Structure measure: alpha * S_object + (1 - alpha) * S_region.
///
/// Degenerate ground truth follows the original definition: all-background
/// gives 1 - mean(pred), all-foreground gives mean(pred). The region split uses
/// the 1-based foreground centroid rounded half away from zero; quadrant
/// variances divide by (N - 1 + eps) and empty quadrants (zero weight) are skipped.
/// Single-pixel object sets have zero standard deviation.
double s_measure(const GrayMap& pred, const GrayMap& gt, double alpha = 0.5);

/// Mean enhanced-alignment measure over 256 binarizations pred > k/256,
/// k = 0..255, each normalized by the pixel count. Every threshold splits a
/// binary prediction the same way, so binary pred == gt scores exactly 1.
double e_measure_mean(const GrayMap& pred, const GrayMap& gt);

/// Weighted F-measure with dependency (7x7 Gaussian, sigma 5, zero padding)
/// and location (distance-to-object) weighting of errors. Background pixels
/// take the error of their nearest foreground pixel (exact Euclidean distance;
/// ties go to the lowest row-major index). Empty ground truth returns 0.
double weighted_fmeasure(const GrayMap& pred, const GrayMap& gt, double beta2 = 1.0);

/// S + E + F - M.
double score(double s_alpha, double e_phi, double f_w_beta, double mae_value);

struct SampleMetrics {
  double s_alpha = 0;
  double e_phi = 0;
  double f_w_beta = 0;
  double mae = 0;
};

SampleMetrics evaluate_pair(const GrayMap& pred, const GrayMap& gt);

struct MetricReport {
  double s_alpha = 0;
  double e_phi = 0;
  double f_w_beta = 0;
  double mae = 0;
  double score = 0;
  std::size_t n_samples = 0;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  static std::string csv_header();
  std::string csv_row() const;
};

/// Per-dataset means (in sample order); score is computed from the means.
MetricReport aggregate(const std::vector<SampleMetrics>& samples);

struct DatasetEvaluation {
  MetricReport report;
  std::vector<std::string> unmatched;  ///< stems present in only one directory
  std::vector<std::pair<std::string, std::string>> sample_errors;  ///< stem, message
};

/// Pairs maps by file stem and evaluates every pair at ground-truth
/// resolution. Throws InvalidInput (listing every name) when no stem matches.
DatasetEvaluation evaluate_dataset(const std::filesystem::path& pred_dir,
                                   const std::filesystem::path& gt_dir);

}  // namespace codadapt
