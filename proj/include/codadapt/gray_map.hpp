#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace codadapt {

/// Row-major single-channel map of doubles.
struct GrayMap {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<double> values;

  GrayMap() = default;
  GrayMap(std::int64_t h, std::int64_t w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h * w), fill) {}

  std::size_t size() const { return values.size(); }
  double& at(std::int64_t r, std::int64_t c) { return values[static_cast<std::size_t>(r * width + c)]; }
  double at(std::int64_t r, std::int64_t c) const {
    return values[static_cast<std::size_t>(r * width + c)];
  }
  bool same_shape(const GrayMap& o) const { return height == o.height && width == o.width; }

  /// Accepts (H, W), (1, H, W) or (1, 1, H, W).
  static GrayMap from_tensor(const torch::Tensor& t);
  torch::Tensor to_tensor() const;  ///< (H, W) float64
};

/// Reads any single- or multi-channel image as gray values scaled to [0, 1]
/// by the dtype maximum (255 for 8-bit, 65535 for 16-bit).
GrayMap read_gray_map(const std::filesystem::path& path);

/// Binarizes at half of the dtype maximum: value / max > 0.5 -> 1.
GrayMap read_binary_mask(const std::filesystem::path& path);

/// Writes round(255 * v) as an 8-bit single-channel image.
void write_gray_map(const std::filesystem::path& path, const GrayMap& map);

}  // namespace codadapt
