#include "codadapt/gray_map.hpp"

#include <cmath>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "codadapt/errors.hpp"

namespace codadapt {
namespace {

cv::Mat read_single_channel(const std::filesystem::path& path, double& max_value) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
  if (m.empty()) throw InvalidInput("cannot read image " + path.string());
  if (m.channels() == 3) {
    cv::cvtColor(m, m, cv::COLOR_BGR2GRAY);
  } else if (m.channels() == 4) {
    cv::cvtColor(m, m, cv::COLOR_BGRA2GRAY);
  }
  switch (m.depth()) {
    case CV_8U: max_value = 255.0; break;
    case CV_16U: max_value = 65535.0; break;
    default: max_value = 1.0; break;
  }
  cv::Mat d;
  m.convertTo(d, CV_64F);
  return d;
}

GrayMap from_mat(const cv::Mat& d, double scale) {
  GrayMap g(d.rows, d.cols);
  for (int r = 0; r < d.rows; ++r) {
    const auto* row = d.ptr<double>(r);
    for (int c = 0; c < d.cols; ++c) g.at(r, c) = row[c] / scale;
  }
  return g;
}

}  // namespace

GrayMap GrayMap::from_tensor(const torch::Tensor& t) {
  auto x = t.detach().to(torch::kCPU, torch::kFloat64);
  while (x.dim() > 2 && x.size(0) == 1) x = x.squeeze(0);
  if (x.dim() != 2) {
    std::ostringstream os;
    os << "GrayMap::from_tensor: expected a single 2-D map, got " << t.sizes();
    throw InvalidInput(os.str());
  }
  x = x.contiguous();
  GrayMap g(x.size(0), x.size(1));
  std::copy(x.data_ptr<double>(), x.data_ptr<double>() + x.numel(), g.values.begin());
  return g;
}

torch::Tensor GrayMap::to_tensor() const {
  return torch::tensor(values, torch::kFloat64).reshape({height, width});
}

GrayMap read_gray_map(const std::filesystem::path& path) {
  double max_value = 1.0;
  auto d = read_single_channel(path, max_value);
  return from_mat(d, max_value);
}

GrayMap read_binary_mask(const std::filesystem::path& path) {
  auto g = read_gray_map(path);
  for (auto& v : g.values) v = v > 0.5 ? 1.0 : 0.0;
  return g;
}

void write_gray_map(const std::filesystem::path& path, const GrayMap& map) {
  cv::Mat m(static_cast<int>(map.height), static_cast<int>(map.width), CV_8UC1);
  for (std::int64_t r = 0; r < map.height; ++r) {
    auto* row = m.ptr<std::uint8_t>(static_cast<int>(r));
    for (std::int64_t c = 0; c < map.width; ++c) {
      const double v = std::clamp(map.at(r, c), 0.0, 1.0);
      row[c] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace codadapt
