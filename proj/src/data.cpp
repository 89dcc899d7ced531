#include "codadapt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "codadapt/errors.hpp"

namespace codadapt {

namespace F = torch::nn::functional;
namespace fs = std::filesystem;

namespace {

const std::set<std::string>& image_extensions() {
  static const std::set<std::string> exts{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};
  return exts;
}

std::map<std::string, fs::path> files_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (image_extensions().count(ext)) out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

torch::Tensor read_rgb(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw InvalidInput("cannot read image " + path.string());
  cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  cv::Mat f;
  m.convertTo(f, CV_32FC3, 1.0 / 255.0);
  auto t = torch::from_blob(f.data, {f.rows, f.cols, 3}, torch::kFloat32).clone();
  return t.permute({2, 0, 1}).contiguous();
}

torch::Tensor read_mask(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  if (m.empty()) throw InvalidInput("cannot read mask " + path.string());
  const double max_value = m.depth() == CV_16U ? 65535.0 : 255.0;
  cv::Mat f;
  m.convertTo(f, CV_32F, 1.0 / max_value);
  auto t = torch::from_blob(f.data, {f.rows, f.cols}, torch::kFloat32).clone();
  return (t > 0.5).to(torch::kFloat32);
}

std::map<std::string, std::string> read_labels(const fs::path& file) {
  std::map<std::string, std::string> labels;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    auto stem = line.substr(0, comma);
    auto cat = line.substr(comma + 1);
    while (!cat.empty() && (cat.back() == '\r' || cat.back() == ' ')) cat.pop_back();
    if (stem == "stem" || stem == "id") continue;  // header
    labels[stem] = cat;
  }
  return labels;
}

std::string category_from_name(const std::string& stem) {
  // COD10K-CAM-1-Aquatic-3-Crab-32
  std::vector<std::string> parts;
  std::stringstream ss(stem);
  std::string p;
  while (std::getline(ss, p, '-')) parts.push_back(p);
  if (parts.size() >= 7 && parts[0] == "COD10K") return parts[5];
  return {};
}

}  // namespace

DatasetLoad load_dataset(const fs::path& root) {
  DatasetLoad out;
  const auto images = files_by_stem(root / "Imgs");
  const auto masks = files_by_stem(root / "GT");
  if (images.empty()) {
    out.warnings.push_back("no images found under " + (root / "Imgs").string());
  }
  std::map<std::string, std::string> labels;
  if (fs::exists(root / "labels.csv")) labels = read_labels(root / "labels.csv");

  for (const auto& [stem, img_path] : images) {
    const auto m = masks.find(stem);
    if (m == masks.end()) {
      out.warnings.push_back("image without mask skipped: " + stem);
      continue;
    }
    try {
      ImageSample s;
      s.id = stem;
      s.image = read_rgb(img_path);
      s.gt = read_mask(m->second);
      if (s.image.size(1) != s.gt.size(0) || s.image.size(2) != s.gt.size(1)) {
        throw InvalidInput("image and mask sizes differ");
      }
      s.original_size = {s.gt.size(0), s.gt.size(1)};
      const auto l = labels.find(stem);
      s.category = l != labels.end() ? l->second : category_from_name(stem);
      out.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      out.errors.emplace_back(img_path.string(), e.what());
    }
  }
  for (const auto& [stem, _] : masks) {
    if (!images.count(stem)) out.warnings.push_back("mask without image ignored: " + stem);
  }
  return out;
}

torch::Tensor resize_bilinear(const torch::Tensor& chw, std::int64_t h, std::int64_t w) {
  if (chw.size(-2) == h && chw.size(-1) == w) return chw;
  return F::interpolate(chw.unsqueeze(0), F::InterpolateFuncOptions()
                                              .size(std::vector<std::int64_t>{h, w})
                                              .mode(torch::kBilinear)
                                              .align_corners(false))
      .squeeze(0);
}

torch::Tensor resize_nearest(const torch::Tensor& hw, std::int64_t h, std::int64_t w) {
  if (hw.size(-2) == h && hw.size(-1) == w) return hw;
  return F::interpolate(hw.unsqueeze(0).unsqueeze(0),
                        F::InterpolateFuncOptions()
                            .size(std::vector<std::int64_t>{h, w})
                            .mode(torch::kNearest))
      .squeeze(0)
      .squeeze(0);
}

ModelInput preprocess(const ImageSample& sample, const ExperimentConfig& cfg) {
  const auto s = cfg.train.input_size;
  auto img = resize_bilinear(sample.image.to(torch::kFloat32), s, s);
  auto mean = torch::tensor(std::vector<double>(cfg.vit.pixel_mean.begin(), cfg.vit.pixel_mean.end()),
                            torch::kFloat32)
                  .view({3, 1, 1});
  auto std = torch::tensor(std::vector<double>(cfg.vit.pixel_std.begin(), cfg.vit.pixel_std.end()),
                           torch::kFloat32)
                 .view({3, 1, 1});
  ModelInput in;
  in.image = ((img - mean) / std).contiguous();
  in.gt = resize_nearest(sample.gt.to(torch::kFloat32), s, s).unsqueeze(0).contiguous();
  in.original_size = sample.original_size;
  return in;
}

std::pair<torch::Tensor, torch::Tensor> collate(const std::vector<ModelInput>& items) {
  std::vector<torch::Tensor> imgs, gts;
  imgs.reserve(items.size());
  gts.reserve(items.size());
  for (const auto& it : items) {
    imgs.push_back(it.image);
    gts.push_back(it.gt);
  }
  return {torch::stack(imgs), torch::stack(gts)};
}

void write_sample(const fs::path& root, const ImageSample& sample) {
  fs::create_directories(root / "Imgs");
  fs::create_directories(root / "GT");
  auto rgb = (sample.image.clamp(0, 1) * 255.0).round().to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  cv::Mat m(static_cast<int>(rgb.size(0)), static_cast<int>(rgb.size(1)), CV_8UC3, rgb.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite((root / "Imgs" / (sample.id + ".png")).string(), bgr)) {
    throw std::runtime_error("cannot write image for " + sample.id);
  }
  auto g = (sample.gt * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat gm(static_cast<int>(g.size(0)), static_cast<int>(g.size(1)), CV_8UC1, g.data_ptr());
  if (!cv::imwrite((root / "GT" / (sample.id + ".png")).string(), gm)) {
    throw std::runtime_error("cannot write mask for " + sample.id);
  }
}

// ---------------------------------------------------------------------------

ImageSample synthetic_sample(int style, std::uint64_t seed, std::int64_t size, std::string id) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int shape = style % 3;
  const int family = style / 3;
  const double pi = std::acos(-1.0);

  std::array<double, 3> base{0.25 + 0.5 * u(rng), 0.25 + 0.5 * u(rng), 0.25 + 0.5 * u(rng)};
  // object tint: a per-shape channel direction, rotated per family
  std::array<double, 3> tint{0, 0, 0};
  tint[(shape + family) % 3] = 0.22;
  tint[(shape + family + 1) % 3] = -0.08;

  const double bg_freq = 0.15 + 0.1 * u(rng);
  const double fg_freq = 0.45 + 0.15 * shape;
  const double phase = 2 * pi * u(rng);
  const double angle = pi * u(rng);

  const double n = static_cast<double>(size);
  const double cx = n * (0.4 + 0.2 * u(rng));
  const double cy = n * (0.4 + 0.2 * u(rng));
  const double rx = n * (0.22 + 0.1 * u(rng));
  const double ry = n * (0.22 + 0.1 * u(rng));
  std::array<std::pair<double, double>, 3> tri;
  for (int k = 0; k < 3; ++k) {
    const double a = angle + 2 * pi * k / 3.0 + 0.3 * (u(rng) - 0.5);
    const double r = n * (0.3 + 0.08 * u(rng));
    tri[k] = {cx + r * std::cos(a), cy + r * std::sin(a)};
  }
  auto inside = [&](double x, double y) {
    switch (shape) {
      case 0: {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
      }
      case 1: return std::abs(x - cx) <= rx && std::abs(y - cy) <= ry * 0.8;
      default: {
        auto cross = [](std::pair<double, double> a, std::pair<double, double> b, double px, double py) {
          return (b.first - a.first) * (py - a.second) - (b.second - a.second) * (px - a.first);
        };
        const double d1 = cross(tri[0], tri[1], x, y);
        const double d2 = cross(tri[1], tri[2], x, y);
        const double d3 = cross(tri[2], tri[0], x, y);
        const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
        const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
        return !(neg && pos);
      }
    }
  };

  std::normal_distribution<double> noise(0.0, 0.03);
  auto image = torch::empty({3, size, size}, torch::kFloat32);
  auto gt = torch::zeros({size, size}, torch::kFloat32);
  auto ia = image.accessor<float, 3>();
  auto ga = gt.accessor<float, 2>();
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const bool fg = inside(px, py);
      const double tex = fg ? 0.07 * std::sin(fg_freq * (px * std::cos(angle) + py * std::sin(angle)))
                            : 0.07 * std::sin(bg_freq * px + phase) * std::cos(bg_freq * py);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = base[ch] + (fg ? tint[ch] : 0.0) + tex + noise(rng);
        ia[ch][y][x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
      ga[y][x] = fg ? 1.0f : 0.0f;
    }
  }
  ImageSample s;
  s.id = std::move(id);
  s.image = image;
  s.gt = gt;
  s.original_size = {size, size};
  return s;
}

std::vector<ImageSample> synthetic_samples(int style, std::size_t count, std::int64_t size,
                                           std::uint64_t seed, const std::string& prefix) {
  std::vector<ImageSample> out;
  out.reserve(count);
  std::mt19937_64 seeder(seed * 1000003ULL + static_cast<std::uint64_t>(style));
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(synthetic_sample(style, seeder(), size, prefix + "-" + std::to_string(i)));
  }
  return out;
}

void write_synthetic_corpus(const fs::path& root, const std::vector<std::string>& tasks,
                            std::size_t n_train, std::size_t n_test, std::int64_t size,
                            std::uint64_t seed) {
  for (const auto* split : {"train", "test"}) {
    const auto dir = root / split;
    fs::create_directories(dir);
    std::ofstream labels(dir / "labels.csv");
    labels << "stem,category\n";
    const std::size_t count = std::string(split) == "train" ? n_train : n_test;
    const std::uint64_t split_seed = seed * 2 + (std::string(split) == "train" ? 0 : 1);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const auto samples =
          synthetic_samples(static_cast<int>(t), count, size, split_seed, tasks[t] + "-" + split);
      for (const auto& s : samples) {
        write_sample(dir, s);
        labels << s.id << ',' << tasks[t] << '\n';
      }
    }
  }
}

}  // namespace codadapt
